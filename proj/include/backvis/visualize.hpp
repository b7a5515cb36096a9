#pragma once

#include <vector>

#include "backvis/network.hpp"
#include "backvis/tensor.hpp"

namespace backvis {

/// Selects how the backward pass treats each ReLU: the saliency map keeps the
/// forward mask only (true gradient), DeconvNet clamps negative top gradients
/// instead, and GBP applies both masks.
enum class VisMethod { Saliency, DeconvNet, GBP };

inline const char* vis_method_name(VisMethod m) {
    switch (m) {
        case VisMethod::Saliency: return "saliency";
        case VisMethod::DeconvNet: return "deconvnet";
        case VisMethod::GBP: return "gbp";
    }
    return "?";
}

/// Modified gradient through one ReLU unit with pre-activation y and incoming
/// top gradient r. Indicators are strict: I(0) = 0.
inline double relu_rule(double r, double y, VisMethod method) {
    switch (method) {
        case VisMethod::Saliency: return y > 0.0 ? r : 0.0;
        case VisMethod::DeconvNet: return r > 0.0 ? r : 0.0;
        case VisMethod::GBP: return (y > 0.0 && r > 0.0) ? r : 0.0;
    }
    return 0.0;
}

struct VisResult {
    Tensor map;   // normalized so ||map||_2 <= 1
    Tensor raw;   // unnormalized modified gradient
    std::size_t target_logit = 0;
    VisMethod method = VisMethod::Saliency;
    double z_k = 1.0;  // divisor actually applied: max(||raw||, 1)
};

/// Per-layer parameter gradients, aligned with net.specs. Only filled for
/// conv/dense layers; used by the trainer (saliency rule == true gradient).
struct ParamGrads {
    std::vector<Tensor> grads;
};

struct BackwardHooks {
    // grad w.r.t. each layer's OUTPUT (the gradient arriving at that layer's
    // backward step), aligned with net.specs.
    std::vector<Tensor>* grad_at_output = nullptr;
    ParamGrads* param_grads = nullptr;
    // Treat max-pool backward as gradient replication to every window cell
    // instead of argmax routing. Used by the pooling-effect oracle.
    bool pool_blind = false;
};

/// Core modified backward pass: Dense/Conv backpropagate through their plain
/// linear transposes for every method; ReLU applies relu_rule; MaxPool routes
/// to the recorded argmax. A ReLU placed before a pool therefore sees the
/// gradient after pool routing, which is what turns DeconvNet-with-pool into
/// a GBP-like rule.
inline Tensor backward_seeded(const Network& net, const ForwardTrace& trace, const Tensor& seed, VisMethod method,
                              const BackwardHooks& hooks = {}) {
    if (trace.layers.size() != net.specs.size())
        throw std::invalid_argument("backward: trace does not match network (layer count)");
    if (seed.numel() != trace.logits.numel())
        throw std::invalid_argument("backward: seed gradient has " + std::to_string(seed.numel()) +
                                    " entries, logits have " + std::to_string(trace.logits.numel()));
    if (hooks.grad_at_output) hooks.grad_at_output->assign(net.specs.size(), Tensor());
    if (hooks.param_grads) hooks.param_grads->grads.assign(net.specs.size(), Tensor());

    Tensor g = seed;
    for (std::size_t li = net.specs.size(); li-- > 0;) {
        const LayerSpec& spec = net.specs[li];
        const LayerTrace& lt = trace.layers[li];
        if (hooks.grad_at_output) (*hooks.grad_at_output)[li] = g;
        switch (spec.kind) {
            case LayerKind::Dense: {
                if (hooks.param_grads) {
                    // dV[i,k] = input[i] * g[k]
                    const Tensor& in = lt.input;
                    Tensor dv({in.numel(), spec.out_features});
                    for (std::size_t i = 0; i < in.numel(); ++i) {
                        const double xv = in.data[i];
                        if (xv == 0.0) continue;
                        for (std::size_t k = 0; k < spec.out_features; ++k) dv.data[i * spec.out_features + k] = xv * g.data[k];
                    }
                    hooks.param_grads->grads[li] = std::move(dv);
                }
                g = matvec(net.params[li], g);
                break;
            }
            case LayerKind::Flatten:
                g = g.reshaped(lt.input.shape);
                break;
            case LayerKind::MaxPool: {
                const PoolGeom& geom = net.pool_geoms[li];
                Tensor gin(lt.input.shape);
                if (!hooks.pool_blind) {
                    for (std::size_t o = 0; o < lt.argmax.size(); ++o) gin.data[lt.argmax[o]] += g.data[o];
                } else {
                    for (std::size_t oy = 0; oy < geom.out_h; ++oy)
                        for (std::size_t ox = 0; ox < geom.out_w; ++ox)
                            for (std::size_t c = 0; c < geom.channels; ++c) {
                                const double gv = g.data[(oy * geom.out_w + ox) * geom.channels + c];
                                for (std::size_t dy = 0; dy < geom.wh; ++dy)
                                    for (std::size_t dx = 0; dx < geom.ww; ++dx) {
                                        const std::size_t iy = oy * geom.stride + dy, ix = ox * geom.stride + dx;
                                        gin.data[(iy * geom.in_w + ix) * geom.channels + c] += gv;
                                    }
                            }
                }
                g = std::move(gin);
                break;
            }
            case LayerKind::ReLU: {
                Tensor gin(lt.input.shape);
                for (std::size_t i = 0; i < gin.numel(); ++i) gin.data[i] = relu_rule(g.data[i], lt.input.data[i], method);
                g = std::move(gin);
                break;
            }
            case LayerKind::Conv: {
                const PatchPlan& plan = net.conv_plans[li];
                Tensor gout = g.reshaped({plan.patch_count(), spec.out_channels});
                if (hooks.param_grads) {
                    Tensor patches = gather_patches(lt.input, plan);
                    hooks.param_grads->grads[li] = matmul_tn(patches, gout);  // [p, N]
                }
                Tensor rows = matmul_nt(gout, net.params[li]);  // [J, p]
                Tensor img = scatter_patches(rows, plan);
                g = img.rank() == 1 ? img.reshaped(lt.input.shape) : std::move(img);
                break;
            }
        }
    }
    return g;
}

/// Backpropagation-based visualization for logit k: seeds e_k at the logits,
/// runs the modified backward, and divides by max(||raw||, 1) so the map norm
/// lands in [0,1].
inline VisResult backward(const Network& net, const ForwardTrace& trace, std::size_t k, VisMethod method) {
    const std::size_t K = trace.logits.numel();
    if (k >= K)
        throw std::invalid_argument("backward: logit index " + std::to_string(k) + " out of range (K=" + std::to_string(K) + ")");
    Tensor seed({K});
    seed.data[k] = 1.0;

    VisResult res;
    res.raw = backward_seeded(net, trace, seed, method);
    res.target_logit = k;
    res.method = method;
    res.z_k = std::max(l2_norm(res.raw), 1.0);
    res.map = scale(res.raw, 1.0 / res.z_k);
    return res;
}

/// Min-max rescale to [0,1] for image dumping; constant maps become 0.5.
inline Tensor normalize_for_display(const Tensor& map) { return rescale_unit(map); }

}  // namespace backvis
