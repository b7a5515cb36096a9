#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "backvis/patch_plan.hpp"
#include "backvis/rng.hpp"
#include "backvis/tensor.hpp"

namespace backvis {

enum class LayerKind { Conv, ReLU, MaxPool, Flatten, Dense };

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    // Conv
    std::size_t kh = 0, kw = 0, stride = 1, out_channels = 0;
    Padding padding = Padding::Valid;
    // MaxPool (square window, clamped to the spatial dims at build time)
    std::size_t window = 0, pool_stride = 0;
    // Dense
    std::size_t out_features = 0;

    static LayerSpec conv(std::size_t kh, std::size_t kw, std::size_t stride, std::size_t out_channels,
                          Padding padding = Padding::Valid) {
        LayerSpec s;
        s.kind = LayerKind::Conv;
        s.kh = kh;
        s.kw = kw;
        s.stride = stride;
        s.out_channels = out_channels;
        s.padding = padding;
        return s;
    }
    static LayerSpec relu() {
        LayerSpec s;
        s.kind = LayerKind::ReLU;
        return s;
    }
    static LayerSpec maxpool(std::size_t window, std::size_t stride = 0) {
        LayerSpec s;
        s.kind = LayerKind::MaxPool;
        s.window = window;
        s.pool_stride = stride == 0 ? window : stride;
        return s;
    }
    static LayerSpec flatten() {
        LayerSpec s;
        s.kind = LayerKind::Flatten;
        return s;
    }
    static LayerSpec dense(std::size_t out_features) {
        LayerSpec s;
        s.kind = LayerKind::Dense;
        s.out_features = out_features;
        return s;
    }

    bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
};

inline bool operator==(const LayerSpec& a, const LayerSpec& b) {
    return a.kind == b.kind && a.kh == b.kh && a.kw == b.kw && a.stride == b.stride &&
           a.out_channels == b.out_channels && a.padding == b.padding && a.window == b.window &&
           a.pool_stride == b.pool_stride && a.out_features == b.out_features;
}

/// Pooling geometry resolved at build time. The square window is clamped to
/// the spatial dims, so "window 2" on a [1,W,C] signal pools 1x2 pairs.
struct PoolGeom {
    std::size_t wh = 1, ww = 1, stride = 1;
    std::size_t in_h = 0, in_w = 0, channels = 0;
    std::size_t out_h = 0, out_w = 0;
};

/// Immutable after build/splice. Conv parameters are stored as [p, N] with
/// p = kh*kw*in_c matching the plan's gather order; dense as [in, out].
struct Network {
    std::vector<LayerSpec> specs;
    Shape input_shape;  // [H, W, C]
    std::vector<Tensor> params;          // aligned with specs; empty for non-param layers
    std::vector<PatchPlan> conv_plans;   // aligned; empty plans for non-conv layers
    std::vector<PoolGeom> pool_geoms;    // aligned; defaults for non-pool layers
    std::vector<Shape> layer_out_shapes; // aligned; shape of each layer's output
    bool trained = false;

    std::size_t logit_count() const {
        for (auto it = specs.rbegin(); it != specs.rend(); ++it)
            if (it->kind == LayerKind::Dense) return it->out_features;
        return 0;
    }
};

namespace detail {

inline Shape layer_output_shape(const LayerSpec& spec, const Shape& in, std::size_t layer_idx, PatchPlan* plan_out,
                                PoolGeom* geom_out) {
    const std::string where = "layer " + std::to_string(layer_idx);
    switch (spec.kind) {
        case LayerKind::Conv: {
            if (in.size() != 3)
                throw std::invalid_argument(where + " (conv): needs [H,W,C] input, got " + shape_str(in));
            PatchPlan plan = make_patch_plan(in[0], in[1], in[2], spec.kh, spec.kw, spec.stride, spec.padding);
            Shape out{plan.out_h, plan.out_w, spec.out_channels};
            if (plan_out) *plan_out = std::move(plan);
            return out;
        }
        case LayerKind::ReLU:
            return in;
        case LayerKind::MaxPool: {
            if (in.size() != 3)
                throw std::invalid_argument(where + " (maxpool): needs [H,W,C] input, got " + shape_str(in));
            PoolGeom g;
            g.in_h = in[0];
            g.in_w = in[1];
            g.channels = in[2];
            g.wh = std::min(spec.window, in[0]);
            g.ww = std::min(spec.window, in[1]);
            g.stride = spec.pool_stride;
            if (g.wh < 1 || g.ww < 1 || g.stride < 1)
                throw std::invalid_argument(where + " (maxpool): bad window/stride");
            g.out_h = (in[0] - g.wh) / g.stride + 1;
            g.out_w = (in[1] - g.ww) / g.stride + 1;
            if (geom_out) *geom_out = g;
            return Shape{g.out_h, g.out_w, in[2]};
        }
        case LayerKind::Flatten:
            return Shape{shape_numel(in)};
        case LayerKind::Dense: {
            if (in.size() != 1)
                throw std::invalid_argument(where + " (dense): needs flat input, got " + shape_str(in) +
                                            " (insert a flatten layer)");
            return Shape{spec.out_features};
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

/// Build a network: validates that consecutive layer shapes compose and
/// samples all parameters from one stream in declaration order.
inline Network build(const std::vector<LayerSpec>& specs, const Shape& input_shape, const RngSpec& init) {
    if (specs.empty()) throw std::invalid_argument("build: empty layer list");
    if (input_shape.size() != 3)
        throw std::invalid_argument("build: input shape must be [H,W,C], got " + shape_str(input_shape));

    Network net;
    net.specs = specs;
    net.input_shape = input_shape;
    net.params.resize(specs.size());
    net.conv_plans.resize(specs.size());
    net.pool_geoms.resize(specs.size());
    net.layer_out_shapes.resize(specs.size());

    NormalStream stream(init);
    Shape cur = input_shape;
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const LayerSpec& spec = specs[l];
        Shape in = cur;
        cur = detail::layer_output_shape(spec, in, l, &net.conv_plans[l], &net.pool_geoms[l]);
        net.layer_out_shapes[l] = cur;
        if (spec.kind == LayerKind::Conv) {
            net.params[l] = Tensor({net.conv_plans[l].patch_size(), spec.out_channels});
            stream.fill(net.params[l]);
        } else if (spec.kind == LayerKind::Dense) {
            net.params[l] = Tensor({in[0], spec.out_features});
            stream.fill(net.params[l]);
        }
    }
    return net;
}

struct LayerTrace {
    Tensor input;
    Tensor output;
    std::vector<std::size_t> argmax;  // MaxPool only: flat index into input per output cell
};

/// Everything the modified backward needs: per-layer inputs (pre-activations
/// for ReLU layers), outputs, and pool argmax routing.
struct ForwardTrace {
    std::vector<LayerTrace> layers;
    Tensor logits;
};

inline ForwardTrace forward(const Network& net, const Tensor& x) {
    const Shape want = net.input_shape;
    const bool shape_ok = x.shape == want || (x.rank() == 1 && want[0] == 1 && want[2] == 1 && x.numel() == shape_numel(want));
    if (!shape_ok)
        throw std::invalid_argument("forward: input shape " + shape_str(x.shape) + " does not match network input " +
                                    shape_str(want));

    ForwardTrace trace;
    trace.layers.resize(net.specs.size());
    Tensor cur = x.rank() == 1 ? x.reshaped(want) : x;

    for (std::size_t l = 0; l < net.specs.size(); ++l) {
        const LayerSpec& spec = net.specs[l];
        LayerTrace& lt = trace.layers[l];
        lt.input = cur;
        switch (spec.kind) {
            case LayerKind::Conv: {
                const PatchPlan& plan = net.conv_plans[l];
                Tensor patches = gather_patches(cur, plan);        // [J, p]
                Tensor out = matmul(patches, net.params[l]);       // [J, N]
                cur = out.reshaped({plan.out_h, plan.out_w, spec.out_channels});
                break;
            }
            case LayerKind::ReLU: {
                Tensor out = cur;
                for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
                cur = std::move(out);
                break;
            }
            case LayerKind::MaxPool: {
                const PoolGeom& g = net.pool_geoms[l];
                Tensor out({g.out_h, g.out_w, g.channels});
                lt.argmax.resize(out.numel());
                for (std::size_t oy = 0; oy < g.out_h; ++oy)
                    for (std::size_t ox = 0; ox < g.out_w; ++ox)
                        for (std::size_t c = 0; c < g.channels; ++c) {
                            double best = -std::numeric_limits<double>::infinity();
                            std::size_t best_idx = 0;
                            for (std::size_t dy = 0; dy < g.wh; ++dy)
                                for (std::size_t dx = 0; dx < g.ww; ++dx) {
                                    const std::size_t iy = oy * g.stride + dy, ix = ox * g.stride + dx;
                                    const std::size_t idx = (iy * g.in_w + ix) * g.channels + c;
                                    if (cur.data[idx] > best) {  // strict >: lowest flat index wins ties
                                        best = cur.data[idx];
                                        best_idx = idx;
                                    }
                                }
                            const std::size_t oidx = (oy * g.out_w + ox) * g.channels + c;
                            out.data[oidx] = best;
                            lt.argmax[oidx] = best_idx;
                        }
                cur = std::move(out);
                break;
            }
            case LayerKind::Flatten:
                cur = cur.reshaped({cur.numel()});
                break;
            case LayerKind::Dense:
                cur = matvec_t(net.params[l], cur);
                break;
        }
        lt.output = cur;
    }
    trace.logits = cur;
    return trace;
}

enum class SpliceMode { UpTo, ExceptFor };

/// Mix parameters of two networks sharing specs: UpTo(l) takes layers 0..l
/// from `trained_net`, the rest from `random_net`; ExceptFor(l) takes all
/// from `trained_net` except layer l.
inline Network splice_weights(const Network& trained_net, const Network& random_net, SpliceMode mode,
                              std::size_t layer) {
    if (trained_net.specs.size() != random_net.specs.size())
        throw std::invalid_argument("splice_weights: networks have different layer counts");
    for (std::size_t l = 0; l < trained_net.specs.size(); ++l)
        if (!(trained_net.specs[l] == random_net.specs[l]))
            throw std::invalid_argument("splice_weights: layer " + std::to_string(l) + " specs differ");
    if (trained_net.input_shape != random_net.input_shape)
        throw std::invalid_argument("splice_weights: input shapes differ");
    if (layer >= trained_net.specs.size())
        throw std::invalid_argument("splice_weights: layer index " + std::to_string(layer) + " out of range (n=" +
                                    std::to_string(trained_net.specs.size()) + ")");

    Network out = trained_net;
    for (std::size_t l = 0; l < out.specs.size(); ++l) {
        const bool from_trained = mode == SpliceMode::UpTo ? l <= layer : l != layer;
        out.params[l] = from_trained ? trained_net.params[l] : random_net.params[l];
    }
    out.trained = trained_net.trained;
    return out;
}

// ---- flat binary container: magic "BVNET1", text spec lines, then raw
// little-endian doubles with shape prefixes, in declaration order ----

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

inline std::string spec_line(const LayerSpec& s) {
    switch (s.kind) {
        case LayerKind::Conv:
            return "conv " + std::to_string(s.kh) + " " + std::to_string(s.kw) + " " + std::to_string(s.stride) + " " +
                   (s.padding == Padding::Valid ? std::string("valid") : std::string("same")) + " " +
                   std::to_string(s.out_channels);
        case LayerKind::ReLU:
            return "relu";
        case LayerKind::MaxPool:
            return "maxpool " + std::to_string(s.window) + " " + std::to_string(s.pool_stride);
        case LayerKind::Flatten:
            return "flatten";
        case LayerKind::Dense:
            return "dense " + std::to_string(s.out_features);
    }
    throw std::logic_error("unreachable");
}

inline LayerSpec parse_spec_line(const std::string& line) {
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "conv") {
        std::size_t kh, kw, stride, out;
        std::string pad;
        ss >> kh >> kw >> stride >> pad >> out;
        if (!ss) throw std::runtime_error("load_network: bad conv line: " + line);
        return LayerSpec::conv(kh, kw, stride, out, pad == "same" ? Padding::Same : Padding::Valid);
    }
    if (kind == "relu") return LayerSpec::relu();
    if (kind == "maxpool") {
        std::size_t w, s;
        ss >> w >> s;
        if (!ss) throw std::runtime_error("load_network: bad maxpool line: " + line);
        return LayerSpec::maxpool(w, s);
    }
    if (kind == "flatten") return LayerSpec::flatten();
    if (kind == "dense") {
        std::size_t out;
        ss >> out;
        if (!ss) throw std::runtime_error("load_network: bad dense line: " + line);
        return LayerSpec::dense(out);
    }
    throw std::runtime_error("load_network: unknown layer kind: " + line);
}

}  // namespace detail

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_network: cannot open " + path);
    os << "BVNET1\n";
    os << "input " << net.input_shape[0] << " " << net.input_shape[1] << " " << net.input_shape[2] << "\n";
    os << "trained " << (net.trained ? 1 : 0) << "\n";
    os << "layers " << net.specs.size() << "\n";
    for (const auto& s : net.specs) os << detail::spec_line(s) << "\n";
    os << "params\n";
    for (std::size_t l = 0; l < net.specs.size(); ++l) {
        if (!net.specs[l].has_params()) continue;
        const Tensor& p = net.params[l];
        detail::write_u32(os, static_cast<std::uint32_t>(p.rank()));
        for (auto d : p.shape) detail::write_u64(os, d);
        os.write(reinterpret_cast<const char*>(p.data.data()), static_cast<std::streamsize>(p.data.size() * 8));
    }
    if (!os) throw std::runtime_error("save_network: write failed for " + path);
}

inline Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_network: cannot open " + path);
    std::string line;
    std::getline(is, line);
    if (line != "BVNET1") throw std::runtime_error("load_network: bad magic in " + path);

    Shape input_shape(3);
    std::getline(is, line);
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> input_shape[0] >> input_shape[1] >> input_shape[2];
        if (tag != "input" || !ss) throw std::runtime_error("load_network: bad input line: " + line);
    }
    bool trained = false;
    std::getline(is, line);
    {
        std::istringstream ss(line);
        std::string tag;
        int flag;
        ss >> tag >> flag;
        if (tag != "trained" || !ss) throw std::runtime_error("load_network: bad trained line: " + line);
        trained = flag != 0;
    }
    std::size_t n_layers = 0;
    std::getline(is, line);
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag >> n_layers;
        if (tag != "layers" || !ss) throw std::runtime_error("load_network: bad layers line: " + line);
    }
    std::vector<LayerSpec> specs;
    specs.reserve(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::getline(is, line);
        specs.push_back(detail::parse_spec_line(line));
    }
    std::getline(is, line);
    if (line != "params") throw std::runtime_error("load_network: missing params marker");

    // rebuild geometry, then overwrite parameters with the stored ones
    Network net = build(specs, input_shape, RngSpec::gaussian(0, 0.0, 1.0));
    net.trained = trained;
    for (std::size_t l = 0; l < specs.size(); ++l) {
        if (!specs[l].has_params()) continue;
        const std::uint32_t rank = detail::read_u32(is);
        Shape shape(rank);
        for (auto& d : shape) d = detail::read_u64(is);
        Tensor p(shape);
        is.read(reinterpret_cast<char*>(p.data.data()), static_cast<std::streamsize>(p.data.size() * 8));
        if (!is) throw std::runtime_error("load_network: truncated params in " + path);
        if (shape != net.params[l].shape)
            throw std::runtime_error("load_network: layer " + std::to_string(l) + " param shape " + shape_str(shape) +
                                     " does not match specs " + shape_str(net.params[l].shape));
        net.params[l] = std::move(p);
    }
    return net;
}

}  // namespace backvis
