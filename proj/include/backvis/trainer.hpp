#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "backvis/network.hpp"
#include "backvis/rng.hpp"
#include "backvis/tensor.hpp"
#include "backvis/visualize.hpp"

namespace backvis {

struct Dataset {
    Tensor images;  // [n, H, W, C], values in [0,1]
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;

    std::size_t size() const { return labels.size(); }
    Shape image_shape() const { return {images.shape[1], images.shape[2], images.shape[3]}; }

    Tensor image(std::size_t i) const {
        const std::size_t px = shape_numel(image_shape());
        Tensor out(image_shape());
        std::copy(images.data.begin() + i * px, images.data.begin() + (i + 1) * px, out.data.begin());
        return out;
    }

    void validate() const {
        if (labels.empty()) return;  // empty dataset: images tensor is a placeholder
        if (images.rank() != 4)
            throw std::invalid_argument("Dataset: images must be [n,H,W,C], got " + shape_str(images.shape));
        if (images.shape[0] != labels.size()) throw std::invalid_argument("Dataset: image/label counts differ");
        for (auto l : labels)
            if (l >= class_count) throw std::invalid_argument("Dataset: label out of range");
    }
};

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t batch_size = 16;
    std::size_t epochs = 5;
    std::uint64_t seed = 0;
    RngSpec weight_init = RngSpec::truncated(0, 0.0, 0.1);
    double l2_penalty = 0.0;
};

/// Stabilized softmax cross-entropy; grad is (softmax - onehot).
inline double softmax_cross_entropy(const Tensor& logits, std::size_t label, Tensor* grad = nullptr) {
    const std::size_t K = logits.numel();
    if (label >= K) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    double mx = logits.data[0];
    for (auto v : logits.data) mx = std::max(mx, v);
    double lse = 0.0;
    for (auto v : logits.data) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    if (grad) {
        *grad = Tensor({K});
        for (std::size_t k = 0; k < K; ++k) grad->data[k] = std::exp(logits.data[k] - lse);
        grad->data[label] -= 1.0;
    }
    return lse - logits.data[label];
}

/// Loss gradient w.r.t. the input image (true gradient: saliency rule).
inline Tensor input_loss_gradient(const Network& net, const Tensor& x, std::size_t label) {
    ForwardTrace trace = forward(net, x);
    Tensor seed;
    softmax_cross_entropy(trace.logits, label, &seed);
    return backward_seeded(net, trace, seed, VisMethod::Saliency);
}

/// Plain SGD over softmax cross-entropy. The training gradient is the true
/// gradient: the engine's Saliency backward with parameter-gradient hooks and
/// the loss-layer seed. Deterministic given cfg.seed.
inline Network train(const Network& start, const Dataset& data, const TrainConfig& cfg) {
    data.validate();
    if (start.logit_count() != data.class_count)
        throw std::invalid_argument("train: network has " + std::to_string(start.logit_count()) + " logits, dataset has " +
                                    std::to_string(data.class_count) + " classes");
    if (data.image_shape() != start.input_shape)
        throw std::invalid_argument("train: image shape " + shape_str(data.image_shape()) + " != network input " +
                                    shape_str(start.input_shape));

    Network net = start;
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(b0 + cfg.batch_size, order.size());
            std::vector<Tensor> acc(net.specs.size());
            for (std::size_t t = b0; t < b1; ++t) {
                const Tensor x = data.image(order[t]);
                ForwardTrace trace = forward(net, x);
                Tensor seed;
                const double loss = softmax_cross_entropy(trace.logits, data.labels[order[t]], &seed);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + " sample " +
                                             std::to_string(order[t]) + " (lr=" + std::to_string(cfg.learning_rate) + ")");
                ParamGrads pg;
                BackwardHooks hooks;
                hooks.param_grads = &pg;
                backward_seeded(net, trace, seed, VisMethod::Saliency, hooks);
                for (std::size_t l = 0; l < net.specs.size(); ++l) {
                    if (!net.specs[l].has_params()) continue;
                    if (acc[l].numel() == 0)
                        acc[l] = std::move(pg.grads[l]);
                    else
                        for (std::size_t i = 0; i < acc[l].numel(); ++i) acc[l].data[i] += pg.grads[l].data[i];
                }
            }
            for (std::size_t l = 0; l < net.specs.size(); ++l) {
                if (!net.specs[l].has_params()) continue;
                for (std::size_t i = 0; i < net.params[l].numel(); ++i) {
                    const double g = acc[l].data[i] / static_cast<double>(b1 - b0) + cfg.l2_penalty * net.params[l].data[i];
                    net.params[l].data[i] -= cfg.learning_rate * g;
                }
            }
        }
    }
    net.trained = true;
    return net;
}

inline double accuracy(const Network& net, const Dataset& data) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (argmax(forward(net, data.image(i)).logits) == data.labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(data.size());
}

/// x_adv = clip(x + eps * sign(d loss / d x), 0, 1); sign(0) = 0.
inline Tensor fgsm(const Network& net, const Tensor& x, std::size_t true_label, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("fgsm: epsilon must be > 0");
    Tensor g = input_loss_gradient(net, x, true_label);
    Tensor adv = x;
    for (std::size_t i = 0; i < adv.numel(); ++i) {
        const double s = g.data[i] > 0.0 ? 1.0 : (g.data[i] < 0.0 ? -1.0 : 0.0);
        adv.data[i] = std::clamp(adv.data[i] + epsilon * s, 0.0, 1.0);
    }
    return adv;
}

// ---- IDX container (big-endian, MNIST-style) ----

namespace detail {

inline std::uint32_t read_be32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

/// IDX pair reader: images magic 0x00000803, labels magic 0x00000801, pixel
/// bytes scaled to [0,1]. class_count is 1 + max label (0 when empty).
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream im(images_path, std::ios::binary);
    if (!im) throw std::runtime_error("load_idx: cannot open " + images_path);
    if (detail::read_be32(im) != 0x00000803u) throw std::runtime_error("load_idx: bad image magic in " + images_path);
    const std::uint32_t n = detail::read_be32(im), rows = detail::read_be32(im), cols = detail::read_be32(im);
    if (!im) throw std::runtime_error("load_idx: truncated image header in " + images_path);

    std::ifstream lb(labels_path, std::ios::binary);
    if (!lb) throw std::runtime_error("load_idx: cannot open " + labels_path);
    if (detail::read_be32(lb) != 0x00000801u) throw std::runtime_error("load_idx: bad label magic in " + labels_path);
    const std::uint32_t nl = detail::read_be32(lb);
    if (n != nl)
        throw std::runtime_error("load_idx: image count " + std::to_string(n) + " != label count " + std::to_string(nl));

    Dataset d;
    d.images = Tensor({std::max<std::size_t>(n, 1), std::max<std::uint32_t>(rows, 1), std::max<std::uint32_t>(cols, 1), 1});
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        im.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!im) throw std::runtime_error("load_idx: truncated image data in " + images_path);
        for (std::size_t t = 0; t < buf.size(); ++t) d.images.data[i * buf.size() + t] = buf[t] / 255.0;
    }
    d.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        char c;
        lb.read(&c, 1);
        if (!lb) throw std::runtime_error("load_idx: truncated label data in " + labels_path);
        d.labels[i] = static_cast<unsigned char>(c);
    }
    d.class_count = 0;
    for (auto l : d.labels) d.class_count = std::max(d.class_count, l + 1);
    return d;
}

/// IDX pair writer; values are clamped to [0,1] and quantized to bytes.
inline void save_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path) {
    const std::size_t n = d.size(), rows = d.images.shape[1], cols = d.images.shape[2];
    if (d.images.shape[3] != 1) throw std::invalid_argument("save_idx: only single-channel datasets");
    std::ofstream im(images_path, std::ios::binary);
    if (!im) throw std::runtime_error("save_idx: cannot open " + images_path);
    detail::write_be32(im, 0x00000803u);
    detail::write_be32(im, static_cast<std::uint32_t>(n));
    detail::write_be32(im, static_cast<std::uint32_t>(rows));
    detail::write_be32(im, static_cast<std::uint32_t>(cols));
    for (std::size_t i = 0; i < n * rows * cols; ++i) {
        const double v = std::clamp(d.images.data[i], 0.0, 1.0);
        const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
        im.write(reinterpret_cast<const char*>(&b), 1);
    }
    std::ofstream lb(labels_path, std::ios::binary);
    if (!lb) throw std::runtime_error("save_idx: cannot open " + labels_path);
    detail::write_be32(lb, 0x00000801u);
    detail::write_be32(lb, static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char b = static_cast<unsigned char>(d.labels[i]);
        lb.write(reinterpret_cast<const char*>(&b), 1);
    }
}

/// Deterministic 4-class shape dataset (bar / cross / blob / ring) on
/// side x side x 1 images. Classes cycle i % 4, so the split is balanced
/// within one image; positions and intensities are seeded. The shapes give
/// trained first-layer filters real edge structure to latch onto.
inline Dataset synth_shapes(std::size_t n, std::uint64_t seed, std::size_t side = 32) {
    Dataset d;
    d.class_count = 4;
    d.images = Tensor({std::max<std::size_t>(n, 1), side, side, 1});
    d.labels.resize(n);
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i % 4;
        d.labels[i] = cls;
        double* img = &d.images.data[i * side * side];
        const double fg = uni(0.6, 1.0);
        const int cx = static_cast<int>(uni(side * 0.3, side * 0.7));
        const int cy = static_cast<int>(uni(side * 0.3, side * 0.7));
        const int r = static_cast<int>(uni(side * 0.12, side * 0.25));
        auto set = [&](int y, int x, double v) {
            if (y >= 0 && y < static_cast<int>(side) && x >= 0 && x < static_cast<int>(side)) img[y * side + x] = v;
        };
        switch (cls) {
            case 0:  // vertical bar
                for (int y = cy - r; y <= cy + r; ++y)
                    for (int x = cx - 1; x <= cx + 1; ++x) set(y, x, fg);
                break;
            case 1:  // cross
                for (int t = -r; t <= r; ++t) {
                    set(cy + t, cx, fg);
                    set(cy + t, cx + 1, fg);
                    set(cy, cx + t, fg);
                    set(cy + 1, cx + t, fg);
                }
                break;
            case 2:  // filled blob
                for (int y = -r; y <= r; ++y)
                    for (int x = -r; x <= r; ++x)
                        if (x * x + y * y <= r * r) set(cy + y, cx + x, fg);
                break;
            case 3:  // ring
                for (int y = -r; y <= r; ++y)
                    for (int x = -r; x <= r; ++x) {
                        const int q = x * x + y * y;
                        if (q <= r * r && q >= (r - 2) * (r - 2)) set(cy + y, cx + x, fg);
                    }
                break;
        }
    }
    return d;
}

}  // namespace backvis
