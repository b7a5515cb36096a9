#pragma once

#include <cstdint>
#include <vector>

#include "backvis/tensor.hpp"

namespace backvis {

enum class Padding { Valid, Same };

/// Explicit per-patch index map: row j lists the flat input indices selected
/// by the patch operator D_j, in (kh, kw, channel) row-major order. Sentinel
/// -1 marks taps that fall outside the image under Same padding and
/// contribute zero. Making D_j a first-class table keeps gather/scatter and
/// the closed-form oracles on one index convention.
struct PatchPlan {
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    std::size_t kh = 0, kw = 0;
    std::size_t stride = 1;
    Padding padding = Padding::Valid;
    std::size_t out_h = 0, out_w = 0;
    std::vector<std::int64_t> index;  // [J * p], row-major

    std::size_t patch_count() const { return out_h * out_w; }
    std::size_t patch_size() const { return kh * kw * in_c; }
    std::size_t input_numel() const { return in_h * in_w * in_c; }

    const std::int64_t* patch(std::size_t j) const { return &index[j * patch_size()]; }
};

inline PatchPlan make_patch_plan(std::size_t in_h, std::size_t in_w, std::size_t in_c, std::size_t kh, std::size_t kw,
                                 std::size_t stride, Padding padding = Padding::Valid) {
    if (stride < 1) throw std::invalid_argument("make_patch_plan: stride must be >= 1");
    if (kh < 1 || kw < 1 || in_h < 1 || in_w < 1 || in_c < 1)
        throw std::invalid_argument("make_patch_plan: all extents must be >= 1");

    PatchPlan plan;
    plan.in_h = in_h;
    plan.in_w = in_w;
    plan.in_c = in_c;
    plan.kh = kh;
    plan.kw = kw;
    plan.stride = stride;
    plan.padding = padding;

    std::int64_t pad_top = 0, pad_left = 0;
    if (padding == Padding::Valid) {
        if (kh > in_h || kw > in_w)
            throw std::invalid_argument("make_patch_plan: filter " + std::to_string(kh) + "x" + std::to_string(kw) +
                                        " does not fit input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                                        " with Valid padding");
        plan.out_h = (in_h - kh) / stride + 1;
        plan.out_w = (in_w - kw) / stride + 1;
    } else {
        plan.out_h = (in_h + stride - 1) / stride;
        plan.out_w = (in_w + stride - 1) / stride;
        pad_top = (static_cast<std::int64_t>(plan.out_h - 1) * stride + kh - in_h) / 2;
        pad_left = (static_cast<std::int64_t>(plan.out_w - 1) * stride + kw - in_w) / 2;
        if (pad_top < 0) pad_top = 0;
        if (pad_left < 0) pad_left = 0;
    }

    plan.index.resize(plan.patch_count() * plan.patch_size());
    std::size_t pos = 0;
    for (std::size_t oy = 0; oy < plan.out_h; ++oy) {
        for (std::size_t ox = 0; ox < plan.out_w; ++ox) {
            const std::int64_t y0 = static_cast<std::int64_t>(oy * stride) - pad_top;
            const std::int64_t x0 = static_cast<std::int64_t>(ox * stride) - pad_left;
            for (std::size_t dy = 0; dy < kh; ++dy) {
                for (std::size_t dx = 0; dx < kw; ++dx) {
                    const std::int64_t y = y0 + static_cast<std::int64_t>(dy);
                    const std::int64_t x = x0 + static_cast<std::int64_t>(dx);
                    const bool inside = y >= 0 && y < static_cast<std::int64_t>(in_h) && x >= 0 && x < static_cast<std::int64_t>(in_w);
                    for (std::size_t c = 0; c < in_c; ++c)
                        plan.index[pos++] = inside ? (y * static_cast<std::int64_t>(in_w) + x) * static_cast<std::int64_t>(in_c) + static_cast<std::int64_t>(c) : -1;
                }
            }
        }
    }
    return plan;
}

/// 1-D convenience: signals of length d with patch size p, stride b.
inline PatchPlan make_patch_plan_1d(std::size_t d, std::size_t p, std::size_t b, Padding padding = Padding::Valid) {
    return make_patch_plan(1, d, 1, 1, p, b, padding);
}

inline void check_plan_input(const Tensor& x, const PatchPlan& plan, const char* op) {
    const Shape want{plan.in_h, plan.in_w, plan.in_c};
    if (x.shape == want) return;
    if (x.rank() == 1 && x.numel() == plan.input_numel()) return;  // 1-D signals
    throw std::invalid_argument(std::string(op) + ": input shape " + shape_str(x.shape) + " does not match plan dims " +
                                shape_str(want));
}

/// Rows of patches: row j = D_j x. Sentinel taps read as 0.
inline Tensor gather_patches(const Tensor& x, const PatchPlan& plan) {
    check_plan_input(x, plan, "gather_patches");
    Tensor out({plan.patch_count(), plan.patch_size()});
    for (std::size_t i = 0; i < plan.index.size(); ++i) {
        const std::int64_t src = plan.index[i];
        out.data[i] = src >= 0 ? x.data[static_cast<std::size_t>(src)] : 0.0;
    }
    return out;
}

/// sum_j D_j^T rows_j: every pixel accumulates the contribution of each patch
/// covering it; sentinel taps are dropped. Returns shape [H,W,C], or [d] for
/// 1-D plans.
inline Tensor scatter_patches(const Tensor& rows, const PatchPlan& plan) {
    const Shape want{plan.patch_count(), plan.patch_size()};
    if (rows.shape != want)
        throw std::invalid_argument("scatter_patches: rows shape " + shape_str(rows.shape) + " does not match plan " +
                                    shape_str(want));
    Shape out_shape = (plan.in_h == 1 && plan.in_c == 1) ? Shape{plan.in_w} : Shape{plan.in_h, plan.in_w, plan.in_c};
    Tensor out(out_shape);
    for (std::size_t i = 0; i < plan.index.size(); ++i) {
        const std::int64_t dst = plan.index[i];
        if (dst >= 0) out.data[static_cast<std::size_t>(dst)] += rows.data[i];
    }
    return out;
}

/// Per-pixel count of patches covering it (sentinels excluded).
inline Tensor patch_coverage(const PatchPlan& plan) {
    Tensor ones({plan.patch_count(), plan.patch_size()}, 1.0);
    return scatter_patches(ones, plan);
}

}  // namespace backvis
