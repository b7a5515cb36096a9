#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace backvis {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

/// Dense row-major tensor of doubles. Immutable by convention once built:
/// operations return fresh tensors instead of mutating inputs.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)) {
        for (auto d : shape) {
            if (d < 1) throw std::invalid_argument("Tensor: all extents must be >= 1, got shape " + shape_str(shape));
        }
        data.assign(shape_numel(shape), fill);
    }
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (shape_numel(shape) != data.size())
            throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match data length " +
                                        std::to_string(data.size()));
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D accessors for the many [rows, cols] tensors in this codebase.
    double& at2(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at2(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != numel())
            throw std::invalid_argument("reshape: " + shape_str(shape) + " -> " + shape_str(s) + " changes element count");
        return Tensor(std::move(s), data);
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch, expected " + shape_str(a.shape) + " got " +
                                    shape_str(b.shape));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.data[i];
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.data[i];
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (auto& v : out.data) v *= s;
    return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel())
        throw std::invalid_argument("dot: element counts differ, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

/// Cosine similarity; 0 by convention if either vector is zero.
inline double cosine_similarity(const Tensor& a, const Tensor& b) {
    double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

/// C[m,n] = sum_k A[m,k] B[k,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape) + " x " + shape_str(b.shape));
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        double* crow = &c.data[i * n];
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = &b.data[kk * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// C[m,n] = sum_k A[m,k] B[n,k]  (B used transposed)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1])
        throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_str(a.shape) + " x " + shape_str(b.shape) + "^T");
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * k];
        double* crow = &c.data[i * n];
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = &b.data[j * k];
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] = s;
        }
    }
    return c;
}

/// C[m,n] = sum_k A[k,m] B[k,n]  (A used transposed)
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[0] != b.shape[0])
        throw std::invalid_argument("matmul_tn: incompatible shapes " + shape_str(a.shape) + "^T x " + shape_str(b.shape));
    const std::size_t k = a.shape[0], m = a.shape[1], n = b.shape[1];
    Tensor c({m, n});
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = &a.data[kk * m];
        const double* brow = &b.data[kk * n];
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = &c.data[i * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// y = A^T x for A [m,n], x [m]; returns [n].
inline Tensor matvec_t(const Tensor& a, const Tensor& x) {
    if (a.rank() != 2 || a.shape[0] != x.numel())
        throw std::invalid_argument("matvec_t: incompatible shapes " + shape_str(a.shape) + "^T x " + shape_str(x.shape));
    const std::size_t m = a.shape[0], n = a.shape[1];
    Tensor y({n});
    for (std::size_t i = 0; i < m; ++i) {
        const double xv = x.data[i];
        if (xv == 0.0) continue;
        const double* arow = &a.data[i * n];
        for (std::size_t j = 0; j < n; ++j) y.data[j] += xv * arow[j];
    }
    return y;
}

/// y = A x for A [m,n], x [n]; returns [m].
inline Tensor matvec(const Tensor& a, const Tensor& x) {
    if (a.rank() != 2 || a.shape[1] != x.numel())
        throw std::invalid_argument("matvec: incompatible shapes " + shape_str(a.shape) + " x " + shape_str(x.shape));
    const std::size_t m = a.shape[0], n = a.shape[1];
    Tensor y({m});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.data[i * n];
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += arow[j] * x.data[j];
        y.data[i] = s;
    }
    return y;
}

/// Affine min-max rescale to [0,1]; a constant tensor maps to all 0.5.
inline Tensor rescale_unit(const Tensor& a) {
    double lo = *std::min_element(a.data.begin(), a.data.end());
    double hi = *std::max_element(a.data.begin(), a.data.end());
    Tensor out(a.shape);
    if (hi == lo) {
        std::fill(out.data.begin(), out.data.end(), 0.5);
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = (a.data[i] - lo) * inv;
    return out;
}

/// Flat index of the maximum element; lowest index wins ties.
inline std::size_t argmax(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("argmax: empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.numel(); ++i)
        if (a.data[i] > a.data[best]) best = i;
    return best;
}

}  // namespace backvis
