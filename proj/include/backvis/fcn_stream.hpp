#pragma once

#include "backvis/rng.hpp"
#include "backvis/tensor.hpp"
#include "backvis/visualize.hpp"

namespace backvis {

/// Modified backward through a two-dense-layer FCN
/// (flatten -> dense(n_hidden) -> relu -> dense(K)) without materializing the
/// [d, n_hidden] weight matrix: the parameter stream is replayed twice.
/// Matches build() + backward() bit for bit for the same RngSpec, which is
/// pinned by a test; intended for the hidden-size sweeps where the dense
/// matrix would not fit in memory budget.
inline Tensor fcn_backward_stream(const Tensor& x, std::size_t n_hidden, std::size_t n_logits, std::size_t k,
                                  VisMethod method, const RngSpec& init) {
    if (k >= n_logits) throw std::invalid_argument("fcn_backward_stream: logit index out of range");
    const std::size_t d = x.numel();

    // pass 1: y = V1^T x while streaming V1 rows, then read V2 column k
    std::vector<double> y(n_hidden, 0.0);
    {
        NormalStream s(init);
        for (std::size_t r = 0; r < d; ++r) {
            const double xv = x.data[r];
            for (std::size_t m = 0; m < n_hidden; ++m) {
                const double v = s.next();
                y[m] += xv * v;
            }
        }
        std::vector<double> top(n_hidden);
        for (std::size_t m = 0; m < n_hidden; ++m)
            for (std::size_t kk = 0; kk < n_logits; ++kk) {
                const double v = s.next();
                if (kk == k) top[m] = v;
            }
        for (std::size_t m = 0; m < n_hidden; ++m) y[m] = relu_rule(top[m], y[m], method);  // reuse y as T
    }

    // pass 2: map = V1 T, replaying the same stream
    Tensor map(x.shape);
    NormalStream s(init);
    for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        for (std::size_t m = 0; m < n_hidden; ++m) acc += s.next() * y[m];
        map.data[r] = acc;
    }
    return map;
}

}  // namespace backvis
