#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "backvis/network.hpp"
#include "backvis/patch_plan.hpp"
#include "backvis/rng.hpp"
#include "backvis/tensor.hpp"
#include "backvis/visualize.hpp"

namespace backvis {

// ---- small statistics helpers shared by the oracles ----

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median_of: empty");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double skewness_of(const std::vector<double>& v) {
    const double m = mean_of(v), sd = std::sqrt(variance_of(v));
    double s = 0.0;
    for (double x : v) s += std::pow((x - m) / sd, 3.0);
    return s / static_cast<double>(v.size());
}

inline double excess_kurtosis_of(const std::vector<double>& v) {
    const double m = mean_of(v), sd = std::sqrt(variance_of(v));
    double s = 0.0;
    for (double x : v) s += std::pow((x - m) / sd, 4.0);
    return s / static_cast<double>(v.size()) - 3.0;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    const double mx = mean_of(lx), my = mean_of(ly);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

// ---- Monte-Carlo vs analytic reporting ----

/// Comparison of a Monte-Carlo estimate against its analytic value.
/// pass is exactly: |estimate - analytic| <= tol * max(1, |analytic|),
/// elementwise for tensor-valued reports.
struct StatReport {
    Tensor estimate;
    Tensor analytic;
    std::size_t n_samples = 0;
    Tensor standard_error;
    double tol = 0.0;
    bool pass = false;

    void compute_pass() {
        pass = true;
        for (std::size_t i = 0; i < estimate.numel(); ++i)
            if (std::abs(estimate.data[i] - analytic.data[i]) > tol * std::max(1.0, std::abs(analytic.data[i])))
                pass = false;
    }

    /// CSV row, fields in declaration order; tensor fields join values with ';'.
    std::string to_csv() const {
        auto join = [](const Tensor& t) {
            std::string s;
            char buf[32];
            for (std::size_t i = 0; i < t.numel(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", t.data[i]);
                s += buf;
                if (i + 1 < t.numel()) s += ";";
            }
            return s;
        };
        return join(estimate) + "," + join(analytic) + "," + std::to_string(n_samples) + "," + join(standard_error) +
               "," + (pass ? "1" : "0");
    }
    static std::string csv_header() { return "estimate,analytic,n_samples,standard_error,pass"; }
};

// ---- the three-layer model of the analysis ----

/// W columns are the filters w^(i); V rows are indexed q_ij = (i-1)J + j
/// (filter-major), the paper's layout. The engine's flatten order is
/// patch-major, so to_network permutes rows accordingly.
struct ThreeLayerModel {
    Tensor W;  // [p, N]
    Tensor V;  // [N*J, K]
    PatchPlan plan;
    double c = 0.1;

    std::size_t filters() const { return W.shape[1]; }
    std::size_t logits() const { return V.shape[1]; }

    void validate() const {
        if (W.rank() != 2 || W.shape[0] != plan.patch_size())
            throw std::invalid_argument("ThreeLayerModel: W must be [p,N] with p=" + std::to_string(plan.patch_size()) +
                                        ", got " + shape_str(W.shape));
        if (V.rank() != 2 || V.shape[0] != filters() * plan.patch_count())
            throw std::invalid_argument("ThreeLayerModel: V must have N*J=" +
                                        std::to_string(filters() * plan.patch_count()) + " rows, got " + shape_str(V.shape));
    }
};

inline ThreeLayerModel random_three_layer_model(const PatchPlan& plan, std::size_t n_filters, std::size_t n_logits,
                                                const RngSpec& init) {
    ThreeLayerModel m;
    m.plan = plan;
    m.c = init.stddev;
    NormalStream s(init);
    m.W = Tensor({plan.patch_size(), n_filters});
    s.fill(m.W);
    m.V = Tensor({n_filters * plan.patch_count(), n_logits});
    s.fill(m.V);
    return m;
}

/// Engine network computing the same logits as the model: conv weights are
/// shared, dense rows are permuted from filter-major to the engine's
/// patch-major flatten order.
inline Network to_network(const ThreeLayerModel& m) {
    m.validate();
    const std::size_t J = m.plan.patch_count(), N = m.filters(), K = m.logits();
    Network net = build({LayerSpec::conv(m.plan.kh, m.plan.kw, m.plan.stride, N, m.plan.padding), LayerSpec::relu(),
                         LayerSpec::flatten(), LayerSpec::dense(K)},
                        {m.plan.in_h, m.plan.in_w, m.plan.in_c}, RngSpec::gaussian(0, 0.0, 1.0));
    net.params[0] = m.W;
    Tensor V_eng({J * N, K});
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t k = 0; k < K; ++k) V_eng.data[(j * N + i) * K + k] = m.V.data[(i * J + j) * K + k];
    net.params[3] = std::move(V_eng);
    return net;
}

/// Unnormalized closed form of the modified backward (Z_k = 1):
///   s_k(x) = sum_j D_j^T sum_i h(V_{q_ij,k}) w~^(i,j)
/// with w~ = w for DeconvNet and w * I(w^T y_j > 0) for saliency/GBP.
inline Tensor closed_form(const ThreeLayerModel& m, const Tensor& x, std::size_t k, VisMethod method) {
    m.validate();
    if (k >= m.logits()) throw std::invalid_argument("closed_form: logit index out of range");
    check_plan_input(x, m.plan, "closed_form");

    const std::size_t J = m.plan.patch_count(), N = m.filters(), p = m.plan.patch_size();
    Tensor patches = gather_patches(x, m.plan);  // [J, p]
    Tensor acts = matmul(patches, m.W);          // [J, N], w^(i)T y^(j)

    Tensor coeff({J, N});
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t i = 0; i < N; ++i) {
            double h = m.V.data[(i * J + j) * m.logits() + k];
            if (method != VisMethod::Saliency) h = h > 0.0 ? h : 0.0;              // h = sigma for DeconvNet/GBP
            if (method != VisMethod::DeconvNet && !(acts.at2(j, i) > 0.0)) h = 0;  // forward mask in w~
            coeff.at2(j, i) = h;
        }
    Tensor rows = matmul_nt(coeff, m.W);  // [J, p]
    return scatter_patches(rows, m.plan);
}

/// E[max(Z,0)] for Z ~ N(0, c^2): c / sqrt(2*pi).
inline double rectified_gaussian_mean(double c) {
    if (c <= 0.0) throw std::invalid_argument("rectified_gaussian_mean: c must be > 0");
    return c / std::sqrt(2.0 * M_PI);
}

/// Monte-Carlo check of E[w I(w^T y > 0)] = c/sqrt(2*pi) * y/||y|| for
/// w ~ N(0, c^2 I).  standard_error is per-coordinate.
inline StatReport expected_rectified_direction(const Tensor& y, double c, std::size_t n_samples, std::uint64_t seed,
                                               double tol = 0.01) {
    const double ny = l2_norm(y);
    if (ny == 0.0) throw std::invalid_argument("expected_rectified_direction: y must be nonzero");
    if (n_samples < 10000) throw std::invalid_argument("expected_rectified_direction: need n_samples >= 1e4");
    const std::size_t p = y.numel();

    NormalStream s(RngSpec::gaussian(seed, 0.0, c));
    std::vector<double> acc(p, 0.0), acc2(p, 0.0), w(p);
    for (std::size_t t = 0; t < n_samples; ++t) {
        double proj = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            w[i] = s.next();
            proj += w[i] * y.data[i];
        }
        if (proj > 0.0)
            for (std::size_t i = 0; i < p; ++i) {
                acc[i] += w[i];
                acc2[i] += w[i] * w[i];
            }
    }

    StatReport rep;
    rep.n_samples = n_samples;
    rep.estimate = Tensor({p});
    rep.analytic = Tensor({p});
    rep.standard_error = Tensor({p});
    const double scale_mean = rectified_gaussian_mean(c) / ny;
    for (std::size_t i = 0; i < p; ++i) {
        const double m1 = acc[i] / static_cast<double>(n_samples);
        const double m2 = acc2[i] / static_cast<double>(n_samples);
        rep.estimate.data[i] = m1;
        rep.analytic.data[i] = scale_mean * y.data[i];
        rep.standard_error.data[i] = std::sqrt(std::max(m2 - m1 * m1, 0.0) / static_cast<double>(n_samples));
    }
    rep.tol = tol;
    rep.compute_pass();
    return rep;
}

/// Large-N limit direction of GBP before the constant-patch-norm step:
/// unit-normalized sum_j D_j^T y^(j) / ||y^(j)||. Zero-norm patches are
/// skipped; all-zero input is an error.
inline Tensor gbp_theorem1_oracle(const Tensor& x, const PatchPlan& plan) {
    check_plan_input(x, plan, "gbp_theorem1_oracle");
    Tensor patches = gather_patches(x, plan);
    const std::size_t J = plan.patch_count(), p = plan.patch_size();
    Tensor rows({J, p});
    std::size_t contributing = 0;
    for (std::size_t j = 0; j < J; ++j) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < p; ++i) n2 += patches.at2(j, i) * patches.at2(j, i);
        if (n2 == 0.0) continue;
        ++contributing;
        const double inv = 1.0 / std::sqrt(n2);
        for (std::size_t i = 0; i < p; ++i) rows.at2(j, i) = patches.at2(j, i) * inv;
    }
    if (contributing == 0) throw std::invalid_argument("gbp_theorem1_oracle: all patches of x are zero");
    Tensor out = scatter_patches(rows, plan);
    return scale(out, 1.0 / l2_norm(out));
}

struct CovarianceOracle {
    Tensor cov;  // [d, d] = I - Lambda/(2p)
    double trace = 0.0;
    std::size_t contributing_patches = 0;  // J minus skipped zero-norm patches
};

/// Appendix-C noise covariance of the normalized saliency map:
/// I - Lambda/(2p) with Lambda = sum_j D_j^T y y^T D_j / ||y||^2.
/// trace must equal d - J/(2p) with J counting contributing patches.
inline CovarianceOracle saliency_covariance_oracle(const Tensor& x, const PatchPlan& plan, std::size_t p) {
    check_plan_input(x, plan, "saliency_covariance_oracle");
    const std::size_t d = plan.input_numel();
    if (d > 2048) throw std::invalid_argument("saliency_covariance_oracle: d=" + std::to_string(d) + " exceeds desk scale 2048");

    CovarianceOracle out;
    out.cov = Tensor({d, d});
    for (std::size_t i = 0; i < d; ++i) out.cov.at2(i, i) = 1.0;

    Tensor patches = gather_patches(x, plan);
    const std::size_t J = plan.patch_count(), ps = plan.patch_size();
    const double f = 1.0 / (2.0 * static_cast<double>(p));
    for (std::size_t j = 0; j < J; ++j) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < ps; ++i) n2 += patches.at2(j, i) * patches.at2(j, i);
        if (n2 == 0.0) continue;
        ++out.contributing_patches;
        const double inv = f / n2;
        const std::int64_t* idx = plan.patch(j);
        for (std::size_t a = 0; a < ps; ++a) {
            if (idx[a] < 0) continue;
            const double va = patches.at2(j, a);
            if (va == 0.0) continue;
            for (std::size_t b = 0; b < ps; ++b) {
                if (idx[b] < 0) continue;
                out.cov.at2(static_cast<std::size_t>(idx[a]), static_cast<std::size_t>(idx[b])) -=
                    inv * va * patches.at2(j, b);
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i) out.trace += out.cov.at2(i, i);
    return out;
}

// ---- Proposition 1: upstream coefficients behave like i.i.d. zero-mean ----

struct IndependenceReport {
    std::size_t n_reseeds = 0;
    std::size_t n_pairs = 0;
    double corr_bound = 0.0;        // 4 / sqrt(n_reseeds)
    double frac_pairs_within = 0.0; // fraction of |corr| <= corr_bound
    double max_abs_corr = 0.0;
    double frac_means_within = 0.0; // fraction of entries with |mean| <= 4 SE
    bool degenerate = false;        // some entry had zero variance across reseeds
    bool pass = false;
};

/// Statistical check of Proposition 1: rebuild the (untrained) network with
/// fresh seeds, capture the upstream coefficient vector arriving at the given
/// ReLU's output during the method's backward, and test that entries look
/// zero-mean and pairwise uncorrelated.
inline IndependenceReport independence_stat_check(const Network& net, const RngSpec& init, const Tensor& x,
                                                  std::size_t k, VisMethod method, std::size_t relu_layer,
                                                  std::size_t n_reseeds, std::size_t n_pairs,
                                                  std::uint64_t pair_seed = 1234) {
    if (net.trained) throw std::invalid_argument("independence_stat_check: trained networks are rejected");
    if (relu_layer >= net.specs.size() || net.specs[relu_layer].kind != LayerKind::ReLU)
        throw std::invalid_argument("independence_stat_check: layer " + std::to_string(relu_layer) + " is not a ReLU");
    if (n_reseeds < 2) throw std::invalid_argument("independence_stat_check: need n_reseeds >= 2");

    const std::size_t dim = shape_numel(net.layer_out_shapes[relu_layer]);
    std::vector<std::vector<double>> samples(n_reseeds);
    for (std::size_t t = 0; t < n_reseeds; ++t) {
        Network re = build(net.specs, net.input_shape, init.with_seed(init.seed + 0x9e3779b97f4a7c15ULL * (t + 1)));
        ForwardTrace trace = forward(re, x);
        Tensor seed_grad({trace.logits.numel()});
        if (k >= seed_grad.numel()) throw std::invalid_argument("independence_stat_check: logit index out of range");
        seed_grad.data[k] = 1.0;
        std::vector<Tensor> grads;
        BackwardHooks hooks;
        hooks.grad_at_output = &grads;
        backward_seeded(re, trace, seed_grad, method, hooks);
        samples[t] = grads[relu_layer].data;
    }

    IndependenceReport rep;
    rep.n_reseeds = n_reseeds;
    rep.corr_bound = 4.0 / std::sqrt(static_cast<double>(n_reseeds));

    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    for (std::size_t e = 0; e < dim; ++e) {
        std::vector<double> col(n_reseeds);
        for (std::size_t t = 0; t < n_reseeds; ++t) col[t] = samples[t][e];
        mean[e] = mean_of(col);
        var[e] = variance_of(col);
        if (var[e] == 0.0) rep.degenerate = true;
    }

    std::size_t means_ok = 0;
    for (std::size_t e = 0; e < dim; ++e) {
        const double se = std::sqrt(var[e] / static_cast<double>(n_reseeds));
        if (se == 0.0 || std::abs(mean[e]) <= 4.0 * se) ++means_ok;
    }
    rep.frac_means_within = static_cast<double>(means_ok) / static_cast<double>(dim);

    if (dim < 2) throw std::invalid_argument("independence_stat_check: need >= 2 entries");
    std::mt19937_64 pick(pair_seed);
    std::size_t within = 0, usable = 0;
    for (std::size_t q = 0; q < n_pairs; ++q) {
        const std::size_t a = pick() % dim;
        std::size_t b = pick() % dim;
        while (b == a) b = pick() % dim;
        if (var[a] == 0.0 || var[b] == 0.0) continue;
        double cov = 0.0;
        for (std::size_t t = 0; t < n_reseeds; ++t) cov += (samples[t][a] - mean[a]) * (samples[t][b] - mean[b]);
        cov /= static_cast<double>(n_reseeds);
        const double corr = cov / std::sqrt(var[a] * var[b]);
        rep.max_abs_corr = std::max(rep.max_abs_corr, std::abs(corr));
        ++usable;
        if (std::abs(corr) <= rep.corr_bound) ++within;
    }
    rep.n_pairs = usable;
    rep.frac_pairs_within = usable ? static_cast<double>(within) / static_cast<double>(usable) : 0.0;
    rep.pass = !rep.degenerate && usable > 0 && rep.frac_pairs_within >= 0.95;
    return rep;
}

/// Cosine between DeconvNet and GBP backward maps on one trace; the
/// architecture must contain a max-pooling layer.
inline double deconv_pool_equals_gbp_check(const Network& net, const Tensor& x, std::size_t k) {
    bool has_pool = false;
    for (const auto& s : net.specs) has_pool = has_pool || s.kind == LayerKind::MaxPool;
    if (!has_pool) throw std::invalid_argument("deconv_pool_equals_gbp_check: architecture has no max-pooling layer");
    ForwardTrace trace = forward(net, x);
    Tensor a = backward(net, trace, k, VisMethod::DeconvNet).raw;
    Tensor b = backward(net, trace, k, VisMethod::GBP).raw;
    return cosine_similarity(a, b);
}

}  // namespace backvis
