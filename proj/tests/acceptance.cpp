// Acceptance suite: one binary, one criterion per --criterion N invocation
// (no flag runs all). Each criterion prints a PASS/FAIL line; the process
// exits nonzero if any executed criterion fails.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "backvis/experiments.hpp"
#include "backvis/fcn_stream.hpp"
#include "backvis/image_io.hpp"
#include "backvis/parallel.hpp"
#include "backvis/theory.hpp"
#include "backvis/trainer.hpp"

using namespace backvis;

namespace {

double rel_err_flat(const Tensor& got, const Tensor& want) {
    double nb = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < got.numel(); ++i) {
        nb += want.data[i] * want.data[i];
        diff += (got.data[i] - want.data[i]) * (got.data[i] - want.data[i]);
    }
    if (nb == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(diff / nb);
}

Tensor unit(const Tensor& t) {
    const double n = l2_norm(t);
    return n == 0.0 ? t : scale(t, 1.0 / n);
}

// the desk input used by the random-net criteria: built-in texture 0,
// L2-normalized like the paper's inputs
Tensor desk_input_64() { return unit(texture_image(64, 64, 3, 0)); }

std::vector<LayerSpec> cnn3(std::size_t n_filters) {
    return {LayerSpec::conv(7, 7, 2, n_filters), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(10)};
}

struct Check {
    std::string name;
    bool ok;
    std::string detail;
};

// ---- criterion 1: ReLU rule table ----

bool criterion1(std::vector<Check>& checks) {
    const double vals[5] = {-2.0, -0.0, 0.0, +0.0, 2.0};
    auto indicator = [](double t) { return t > 0.0 ? 1.0 : 0.0; };
    bool ok = true;
    for (double r : vals)
        for (double y : vals) {
            // definitional table, evaluated independently of relu_rule
            const double sal = indicator(y) * r;
            const double dec = indicator(r) * r;
            const double gbp = indicator(y) * indicator(r) * r;
            ok = ok && relu_rule(r, y, VisMethod::Saliency) == sal;
            ok = ok && relu_rule(r, y, VisMethod::DeconvNet) == dec;
            ok = ok && relu_rule(r, y, VisMethod::GBP) == gbp;
        }
    checks.push_back({"relu rule matches definitional table on all sign combinations", ok, ""});
    return ok;
}

// ---- criterion 2: Lemma 1 equivalence ----

bool criterion2(std::vector<Check>& checks) {
    std::mt19937_64 pick(2024);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        PatchPlan plan;
        if (rep % 2 == 0) {
            const std::size_t d = 8 + pick() % 57;            // <= 64
            const std::size_t p = 2 + pick() % 7;             // <= 8
            const std::size_t b = 1 + pick() % 3;
            plan = make_patch_plan_1d(std::max(d, p), p, b);
        } else {
            const std::size_t c = 1 + pick() % 2;
            const std::size_t kh = 2, kw = c == 2 ? 2 : 2 + pick() % 2;  // p <= 8
            plan = make_patch_plan(4 + pick() % 3, 4 + pick() % 3, c, kh, kw, 1 + pick() % 2);
        }
        const std::size_t N = 1 + pick() % 32, K = 1 + pick() % 5;
        ThreeLayerModel m = random_three_layer_model(plan, N, K, RngSpec::truncated(7 * rep + 1, 0.0, 0.1));
        Network net = to_network(m);
        Tensor x = sample(RngSpec::gaussian(13 * rep + 5, 0.0, 1.0), {plan.in_h, plan.in_w, plan.in_c});
        ForwardTrace trace = forward(net, x);
        const std::size_t k = pick() % K;
        for (auto method : {VisMethod::Saliency, VisMethod::DeconvNet, VisMethod::GBP})
            worst = std::max(worst, rel_err_flat(backward(net, trace, k, method).raw, closed_form(m, x, k, method)));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst relative error %.3g over 50 models x 3 methods", worst);
    checks.push_back({"engine backward == Lemma-1 closed form (tol 1e-9)", worst <= 1e-9, buf});
    return worst <= 1e-9;
}

// ---- criterion 3: saliency == finite differences ----

bool criterion3(std::vector<Check>& checks) {
    std::mt19937_64 pick(33);
    double worst = 0.0;
    int tested = 0;
    for (int rep = 0; tested < 20 && rep < 200; ++rep) {
        std::vector<LayerSpec> specs{LayerSpec::conv(3, 3, 1, 4 + pick() % 4), LayerSpec::relu()};
        if (rep % 3 == 1) specs.push_back(LayerSpec::maxpool(2));
        if (rep % 3 == 2) {
            specs.push_back(LayerSpec::conv(2, 2, 1, 3));
            specs.push_back(LayerSpec::relu());
        }
        specs.push_back(LayerSpec::flatten());
        specs.push_back(LayerSpec::dense(3));
        Network net = build(specs, {6, 6, 2}, RngSpec::gaussian(1000 + rep, 0.0, 0.4));
        Tensor x = sample(RngSpec::gaussian(2000 + rep, 0.0, 1.0), {6, 6, 2});
        ForwardTrace trace = forward(net, x);
        double min_pre = 1e18;
        for (std::size_t l = 0; l < specs.size(); ++l)
            if (specs[l].kind == LayerKind::ReLU)
                for (double v : trace.layers[l].input.data) min_pre = std::min(min_pre, std::abs(v));
        if (min_pre < 1e-4) continue;  // degenerate point
        ++tested;
        const std::size_t k = pick() % 3;
        Tensor sal = backward(net, trace, k, VisMethod::Saliency).raw;
        const double h = 1e-5;
        for (std::size_t i = 0; i < x.numel(); ++i) {
            Tensor xp = x, xm = x;
            xp.data[i] += h;
            xm.data[i] -= h;
            const double fd = (forward(net, xp).logits.data[k] - forward(net, xm).logits.data[k]) / (2 * h);
            worst = std::max(worst, std::abs(sal.data[i] - fd) / std::max(1.0, std::abs(fd)));
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst relative error %.3g over %d nets", worst, tested);
    checks.push_back({"saliency equals central finite differences (tol 1e-5)", tested == 20 && worst <= 1e-5, buf});
    return tested == 20 && worst <= 1e-5;
}

// ---- criterion 4: Theorem 1 GBP recovery ----

bool criterion4(std::vector<Check>& checks) {
    const Tensor x = desk_input_64();
    const PatchPlan plan = make_patch_plan(64, 64, 3, 7, 7, 2);
    const Tensor oracle = gbp_theorem1_oracle(x, plan);
    const std::vector<std::size_t> n_list{8, 16, 32, 64, 128, 256};
    const std::size_t n_seeds = 11;

    std::vector<double> cells(n_list.size() * n_seeds);
    parallel_for(cells.size(), [&](std::size_t idx) {
        const std::size_t ni = idx / n_seeds, si = idx % n_seeds;
        Network net = build(cnn3(n_list[ni]), {64, 64, 3}, RngSpec::truncated(si, 0.0, 0.1));
        cells[idx] = cosine_similarity(backward(net, forward(net, x), 0, VisMethod::GBP).raw, oracle);
    });
    std::vector<double> medians(n_list.size()), xs, ys;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        std::vector<double> col(cells.begin() + ni * n_seeds, cells.begin() + (ni + 1) * n_seeds);
        medians[ni] = median_of(col);
        xs.push_back(static_cast<double>(n_list[ni]));
        ys.push_back(1.0 - medians[ni]);
    }

    char buf[256];
    const bool final_ok = medians.back() >= 0.9;
    std::snprintf(buf, sizeof(buf), "median cosine at N=256 is %.4f", medians.back());
    checks.push_back({"median cosine(GBP, oracle) >= 0.9 at N=256", final_ok, buf});

    bool mono = true;
    for (std::size_t i = 1; i < medians.size(); ++i) mono = mono && medians[i] >= medians[i - 1];
    std::string meds;
    for (double m : medians) {
        std::snprintf(buf, sizeof(buf), " %.3f", m);
        meds += buf;
    }
    checks.push_back({"median cosine monotone nondecreasing over N in {8..256}", mono, "medians:" + meds});

    const double slope = loglog_slope(xs, ys);
    const bool slope_ok = slope >= -1.5 && slope <= -0.5;
    std::snprintf(buf, sizeof(buf), "slope %.3f", slope);
    checks.push_back({"log-log slope of (1 - cosine) vs N in [-1.5, -0.5]", slope_ok, buf});
    return final_ok && mono && slope_ok;
}

// ---- criterion 5: Theorem 2 noise ----

bool criterion5(std::vector<Check>& checks) {
    const Tensor x = desk_input_64();
    const std::size_t n_seeds = 11, N = 256;
    const double c = 0.1;
    const PatchPlan plan = make_patch_plan(64, 64, 3, 7, 7, 2);
    const double p = static_cast<double>(plan.patch_size());

    // interior pixels: uniform patch coverage so the pooled moments see one
    // variance scale (the derivation drops boundary effects)
    Tensor cover = patch_coverage(plan);
    double cmax = 0.0;
    for (double v : cover.data) cmax = std::max(cmax, v);
    std::vector<std::size_t> interior;
    for (std::size_t i = 0; i < cover.numel(); ++i)
        if (cover.data[i] == cmax) interior.push_back(i);

    std::vector<double> sal_cos(n_seeds), dec_cos(n_seeds);
    std::vector<std::vector<double>> pooled(n_seeds);
    parallel_for(n_seeds, [&](std::size_t si) {
        Network net = build(cnn3(N), {64, 64, 3}, RngSpec::truncated(si, 0.0, 0.1));
        ForwardTrace trace = forward(net, x);
        Tensor sal = backward(net, trace, 0, VisMethod::Saliency).raw;
        Tensor dec = backward(net, trace, 0, VisMethod::DeconvNet).raw;
        sal_cos[si] = std::abs(cosine_similarity(sal, x));
        dec_cos[si] = std::abs(cosine_similarity(dec, x));
        const double z = c * c * std::sqrt(static_cast<double>(N) * p);
        pooled[si].reserve(interior.size());
        for (auto i : interior) pooled[si].push_back(sal.data[i] / z);
    });

    char buf[192];
    const double sal_med = median_of(sal_cos), dec_med = median_of(dec_cos);
    std::snprintf(buf, sizeof(buf), "medians |cos|: saliency %.4f, deconvnet %.4f", sal_med, dec_med);
    const bool noise_ok = sal_med <= 0.1 && dec_med <= 0.1;
    checks.push_back({"saliency and no-pool DeconvNet are noise (|cos vs x| <= 0.1)", noise_ok, buf});

    std::vector<double> all;
    for (auto& v : pooled) all.insert(all.end(), v.begin(), v.end());
    const double skew = skewness_of(all), kurt = excess_kurtosis_of(all);
    std::snprintf(buf, sizeof(buf), "pooled %zu px: skew %.4f, excess kurtosis %.4f", all.size(), skew, kurt);
    const bool moments_ok = all.size() >= 10000 && std::abs(skew) <= 0.1 && std::abs(kurt) <= 0.2;
    checks.push_back({"normalized saliency moment check (|skew|<=0.1, |ex.kurt|<=0.2)", moments_ok, buf});

    double worst_trace = 0.0;
    for (const auto& tp : {make_patch_plan_1d(512, 8, 4), make_patch_plan(16, 16, 3, 3, 3, 1),
                           make_patch_plan(12, 20, 2, 3, 4, 2, Padding::Same)}) {
        Tensor tx = sample(RngSpec::gaussian(5, 0.0, 1.0), {tp.in_h, tp.in_w, tp.in_c});
        CovarianceOracle co = saliency_covariance_oracle(tx, tp, tp.patch_size());
        const double want = static_cast<double>(tp.input_numel()) -
                            static_cast<double>(co.contributing_patches) / (2.0 * static_cast<double>(tp.patch_size()));
        worst_trace = std::max(worst_trace, std::abs(co.trace - want));
    }
    std::snprintf(buf, sizeof(buf), "worst |trace - (d - J/2p)| = %.3g", worst_trace);
    checks.push_back({"covariance oracle trace identity (tol 1e-9)", worst_trace <= 1e-9, buf});
    return noise_ok && moments_ok && worst_trace <= 1e-9;
}

// ---- criterion 6: max-pooling effect ----

bool criterion6(std::vector<Check>& checks) {
    const Tensor x = desk_input_64();
    const std::size_t n_seeds = 20, N = 256;
    std::vector<LayerSpec> specs{LayerSpec::conv(7, 7, 2, N), LayerSpec::relu(), LayerSpec::maxpool(2),
                                 LayerSpec::flatten(), LayerSpec::dense(10)};
    std::vector<double> dec_gbp(n_seeds), gbp_blind(n_seeds);
    parallel_for(n_seeds, [&](std::size_t si) {
        Network net = build(specs, {64, 64, 3}, RngSpec::truncated(si, 0.0, 0.1));
        ForwardTrace trace = forward(net, x);
        Tensor gbp = backward(net, trace, 0, VisMethod::GBP).raw;
        dec_gbp[si] = cosine_similarity(backward(net, trace, 0, VisMethod::DeconvNet).raw, gbp);
        Tensor seed_grad({net.logit_count()});
        seed_grad.data[0] = 1.0;
        BackwardHooks blind;
        blind.pool_blind = true;
        gbp_blind[si] = cosine_similarity(gbp, backward_seeded(net, trace, seed_grad, VisMethod::GBP, blind));
    });
    char buf[128];
    const double m1 = median_of(dec_gbp), m2 = median_of(gbp_blind);
    std::snprintf(buf, sizeof(buf), "median cosine %.4f over 20 seeds", m1);
    checks.push_back({"pool window 2: median cosine(DeconvNet, GBP) >= 0.8", m1 >= 0.8, buf});
    std::snprintf(buf, sizeof(buf), "median cosine %.4f over 20 seeds", m2);
    checks.push_back({"GBP unchanged by pooling (cos vs pool-blind GBP >= 0.99)", m2 >= 0.99, buf});
    return m1 >= 0.8 && m2 >= 0.99;
}

// ---- criterion 7: depth invariance ----

bool criterion7(std::vector<Check>& checks) {
    const Tensor x = desk_input_64();
    const PatchPlan plan = make_patch_plan(64, 64, 3, 3, 3, 1);
    const Tensor oracle = gbp_theorem1_oracle(x, plan);
    const std::size_t n_seeds = 11;
    std::vector<LayerSpec> specs = runners::deep5_specs(128, false);

    std::vector<double> gbp_cos(n_seeds), sal_cos(n_seeds);
    parallel_for(n_seeds, [&](std::size_t si) {
        Network net = build(specs, {64, 64, 3}, RngSpec::truncated(si, 0.0, 0.1));
        ForwardTrace trace = forward(net, x);
        gbp_cos[si] = cosine_similarity(backward(net, trace, 0, VisMethod::GBP).raw, oracle);
        sal_cos[si] = std::abs(cosine_similarity(backward(net, trace, 0, VisMethod::Saliency).raw, x));
    });
    char buf[160];
    const double g = median_of(gbp_cos), s = median_of(sal_cos);
    std::snprintf(buf, sizeof(buf), "medians over 11 seeds: GBP vs oracle %.4f, |saliency vs x| %.4f", g, s);
    const bool cos_ok = g >= 0.8 && s <= 0.15;
    checks.push_back({"5-conv-layer CNN: GBP cosine >= 0.8 and |saliency cosine| <= 0.15", cos_ok, buf});

    Network probe = build({LayerSpec::conv(3, 3, 1, 16), LayerSpec::relu(), LayerSpec::conv(3, 3, 1, 16),
                           LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(4)},
                          {12, 12, 3}, RngSpec::truncated(0, 0.0, 0.1));
    Tensor px = unit(texture_image(12, 12, 3, 7));
    IndependenceReport rep =
        independence_stat_check(probe, RngSpec::truncated(11, 0.0, 0.1), px, 0, VisMethod::GBP, 1, 200, 50);
    std::snprintf(buf, sizeof(buf), "%.0f%% of 50 pair correlations within 4/sqrt(200)=%.3f (max |corr| %.3f)",
                  100.0 * rep.frac_pairs_within, rep.corr_bound, rep.max_abs_corr);
    checks.push_back({"independence_stat_check passes (>=95% pairs within bound)", rep.pass, buf});
    return cos_ok && rep.pass;
}

// ---- criterion 8: FCN contrast ----

bool criterion8(std::vector<Check>& checks) {
    const Tensor x = desk_input_64();
    const Tensor x_flat({x.numel()}, x.data);
    const std::vector<std::size_t> hidden{5000, 10000, 40000};
    const std::size_t n_seeds = 11;

    std::vector<double> cnn(n_seeds);
    parallel_for(n_seeds, [&](std::size_t si) {
        Network net = build(cnn3(64), {64, 64, 3}, RngSpec::truncated(si, 0.0, 0.1));
        cnn[si] = cosine_similarity(backward(net, forward(net, x), 0, VisMethod::GBP).raw, x);
    });
    const double cnn_med = median_of(cnn);

    std::vector<double> fcn(hidden.size() * n_seeds);
    parallel_for(fcn.size(), [&](std::size_t idx) {
        const std::size_t hi = idx / n_seeds, si = idx % n_seeds;
        Tensor raw = fcn_backward_stream(x_flat, hidden[hi], 10, 0, VisMethod::GBP,
                                         RngSpec::truncated(101 + si, 0.0, 0.1));
        fcn[idx] = cosine_similarity(raw, x);
    });
    std::vector<double> med(hidden.size());
    for (std::size_t hi = 0; hi < hidden.size(); ++hi) {
        std::vector<double> col(fcn.begin() + hi * n_seeds, fcn.begin() + (hi + 1) * n_seeds);
        med[hi] = median_of(col);
    }

    char buf[192];
    const bool increasing = med[0] < med[1] && med[1] < med[2];
    std::snprintf(buf, sizeof(buf), "FCN medians %.4f -> %.4f -> %.4f", med[0], med[1], med[2]);
    checks.push_back({"FCN GBP cosine strictly increasing in hidden size", increasing, buf});
    std::snprintf(buf, sizeof(buf), "FCN at 40000: %.4f vs CNN at N=64: %.4f", med[2], cnn_med);
    const bool bounded = med[2] <= cnn_med;
    checks.push_back({"largest FCN still below the CNN at N=64", bounded, buf});
    return increasing && bounded;
}

// ---- criterion 9: class-insensitivity ordering ----

bool criterion9(std::vector<Check>& checks) {
    const std::size_t N = 2048, batch = 100, K = 10;
    Network plain = build(cnn3(N), {64, 64, 3}, RngSpec::truncated(0, 0.0, 0.1));
    Network pooled = build({LayerSpec::conv(7, 7, 2, N), LayerSpec::relu(), LayerSpec::maxpool(2),
                            LayerSpec::flatten(), LayerSpec::dense(K)},
                           {64, 64, 3}, RngSpec::truncated(0, 0.0, 0.1));
    std::vector<double> ds(batch), dg(batch), dd(batch);
    parallel_for(batch, [&](std::size_t i) {
        std::mt19937_64 pick(7919 * (i + 1));
        const std::size_t k1 = pick() % K;
        std::size_t k2 = pick() % K;
        while (k2 == k1) k2 = pick() % K;
        Tensor x = unit(texture_image(64, 64, 3, 1000 + i));
        ForwardTrace tp = forward(plain, x);
        ForwardTrace tq = forward(pooled, x);
        auto dist = [&](const Network& net, const ForwardTrace& t, VisMethod m) {
            return l2_norm(sub(unit(backward(net, t, k1, m).raw), unit(backward(net, t, k2, m).raw)));
        };
        ds[i] = dist(plain, tp, VisMethod::Saliency);
        dg[i] = dist(plain, tp, VisMethod::GBP);
        dd[i] = dist(pooled, tq, VisMethod::DeconvNet);
    });
    const double ms = mean_of(ds), mg = mean_of(dg), md = mean_of(dd);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "mean L2: saliency %.3f, gbp %.3f, deconv-pool %.3f (ratios %.2f, %.2f)", ms, mg,
                  md, ms / mg, ms / md);
    const bool ok = ms > 3.0 * mg && ms > 3.0 * md;
    checks.push_back({"saliency distance > 3x GBP and > 3x DeconvNet-with-pool", ok, buf});
    return ok;
}

// ---- criterion 10: FGSM invariance ordering ----

bool criterion10(std::vector<Check>& checks) {
    Dataset data = synth_shapes(240, 1);
    Network net = build({LayerSpec::conv(5, 5, 1, 8), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::flatten(),
                         LayerSpec::dense(4)},
                        {32, 32, 1}, RngSpec::truncated(0, 0.0, 0.1));
    TrainConfig tc;
    tc.learning_rate = 0.5;
    tc.epochs = 10;
    tc.batch_size = 16;
    tc.seed = 2;
    Network trained_net = train(net, data, tc);

    Dataset held = synth_shapes(64, 31);
    const double eps = 0.1;  // calibrated: see tools/calibrate.cpp
    std::size_t flips = 0;
    std::vector<double> ds(held.size()), dg(held.size());
    for (std::size_t i = 0; i < held.size(); ++i) {
        Tensor x = held.image(i);
        Tensor adv = fgsm(trained_net, x, held.labels[i], eps);
        ForwardTrace tc_ = forward(trained_net, x);
        ForwardTrace ta = forward(trained_net, adv);
        const std::size_t pc = argmax(tc_.logits), pa = argmax(ta.logits);
        if (pc != pa) ++flips;
        auto change = [&](VisMethod m) {
            return l2_norm(sub(unit(backward(trained_net, tc_, pc, m).raw), unit(backward(trained_net, ta, pa, m).raw)));
        };
        ds[i] = change(VisMethod::Saliency);
        dg[i] = change(VisMethod::GBP);
    }
    const double flip_rate = static_cast<double>(flips) / held.size();
    const double ms = mean_of(ds), mg = mean_of(dg);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "flip rate %.2f at eps=%.2f", flip_rate, eps);
    checks.push_back({"FGSM flips >= 50% of the held-out batch", flip_rate >= 0.5, buf});
    std::snprintf(buf, sizeof(buf), "mean map change: saliency %.3f vs gbp %.3f (ratio %.2f)", ms, mg, ms / mg);
    const bool ratio_ok = ms >= 2.0 * mg;
    checks.push_back({"saliency map L2 change >= 2x GBP map change", ratio_ok, buf});
    return flip_rate >= 0.5 && ratio_ok;
}

// ---- criterion 11: engineering invariants ----

bool criterion11(std::vector<Check>& checks) {
    bool all = true;

    // gather/scatter adjointness at 1e-12
    {
        NormalStream s(RngSpec::gaussian(3, 0.0, 1.0));
        double worst = 0.0;
        for (const auto& plan : {make_patch_plan(9, 11, 3, 3, 4, 2), make_patch_plan(8, 8, 1, 3, 3, 1, Padding::Same),
                                 make_patch_plan_1d(128, 5, 3)}) {
            Tensor x({plan.in_h, plan.in_w, plan.in_c});
            Tensor r({plan.patch_count(), plan.patch_size()});
            s.fill(x);
            s.fill(r);
            const double lhs = dot(gather_patches(x, plan), r);
            Tensor sc = scatter_patches(r, plan);
            double rhs = 0.0;
            for (std::size_t i = 0; i < sc.numel(); ++i) rhs += sc.data[i] * x.data[i];
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "worst relative defect %.3g", worst);
        checks.push_back({"gather/scatter adjointness (tol 1e-12)", worst <= 1e-12, buf});
        all = all && worst <= 1e-12;
    }

    const std::string tmp = std::filesystem::temp_directory_path().string();

    // network save/load bit-exact
    {
        Network net = build({LayerSpec::conv(5, 5, 2, 12, Padding::Same), LayerSpec::relu(), LayerSpec::maxpool(2),
                             LayerSpec::flatten(), LayerSpec::dense(7)},
                            {18, 18, 3}, RngSpec::truncated(9, 0.0, 0.1));
        const std::string path = tmp + "/acceptance_net.bvnet";
        save_network(net, path);
        Network loaded = load_network(path);
        bool same = loaded.input_shape == net.input_shape && loaded.specs.size() == net.specs.size();
        for (std::size_t l = 0; same && l < net.specs.size(); ++l) same = loaded.params[l].data == net.params[l].data;
        std::filesystem::remove(path);
        checks.push_back({"network save/load round-trip is bit-exact", same, ""});
        all = all && same;
    }

    // PGM/PPM round-trip within quantization
    {
        Tensor img({5, 4, 3});
        for (std::size_t i = 0; i < img.numel(); ++i) img.data[i] = i / static_cast<double>(img.numel() - 1);
        const std::string path = tmp + "/acceptance_rt.ppm";
        write_image(img, path);
        Tensor back = read_image(path);
        double worst = 0.0;
        for (std::size_t i = 0; i < img.numel(); ++i) worst = std::max(worst, std::abs(back.data[i] - img.data[i]));
        std::filesystem::remove(path);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "worst pixel error %.5f (bound 1/255 = %.5f)", worst, 1.0 / 255.0);
        checks.push_back({"PGM/PPM round-trip within quantization", worst <= 1.0 / 255.0 + 1e-12, buf});
        all = all && worst <= 1.0 / 255.0 + 1e-12;
    }

    // byte-reproducible experiment reruns
    {
        ExperimentConfig cfg;
        cfg.experiment = "maxpool";
        cfg.values["seeds"] = "3";
        cfg.values["n_filters"] = "32";
        const std::string a = tmp + "/acceptance_rerun_a", b = tmp + "/acceptance_rerun_b";
        std::filesystem::remove_all(a);
        std::filesystem::remove_all(b);
        run_experiment(cfg, a);
        run_experiment(cfg, b);
        auto slurp = [](const std::string& p) {
            std::ifstream is(p, std::ios::binary);
            std::stringstream ss;
            ss << is.rdbuf();
            return ss.str();
        };
        const bool same = slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv") && !slurp(a + "/metrics.csv").empty();
        std::filesystem::remove_all(a);
        std::filesystem::remove_all(b);
        checks.push_back({"experiment rerun produces byte-identical CSV", same, ""});
        all = all && same;
    }
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

    using Fn = std::function<bool(std::vector<Check>&)>;
    const std::vector<std::pair<std::string, Fn>> criteria{
        {"ReLU-rule table", criterion1},
        {"Lemma 1 equivalence", criterion2},
        {"saliency = true gradient", criterion3},
        {"Theorem 1 GBP recovery", criterion4},
        {"Theorem 2 noise", criterion5},
        {"max-pool effect", criterion6},
        {"depth invariance", criterion7},
        {"FCN contrast", criterion8},
        {"class-insensitivity ordering", criterion9},
        {"FGSM invariance ordering", criterion10},
        {"engineering invariants", criterion11},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int num = static_cast<int>(i) + 1;
        if (only != 0 && only != num) continue;
        std::vector<Check> checks;
        bool ok = false;
        try {
            ok = criteria[i].second(checks);
        } catch (const std::exception& e) {
            checks.push_back({"exception", false, e.what()});
        }
        std::printf("criterion %2d  %-32s  %s\n", num, criteria[i].first.c_str(), ok ? "PASS" : "FAIL");
        for (const auto& c : checks)
            std::printf("              %s  %s%s%s\n", c.ok ? "[pass]" : "[FAIL]", c.name.c_str(),
                        c.detail.empty() ? "" : " -- ", c.detail.c_str());
        if (!ok) ++failures;
    }
    return failures;
}
