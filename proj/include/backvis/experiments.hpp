#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "backvis/fcn_stream.hpp"
#include "backvis/image_io.hpp"
#include "backvis/network.hpp"
#include "backvis/parallel.hpp"
#include "backvis/theory.hpp"
#include "backvis/trainer.hpp"
#include "backvis/version.hpp"
#include "backvis/visualize.hpp"

namespace backvis {

// ---- configuration: line-oriented `key = value`, unknown keys rejected ----

struct ExperimentConfig {
    std::string experiment;
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string get(const std::string& key, const std::string& dflt) const {
        auto it = values.find(key);
        return it == values.end() ? dflt : it->second;
    }
    double get_num(const std::string& key, double dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument("config: key '" + key + "' is not a number: " + it->second);
        }
    }
    std::size_t get_count(const std::string& key, std::size_t dflt) const {
        const double v = get_num(key, static_cast<double>(dflt));
        if (v < 0 || v != std::floor(v)) throw std::invalid_argument("config: key '" + key + "' must be a nonneg integer");
        return static_cast<std::size_t>(v);
    }
    std::vector<std::size_t> get_list(const std::string& key, std::vector<std::size_t> dflt) const {
        auto it = values.find(key);
        if (it == values.end()) return dflt;
        std::vector<std::size_t> out;
        std::istringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(static_cast<std::size_t>(std::stoul(tok)));
        if (out.empty()) throw std::invalid_argument("config: key '" + key + "' has an empty list");
        return out;
    }
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value', got: " + t);
        const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.values.count(key))
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        cfg.values[key] = value;
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

// ---- metrics CSV: append-only rows with a fixed header ----

struct MetricsWriter {
    std::vector<std::string> rows;

    void add(const std::string& experiment, std::uint64_t seed, const std::string& method, std::size_t target_logit,
             const std::string& metric, double value) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        rows.push_back(experiment + "," + std::to_string(seed) + "," + method + "," + std::to_string(target_logit) +
                       "," + metric + "," + buf);
    }

    void write(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);  // binary: byte-identical reruns
        if (!os) throw std::runtime_error("metrics: cannot open " + path);
        os << "experiment,seed,method,target_logit,metric,value\n";
        for (const auto& r : rows) os << r << "\n";
    }
};

// ---- experiment registry ----

inline const std::vector<std::string>& experiment_registry() {
    static const std::vector<std::string> ids{"cnn-vs-fcn", "filters-sweep", "maxpool",      "depth",
                                              "l2-stats",   "fgsm",          "splice",       "edge-detector"};
    return ids;
}

namespace detail {

inline const std::set<std::string>& allowed_keys(const std::string& experiment) {
    static const std::map<std::string, std::set<std::string>> keys{
        {"cnn-vs-fcn", {"image", "seed", "n_filters", "hidden", "logits", "target_logit"}},
        {"filters-sweep", {"image", "seed", "seeds", "n_list", "hidden_list", "logits", "target_logit"}},
        {"maxpool", {"image", "seed", "seeds", "n_filters", "pool_window", "logits", "target_logit"}},
        {"depth", {"image", "seed", "seeds", "n_filters", "depth_filters", "logits", "target_logit", "reseeds", "pairs"}},
        {"l2-stats", {"seed", "n_filters", "batch", "logits", "pool_window", "train_images", "epochs", "learning_rate"}},
        {"fgsm", {"seed", "epsilon", "batch", "train_images", "epochs", "learning_rate"}},
        {"splice", {"seed", "train_images", "epochs", "learning_rate", "target_logit"}},
        {"edge-detector", {"image", "seed", "train_images", "epochs", "learning_rate", "target_logit"}},
    };
    auto it = keys.find(experiment);
    if (it == keys.end()) {
        std::string msg = "unknown experiment '" + experiment + "'; registry:";
        for (const auto& id : experiment_registry()) msg += " " + id;
        throw std::invalid_argument(msg);
    }
    return it->second;
}

inline void check_keys(const ExperimentConfig& cfg) {
    const auto& allowed = allowed_keys(cfg.experiment);
    for (const auto& [k, v] : cfg.values)
        if (!allowed.count(k)) {
            std::string msg = "config: unknown key '" + k + "' for experiment " + cfg.experiment + "; allowed:";
            for (const auto& a : allowed) msg += " " + a;
            throw std::invalid_argument(msg);
        }
}

inline void write_manifest(const ExperimentConfig& cfg, const std::string& out_dir,
                           const std::vector<std::uint64_t>& seeds) {
    std::ofstream os(out_dir + "/manifest.txt", std::ios::binary);
    if (!os) throw std::runtime_error("manifest: cannot open " + out_dir + "/manifest.txt");
    os << "engine = " << engine_version() << "\n";
    os << "experiment = " << cfg.experiment << "\n";
    for (const auto& [k, v] : cfg.values) os << k << " = " << v << "\n";  // std::map: sorted echo
    os << "seeds =";
    for (auto s : seeds) os << " " << s;
    os << "\n";
}

/// Desk input: "texture:<seed>" builtin or a PGM/PPM path. Images are used
/// L2-normalized throughout the random-net experiments.
inline Tensor desk_image(const std::string& spec, std::size_t h, std::size_t w, std::size_t c) {
    Tensor img;
    if (spec.rfind("texture:", 0) == 0) {
        img = texture_image(h, w, c, std::stoull(spec.substr(8)));
    } else {
        img = read_image(spec);
        if (img.shape[0] != h || img.shape[1] != w || img.shape[2] != c)
            throw std::invalid_argument("image " + spec + " has shape " + shape_str(img.shape) + ", experiment needs [" +
                                        std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(c) + "]");
    }
    return img;
}

inline Tensor unit_or_zero(const Tensor& t) {
    const double n = l2_norm(t);
    return n == 0.0 ? t : scale(t, 1.0 / n);
}

inline std::vector<LayerSpec> cnn3_specs(std::size_t n_filters) {
    return {LayerSpec::conv(7, 7, 2, n_filters), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(10)};
}

inline Tensor map_as_image(const Tensor& map, const Shape& img_shape) { return map.reshaped(img_shape); }

inline Network trained_tiny_cnn(const ExperimentConfig& cfg, std::uint64_t seed, Dataset* train_set = nullptr) {
    const std::size_t n_train = cfg.get_count("train_images", 240);
    Dataset data = synth_shapes(n_train, seed + 1);
    Network net = build({LayerSpec::conv(5, 5, 1, 8), LayerSpec::relu(), LayerSpec::maxpool(2), LayerSpec::flatten(),
                         LayerSpec::dense(4)},
                        {32, 32, 1}, RngSpec::truncated(seed, 0.0, 0.1));
    TrainConfig tc;
    tc.learning_rate = cfg.get_num("learning_rate", 0.5);
    tc.batch_size = 16;
    tc.epochs = cfg.get_count("epochs", 10);
    tc.seed = seed + 2;
    if (train_set) *train_set = data;
    return train(net, data, tc);
}

}  // namespace detail

// ---- runners ----

struct RunResult {
    MetricsWriter metrics;
    std::vector<std::uint64_t> seeds;
};

namespace runners {

inline void cnn_vs_fcn(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed = cfg.get_count("seed", 0);
    const std::size_t N = cfg.get_count("n_filters", 256);
    const std::size_t hidden = cfg.get_count("hidden", 4096);
    const std::size_t K = cfg.get_count("logits", 10);
    const std::size_t k = cfg.get_count("target_logit", 0);
    res.seeds = {seed};

    Tensor img = detail::desk_image(cfg.get("image", "texture:0"), 64, 64, 3);
    Tensor x = detail::unit_or_zero(img);
    write_image(img, out_dir + "/input.ppm");

    Network cnn = build(detail::cnn3_specs(N), {64, 64, 3}, RngSpec::truncated(seed, 0.0, 0.1));
    ForwardTrace trace = forward(cnn, x);
    for (auto method : {VisMethod::GBP, VisMethod::DeconvNet, VisMethod::Saliency}) {
        VisResult vr = backward(cnn, trace, k, method);
        write_image(detail::map_as_image(vr.map, {64, 64, 3}), out_dir + "/cnn_" + vis_method_name(method) + ".ppm");
        res.metrics.add("cnn-vs-fcn", seed, std::string("cnn-") + vis_method_name(method), k, "cos_vs_input",
                        cosine_similarity(vr.raw, x));
    }
    for (auto method : {VisMethod::GBP, VisMethod::DeconvNet, VisMethod::Saliency}) {
        Tensor raw = fcn_backward_stream(Tensor({x.numel()}, x.data), hidden, K, k, method,
                                         RngSpec::truncated(seed + 101, 0.0, 0.1));
        write_image(detail::map_as_image(raw, {64, 64, 3}), out_dir + "/fcn_" + vis_method_name(method) + ".ppm");
        res.metrics.add("cnn-vs-fcn", seed, std::string("fcn-") + vis_method_name(method), k, "cos_vs_input",
                        cosine_similarity(raw, x));
    }
}

inline void filters_sweep(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const std::size_t n_seeds = cfg.get_count("seeds", 11);
    const std::size_t K = cfg.get_count("logits", 10);
    const std::size_t k = cfg.get_count("target_logit", 0);
    const auto n_list = cfg.get_list("n_list", {8, 16, 32, 64, 128, 256});
    const auto hidden_list = cfg.get_list("hidden_list", {5000, 10000, 40000});
    for (std::size_t s = 0; s < n_seeds; ++s) res.seeds.push_back(seed0 + s);

    Tensor img = detail::desk_image(cfg.get("image", "texture:0"), 64, 64, 3);
    Tensor x = detail::unit_or_zero(img);
    PatchPlan plan = make_patch_plan(64, 64, 3, 7, 7, 2);
    Tensor oracle = gbp_theorem1_oracle(x, plan);
    res.metrics.add("filters-sweep", seed0, "oracle", k, "oracle_cos_input", cosine_similarity(oracle, x));

    // CNN sweep: cosine(GBP, theorem-1 oracle) per N per seed
    struct Cell {
        double cos_oracle, cos_input;
    };
    std::vector<Cell> cells(n_list.size() * n_seeds);
    parallel_for(cells.size(), [&](std::size_t idx) {
        const std::size_t ni = idx / n_seeds, si = idx % n_seeds;
        Network cnn = build(detail::cnn3_specs(n_list[ni]), {64, 64, 3},
                            RngSpec::truncated(seed0 + si, 0.0, 0.1));
        Tensor raw = backward(cnn, forward(cnn, x), k, VisMethod::GBP).raw;
        cells[idx] = {cosine_similarity(raw, oracle), cosine_similarity(raw, x)};
    });
    for (std::size_t ni = 0; ni < n_list.size(); ++ni)
        for (std::size_t si = 0; si < n_seeds; ++si) {
            res.metrics.add("filters-sweep", seed0 + si, "cnn-gbp-N" + std::to_string(n_list[ni]), k, "cos_vs_oracle",
                            cells[ni * n_seeds + si].cos_oracle);
            res.metrics.add("filters-sweep", seed0 + si, "cnn-gbp-N" + std::to_string(n_list[ni]), k, "cos_vs_input",
                            cells[ni * n_seeds + si].cos_input);
        }

    // FCN sweep: cosine(GBP, input) per hidden size per seed
    std::vector<double> fcn(hidden_list.size() * n_seeds);
    parallel_for(fcn.size(), [&](std::size_t idx) {
        const std::size_t hi = idx / n_seeds, si = idx % n_seeds;
        Tensor raw = fcn_backward_stream(Tensor({x.numel()}, x.data), hidden_list[hi], K, k, VisMethod::GBP,
                                         RngSpec::truncated(seed0 + 101 + si, 0.0, 0.1));
        fcn[idx] = cosine_similarity(raw, x);
    });
    for (std::size_t hi = 0; hi < hidden_list.size(); ++hi)
        for (std::size_t si = 0; si < n_seeds; ++si)
            res.metrics.add("filters-sweep", seed0 + si, "fcn-gbp-H" + std::to_string(hidden_list[hi]), k,
                            "cos_vs_input", fcn[hi * n_seeds + si]);
    (void)out_dir;
}

inline void maxpool(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const std::size_t n_seeds = cfg.get_count("seeds", 20);
    const std::size_t N = cfg.get_count("n_filters", 256);
    const std::size_t window = cfg.get_count("pool_window", 2);
    const std::size_t k = cfg.get_count("target_logit", 0);
    for (std::size_t s = 0; s < n_seeds; ++s) res.seeds.push_back(seed0 + s);

    Tensor img = detail::desk_image(cfg.get("image", "texture:0"), 64, 64, 3);
    Tensor x = detail::unit_or_zero(img);
    PatchPlan plan = make_patch_plan(64, 64, 3, 7, 7, 2);
    Tensor oracle = gbp_theorem1_oracle(x, plan);

    std::vector<LayerSpec> specs{LayerSpec::conv(7, 7, 2, N), LayerSpec::relu(), LayerSpec::maxpool(window),
                                 LayerSpec::flatten(), LayerSpec::dense(10)};
    struct Row {
        double dec_vs_gbp, gbp_vs_blind, gbp_vs_oracle, dec_vs_oracle, sal_vs_input;
    };
    std::vector<Row> rows(n_seeds);
    parallel_for(n_seeds, [&](std::size_t si) {
        Network net = build(specs, {64, 64, 3}, RngSpec::truncated(seed0 + si, 0.0, 0.1));
        ForwardTrace trace = forward(net, x);
        Tensor gbp = backward(net, trace, k, VisMethod::GBP).raw;
        Tensor dec = backward(net, trace, k, VisMethod::DeconvNet).raw;
        Tensor sal = backward(net, trace, k, VisMethod::Saliency).raw;
        Tensor seed_grad({net.logit_count()});
        seed_grad.data[k] = 1.0;
        BackwardHooks blind;
        blind.pool_blind = true;
        Tensor gbp_blind = backward_seeded(net, trace, seed_grad, VisMethod::GBP, blind);
        rows[si] = {cosine_similarity(dec, gbp), cosine_similarity(gbp, gbp_blind), cosine_similarity(gbp, oracle),
                    cosine_similarity(dec, oracle), cosine_similarity(sal, x)};
        if (si == 0) {
            write_image(detail::map_as_image(gbp, {64, 64, 3}), out_dir + "/pool_gbp.ppm");
            write_image(detail::map_as_image(dec, {64, 64, 3}), out_dir + "/pool_deconvnet.ppm");
            write_image(detail::map_as_image(sal, {64, 64, 3}), out_dir + "/pool_saliency.ppm");
        }
    });
    for (std::size_t si = 0; si < n_seeds; ++si) {
        res.metrics.add("maxpool", seed0 + si, "deconvnet", k, "cos_deconv_vs_gbp", rows[si].dec_vs_gbp);
        res.metrics.add("maxpool", seed0 + si, "gbp", k, "cos_gbp_vs_poolblind", rows[si].gbp_vs_blind);
        res.metrics.add("maxpool", seed0 + si, "gbp", k, "cos_vs_oracle", rows[si].gbp_vs_oracle);
        res.metrics.add("maxpool", seed0 + si, "deconvnet", k, "cos_vs_oracle", rows[si].dec_vs_oracle);
        res.metrics.add("maxpool", seed0 + si, "saliency", k, "cos_vs_input", rows[si].sal_vs_input);
    }
}

inline std::vector<LayerSpec> deep5_specs(std::size_t n_filters, bool with_pools) {
    std::vector<LayerSpec> specs;
    specs.push_back(LayerSpec::conv(3, 3, 1, n_filters));
    specs.push_back(LayerSpec::relu());
    if (with_pools) specs.push_back(LayerSpec::maxpool(2));
    specs.push_back(LayerSpec::conv(3, 3, 1, n_filters));
    specs.push_back(LayerSpec::relu());
    if (with_pools) specs.push_back(LayerSpec::maxpool(2));
    for (int rep = 0; rep < 3; ++rep) {
        specs.push_back(LayerSpec::conv(3, 3, 1, n_filters));
        specs.push_back(LayerSpec::relu());
    }
    specs.push_back(LayerSpec::flatten());
    specs.push_back(LayerSpec::dense(10));
    return specs;
}

inline void depth(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const std::size_t n_seeds = cfg.get_count("seeds", 11);
    const std::size_t N = cfg.get_count("depth_filters", 128);
    const std::size_t k = cfg.get_count("target_logit", 0);
    for (std::size_t s = 0; s < n_seeds; ++s) res.seeds.push_back(seed0 + s);

    Tensor img = detail::desk_image(cfg.get("image", "texture:0"), 64, 64, 3);
    Tensor x = detail::unit_or_zero(img);
    PatchPlan plan = make_patch_plan(64, 64, 3, 3, 3, 1);
    Tensor oracle = gbp_theorem1_oracle(x, plan);

    for (bool pools : {false, true}) {
        const std::string tag = pools ? "pool5" : "nopool5";
        std::vector<LayerSpec> specs = deep5_specs(N, pools);
        struct Row {
            double gbp_oracle, sal_input, dec_gbp;
        };
        std::vector<Row> rows(n_seeds);
        parallel_for(n_seeds, [&](std::size_t si) {
            Network net = build(specs, {64, 64, 3}, RngSpec::truncated(seed0 + si, 0.0, 0.1));
            ForwardTrace trace = forward(net, x);
            Tensor gbp = backward(net, trace, k, VisMethod::GBP).raw;
            Tensor sal = backward(net, trace, k, VisMethod::Saliency).raw;
            Tensor dec = backward(net, trace, k, VisMethod::DeconvNet).raw;
            rows[si] = {cosine_similarity(gbp, oracle), cosine_similarity(sal, x), cosine_similarity(dec, gbp)};
            if (si == 0)
                write_image(detail::map_as_image(gbp, {64, 64, 3}), out_dir + "/depth_" + tag + "_gbp.ppm");
        });
        for (std::size_t si = 0; si < n_seeds; ++si) {
            res.metrics.add("depth", seed0 + si, "gbp-" + tag, k, "cos_vs_oracle", rows[si].gbp_oracle);
            res.metrics.add("depth", seed0 + si, "saliency-" + tag, k, "cos_vs_input", rows[si].sal_input);
            res.metrics.add("depth", seed0 + si, "deconvnet-" + tag, k, "cos_vs_gbp", rows[si].dec_gbp);
        }
    }

    // Proposition-1 statistics on a desk-scale 4-layer CNN
    Network probe = build({LayerSpec::conv(3, 3, 1, 16), LayerSpec::relu(), LayerSpec::conv(3, 3, 1, 16),
                           LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(4)},
                          {12, 12, 3}, RngSpec::truncated(seed0, 0.0, 0.1));
    Tensor px = detail::unit_or_zero(texture_image(12, 12, 3, seed0 + 7));
    IndependenceReport rep = independence_stat_check(probe, RngSpec::truncated(seed0 + 11, 0.0, 0.1), px, 0,
                                                     VisMethod::GBP, 1, cfg.get_count("reseeds", 200),
                                                     cfg.get_count("pairs", 50));
    res.metrics.add("depth", seed0, "independence", 0, "frac_pairs_within", rep.frac_pairs_within);
    res.metrics.add("depth", seed0, "independence", 0, "max_abs_corr", rep.max_abs_corr);
    res.metrics.add("depth", seed0, "independence", 0, "frac_means_within", rep.frac_means_within);
    res.metrics.add("depth", seed0, "independence", 0, "pass", rep.pass ? 1.0 : 0.0);
}

inline void l2_stats(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const std::size_t N = cfg.get_count("n_filters", 2048);
    const std::size_t batch = cfg.get_count("batch", 100);
    const std::size_t K = cfg.get_count("logits", 10);
    const std::size_t window = cfg.get_count("pool_window", 2);
    res.seeds = {seed0};

    // one random net per architecture, a batch of textures, two random logits
    // per image; distances on unit-normalized maps
    Network plain = build(detail::cnn3_specs(N), {64, 64, 3}, RngSpec::truncated(seed0, 0.0, 0.1));
    Network pooled = build({LayerSpec::conv(7, 7, 2, N), LayerSpec::relu(), LayerSpec::maxpool(window),
                            LayerSpec::flatten(), LayerSpec::dense(K)},
                           {64, 64, 3}, RngSpec::truncated(seed0, 0.0, 0.1));

    struct Row {
        double sal, gbp, dec_pool;
        std::size_t k1, k2;
    };
    std::vector<Row> rows(batch);
    parallel_for(batch, [&](std::size_t i) {
        std::mt19937_64 pick(seed0 + 7919 * (i + 1));
        const std::size_t k1 = pick() % K;
        std::size_t k2 = pick() % K;
        while (k2 == k1) k2 = pick() % K;
        Tensor x = detail::unit_or_zero(texture_image(64, 64, 3, seed0 + 1000 + i));
        ForwardTrace tp = forward(plain, x);
        ForwardTrace tq = forward(pooled, x);
        auto dist = [&](const Network& net, const ForwardTrace& t, VisMethod m) {
            Tensor a = detail::unit_or_zero(backward(net, t, k1, m).raw);
            Tensor b = detail::unit_or_zero(backward(net, t, k2, m).raw);
            return l2_norm(sub(a, b));
        };
        rows[i] = {dist(plain, tp, VisMethod::Saliency), dist(plain, tp, VisMethod::GBP),
                   dist(pooled, tq, VisMethod::DeconvNet), k1, k2};
    });
    double ms = 0, mg = 0, md = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        res.metrics.add("l2-stats", seed0, "saliency", rows[i].k1, "l2_dist_img" + std::to_string(i), rows[i].sal);
        res.metrics.add("l2-stats", seed0, "gbp", rows[i].k1, "l2_dist_img" + std::to_string(i), rows[i].gbp);
        res.metrics.add("l2-stats", seed0, "deconvnet-pool", rows[i].k1, "l2_dist_img" + std::to_string(i),
                        rows[i].dec_pool);
        ms += rows[i].sal;
        mg += rows[i].gbp;
        md += rows[i].dec_pool;
    }
    res.metrics.add("l2-stats", seed0, "saliency", 0, "mean_l2_dist", ms / batch);
    res.metrics.add("l2-stats", seed0, "gbp", 0, "mean_l2_dist", mg / batch);
    res.metrics.add("l2-stats", seed0, "deconvnet-pool", 0, "mean_l2_dist", md / batch);

    // trained tiny net on its own domain, reported without a gate
    Network trained_net = detail::trained_tiny_cnn(cfg, seed0 + 500);
    Dataset probe = synth_shapes(32, seed0 + 901);
    double ts = 0, tg = 0, td = 0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        std::mt19937_64 pick(seed0 + 104729 * (i + 1));
        const std::size_t k1 = pick() % 4;
        std::size_t k2 = pick() % 4;
        while (k2 == k1) k2 = pick() % 4;
        Tensor x = probe.image(i);
        ForwardTrace t = forward(trained_net, x);
        auto dist = [&](VisMethod m) {
            Tensor a = detail::unit_or_zero(backward(trained_net, t, k1, m).raw);
            Tensor b = detail::unit_or_zero(backward(trained_net, t, k2, m).raw);
            return l2_norm(sub(a, b));
        };
        ts += dist(VisMethod::Saliency);
        tg += dist(VisMethod::GBP);
        td += dist(VisMethod::DeconvNet);
    }
    res.metrics.add("l2-stats", seed0, "trained-saliency", 0, "mean_l2_dist", ts / probe.size());
    res.metrics.add("l2-stats", seed0, "trained-gbp", 0, "mean_l2_dist", tg / probe.size());
    res.metrics.add("l2-stats", seed0, "trained-deconvnet", 0, "mean_l2_dist", td / probe.size());
    (void)out_dir;
}

inline void fgsm_run(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const double eps = cfg.get_num("epsilon", 0.1);
    const std::size_t batch = cfg.get_count("batch", 64);
    res.seeds = {seed0};

    Network net = detail::trained_tiny_cnn(cfg, seed0);
    Dataset held = synth_shapes(batch, seed0 + 31);  // disjoint seed from the training set

    std::size_t flips = 0;
    double ds = 0, dg = 0, dd = 0;
    for (std::size_t i = 0; i < held.size(); ++i) {
        Tensor x = held.image(i);
        Tensor adv = fgsm(net, x, held.labels[i], eps);
        ForwardTrace tc = forward(net, x);
        ForwardTrace ta = forward(net, adv);
        const std::size_t pc = argmax(tc.logits), pa = argmax(ta.logits);
        if (pc != pa) ++flips;
        auto change = [&](VisMethod m) {
            Tensor a = detail::unit_or_zero(backward(net, tc, pc, m).raw);
            Tensor b = detail::unit_or_zero(backward(net, ta, pa, m).raw);
            return l2_norm(sub(a, b));
        };
        ds += change(VisMethod::Saliency);
        dg += change(VisMethod::GBP);
        dd += change(VisMethod::DeconvNet);
        if (i == 0) {
            write_image(x, out_dir + "/fgsm_clean.pgm");
            write_image(adv, out_dir + "/fgsm_adv.pgm");
            write_image(detail::map_as_image(backward(net, tc, pc, VisMethod::GBP).map, {32, 32, 1}),
                        out_dir + "/fgsm_clean_gbp.pgm");
            write_image(detail::map_as_image(backward(net, ta, pa, VisMethod::GBP).map, {32, 32, 1}),
                        out_dir + "/fgsm_adv_gbp.pgm");
        }
    }
    const double n = static_cast<double>(held.size());
    res.metrics.add("fgsm", seed0, "all", 0, "flip_rate", flips / n);
    res.metrics.add("fgsm", seed0, "saliency", 0, "mean_map_l2_change", ds / n);
    res.metrics.add("fgsm", seed0, "gbp", 0, "mean_map_l2_change", dg / n);
    res.metrics.add("fgsm", seed0, "deconvnet", 0, "mean_map_l2_change", dd / n);
    res.metrics.add("fgsm", seed0, "all", 0, "epsilon", eps);
}

inline void splice(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const std::size_t k = cfg.get_count("target_logit", 0);
    res.seeds = {seed0};

    Dataset data;
    Network trained_net = detail::trained_tiny_cnn(cfg, seed0, &data);
    Network random_net = build(trained_net.specs, trained_net.input_shape, RngSpec::truncated(seed0 + 77, 0.0, 0.1));
    Tensor x = data.image(2);
    write_image(x, out_dir + "/splice_input.pgm");

    Tensor ref = backward(trained_net, forward(trained_net, x), k, VisMethod::GBP).raw;
    auto emit = [&](const Network& net, const std::string& tag) {
        Tensor raw = backward(net, forward(net, x), k, VisMethod::GBP).raw;
        write_image(detail::map_as_image(raw, {32, 32, 1}), out_dir + "/splice_" + tag + "_gbp.pgm");
        res.metrics.add("splice", seed0, tag, k, "cos_vs_trained_gbp", cosine_similarity(raw, ref));
        res.metrics.add("splice", seed0, tag, k, "cos_vs_input", cosine_similarity(raw, x));
    };
    for (std::size_t l = 0; l < trained_net.specs.size(); ++l) {
        if (!trained_net.specs[l].has_params()) continue;
        emit(splice_weights(trained_net, random_net, SpliceMode::UpTo, l), "upto" + std::to_string(l));
        emit(splice_weights(trained_net, random_net, SpliceMode::ExceptFor, l), "except" + std::to_string(l));
    }
}

inline void edge_detector(const ExperimentConfig& cfg, const std::string& out_dir, RunResult& res) {
    const std::uint64_t seed0 = cfg.get_count("seed", 0);
    const std::size_t k = cfg.get_count("target_logit", 0);
    res.seeds = {seed0};

    Dataset data;
    Network net = detail::trained_tiny_cnn(cfg, seed0, &data);
    Tensor img = cfg.has("image") ? detail::desk_image(cfg.get("image", ""), 32, 32, 1) : data.image(1);
    write_image(img, out_dir + "/edge_input.pgm");

    Tensor detector = left_difference(img);
    write_image(detector, out_dir + "/edge_detector.pgm");
    Tensor gbp = backward(net, forward(net, img), k, VisMethod::GBP).raw;
    write_image(detail::map_as_image(gbp, {32, 32, 1}), out_dir + "/edge_gbp.pgm");

    res.metrics.add("edge-detector", seed0, "gbp", k, "cos_vs_detector", cosine_similarity(gbp, detector));
    res.metrics.add("edge-detector", seed0, "gbp", k, "cos_vs_input", cosine_similarity(gbp, img));
    res.metrics.add("edge-detector", seed0, "detector", k, "l2_norm", l2_norm(detector));
}

}  // namespace runners

/// Dispatch an experiment id: writes metrics.csv, map images, and a manifest
/// (config echo + seeds + engine version) into out_dir. Deterministic given
/// the config; reruns produce byte-identical CSV.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    detail::allowed_keys(cfg.experiment);  // validates the id, listing the registry on error
    detail::check_keys(cfg);
    std::filesystem::create_directories(out_dir);

    RunResult res;
    if (cfg.experiment == "cnn-vs-fcn")
        runners::cnn_vs_fcn(cfg, out_dir, res);
    else if (cfg.experiment == "filters-sweep")
        runners::filters_sweep(cfg, out_dir, res);
    else if (cfg.experiment == "maxpool")
        runners::maxpool(cfg, out_dir, res);
    else if (cfg.experiment == "depth")
        runners::depth(cfg, out_dir, res);
    else if (cfg.experiment == "l2-stats")
        runners::l2_stats(cfg, out_dir, res);
    else if (cfg.experiment == "fgsm")
        runners::fgsm_run(cfg, out_dir, res);
    else if (cfg.experiment == "splice")
        runners::splice(cfg, out_dir, res);
    else if (cfg.experiment == "edge-detector")
        runners::edge_detector(cfg, out_dir, res);

    res.metrics.write(out_dir + "/metrics.csv");
    detail::write_manifest(cfg, out_dir, res.seeds);
    return res;
}

}  // namespace backvis
