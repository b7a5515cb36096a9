#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "backvis/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"backpropagation-visualization experiment runner"};
    app.footer("experiments: cnn-vs-fcn filters-sweep maxpool depth l2-stats fgsm splice edge-detector");

    std::string experiment, config_path, out_dir;
    std::int64_t seed = -1;
    app.add_option("experiment", experiment, "experiment id from the registry")->required();
    app.add_option("--config", config_path, "line-oriented `key = value` config file");
    app.add_option("--out", out_dir, "output directory (default: $BACKVIS_OUT or ./backvis-out)");
    app.add_option("--seed", seed, "override the config's base seed");
    CLI11_PARSE(app, argc, argv);

    if (out_dir.empty()) {
        const char* env = std::getenv("BACKVIS_OUT");
        out_dir = env && *env ? env : "backvis-out";
    }

    try {
        backvis::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = backvis::load_config(config_path);
        cfg.experiment = experiment;
        if (seed >= 0) cfg.values["seed"] = std::to_string(seed);
        backvis::RunResult res = backvis::run_experiment(cfg, out_dir);
        std::cout << experiment << ": " << res.metrics.rows.size() << " metric rows -> " << out_dir << "/metrics.csv\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
