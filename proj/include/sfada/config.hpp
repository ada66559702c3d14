#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfada/experiments.hpp"

namespace sfada {

// Every tunable the command line exposes, with the shipped defaults. A value
// is set either in a key=value config file or by a flag; flags win.
struct GlobalConfig {
    int resolution = 64;
    int pool_k = 8;
    int k = 5;
    double budget_percent = 20.0;
    double lr0 = 0.03;
    double decay_power = 0.9;
    int source_iters = 600;
    int stage1_iters = 600;
    int stage3_iters = 600;
    int batch_size = 8;
    int val_cadence = 100;
    uint64_t seed = 1;
    std::string strategy = "stdr";
    bool semi = true;
    double spacing = 1.0;

    // Campaign-only settings, used by the bench subcommand.
    std::string mode = "matrix";  // matrix | sweep | all
    int n_source = 300;
    int n_target = 200;
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::vector<std::string> strategies = {"random", "entropy", "alpha", "beta", "stdr"};
    std::vector<double> sweep_budgets = {10.0, 20.0, 100.0};
    bool refresh_cache = false;
};

// Set one key. Unknown keys and unparseable values raise UsageError naming
// the key, so a typo can never silently change an experiment.
void apply_setting(GlobalConfig& cfg, const std::string& key, const std::string& value);

// key=value lines; '#' starts a comment, blank lines are ignored.
void load_config_file(GlobalConfig& cfg, const std::filesystem::path& file);

// The full configuration as key=value lines in a fixed order. Feeding this
// text back through load_config_file reproduces the configuration, which is
// what makes the printed resolved-config block sufficient to rerun.
std::string config_text(const GlobalConfig& cfg);

AdaptationConfig adaptation_config(const GlobalConfig& cfg);
ExperimentConfig experiment_config(const GlobalConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace sfada
