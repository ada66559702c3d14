#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfada/pipeline.hpp"
#include "sfada/synthgen.hpp"

namespace sfada {

// One benchmark campaign: regenerate the three domains per seed, adapt with
// each strategy, compare on the held-out target test splits.
struct ExperimentConfig {
    AdaptationConfig base;           // per-seed runs override base.seed and strategy
    BenchmarkSpec data;
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::vector<std::string> strategies = {"random", "entropy", "alpha", "beta", "stdr"};
    std::vector<double> sweep_budgets = {10.0, 20.0, 100.0};
    std::filesystem::path out_dir = "runs";
    bool refresh_cache = false;      // recompute source checkpoints even when cached
};

void validate(const ExperimentConfig& cfg);

// FNV-1a over raw bytes; the hash used in cache metadata and file manifests.
uint64_t fnv1a(const void* data, size_t n);
uint64_t fnv1a_file(const std::filesystem::path& file);

struct CachedSource {
    SegmenterParams params;
    ReferenceSet refs;
    double best_val_dsc = 0.0;
    int best_iteration = 0;
    AggregateMetrics source_test;    // per_sample left empty when loaded from cache
    bool from_cache = false;
};

// Content hash of everything that defines a dataset: name, ids, pixels,
// truth masks.
uint64_t dataset_fingerprint(const Dataset& ds);

// Source phase memoized on disk under cache_dir, keyed by the dataset
// fingerprint plus every training knob that can change the result. Stored
// artifacts carry checksums; any mismatch or key change recomputes.
CachedSource cached_source_phase(const Dataset& source_ds, const AdaptationConfig& cfg,
                                 const std::filesystem::path& cache_dir, bool refresh = false);

// One evaluated checkpoint on one target test split.
struct OutcomeRow {
    std::string target;
    std::string label;   // strategy name, domain name, or checkpoint stage
    uint64_t seed = 0;
    size_t labels = 0;   // target truth masks revealed to reach this row
    AggregateMetrics metrics;
};

struct MatrixResult {
    std::vector<OutcomeRow> transfer;    // source-model DSC across domains
    std::vector<OutcomeRow> strategies;  // per selection strategy
    std::vector<OutcomeRow> ablation;    // per adaptation stage, dual-selection runs
};

// Full campaign. Writes transfer.csv, strategies.csv, ablations.csv,
// summary.md, and files.json (path -> content hash) under out_dir.
MatrixResult run_matrix(const ExperimentConfig& cfg);

// Dual selection at each budget, first-stage fine-tuning only, moderate-shift
// target. Writes budget_sweep.csv and updates files.json under out_dir.
std::vector<OutcomeRow> run_budget_sweep(const ExperimentConfig& cfg);

}  // namespace sfada
