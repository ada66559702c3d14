#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sfada/experiments.hpp"
#include "sfada/synthgen.hpp"

using namespace sfada;

namespace {

Dataset cache_domain(int n, uint64_t seed) {
    SynthConfig cfg;
    cfg.name = "cache_src";
    cfg.n_samples = n;
    cfg.height = cfg.width = 16;
    cfg.blob_radius_min = 3.0;
    cfg.blob_radius_max = 5.0;
    cfg.seed = seed;
    return generate_domain(cfg);
}

AdaptationConfig tiny_base() {
    AdaptationConfig cfg;
    cfg.budget_percent = 40.0;
    cfg.k = 2;
    cfg.pool_k = 4;
    cfg.source_iters = 6;
    cfg.stage1_iters = 4;
    cfg.stage3_iters = 4;
    cfg.batch_size = 4;
    cfg.val_cadence = 3;
    return cfg;
}

ExperimentConfig tiny_experiment(const std::filesystem::path& dir) {
    ExperimentConfig cfg;
    cfg.base = tiny_base();
    cfg.data.n_source = 20;
    cfg.data.n_target = 16;
    cfg.data.height = cfg.data.width = 16;
    cfg.seeds = {1, 2};
    cfg.strategies = {"random", "stdr"};
    cfg.out_dir = dir;
    return cfg;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("content hashing matches the reference fnv1a vectors") {
    CHECK(fnv1a("", 0) == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar", 6) == 0x85944171f73967e8ull);

    const std::filesystem::path file =
        std::filesystem::temp_directory_path() / "sfada_fnv_test.bin";
    std::ofstream(file, std::ios::binary) << "foobar";
    CHECK(fnv1a_file(file) == 0x85944171f73967e8ull);
    std::filesystem::remove(file);
    CHECK_THROWS_AS(fnv1a_file(file), DataError);
}

TEST_CASE("dataset fingerprints track every content change") {
    const Dataset a = cache_domain(4, 3);
    Dataset b = cache_domain(4, 3);
    CHECK(dataset_fingerprint(a) == dataset_fingerprint(b));

    b.samples[1].image.pixels[5] += 1e-9;
    CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));

    b = a;
    b.samples[2].id += "x";
    CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));

    b = a;
    b.samples[0].truth.reset();
    CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));

    b = a;
    b.name += "2";
    CHECK(dataset_fingerprint(a) != dataset_fingerprint(b));
}

TEST_CASE("experiment configs are validated") {
    const std::filesystem::path dir = fresh_dir("sfada_cfg_test");
    CHECK_NOTHROW(validate(tiny_experiment(dir)));
    auto broken = [&](auto&& tweak) {
        ExperimentConfig cfg = tiny_experiment(dir);
        tweak(cfg);
        CHECK_THROWS_AS(validate(cfg), UsageError);
    };
    broken([](ExperimentConfig& c) { c.seeds.clear(); });
    broken([](ExperimentConfig& c) { c.strategies.clear(); });
    broken([](ExperimentConfig& c) { c.strategies = {"psychic"}; });
    broken([](ExperimentConfig& c) { c.sweep_budgets.clear(); });
    broken([](ExperimentConfig& c) { c.sweep_budgets = {0.0}; });
    broken([](ExperimentConfig& c) { c.out_dir.clear(); });
    broken([](ExperimentConfig& c) { c.base.batch_size = 0; });
    broken([](ExperimentConfig& c) { c.data.n_source = 0; });
}

TEST_CASE("source checkpoints are cached, verified, and invalidated") {
    const Dataset source = cache_domain(20, 5);
    AdaptationConfig cfg = tiny_base();
    cfg.seed = 4;
    const std::filesystem::path dir = fresh_dir("sfada_cache_test");

    const CachedSource fresh = cached_source_phase(source, cfg, dir);
    CHECK(!fresh.from_cache);
    const CachedSource again = cached_source_phase(source, cfg, dir);
    CHECK(again.from_cache);
    CHECK(again.params.flat == fresh.params.flat);
    CHECK(again.refs.centroids == fresh.refs.centroids);
    CHECK(again.best_val_dsc == fresh.best_val_dsc);
    CHECK(again.best_iteration == fresh.best_iteration);
    CHECK(again.source_test.dsc_mean == fresh.source_test.dsc_mean);

    // refresh bypasses the cache but must land on the same result.
    const CachedSource forced = cached_source_phase(source, cfg, dir, true);
    CHECK(!forced.from_cache);
    CHECK(forced.params.flat == fresh.params.flat);

    // A changed training knob is a different key.
    AdaptationConfig longer = cfg;
    longer.source_iters = 7;
    CHECK(!cached_source_phase(source, longer, dir).from_cache);

    // Corrupting an artifact fails its checksum and triggers recompute.
    const std::filesystem::path ckpt =
        dir / (source.name + "_seed" + std::to_string(cfg.seed)) / "source.ckpt";
    std::fstream f(ckpt, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(32);
    f.put('\x7f');
    f.close();
    const CachedSource healed = cached_source_phase(source, cfg, dir);
    CHECK(!healed.from_cache);
    CHECK(healed.params.flat == fresh.params.flat);
    CHECK(cached_source_phase(source, cfg, dir).from_cache);
    std::filesystem::remove_all(dir);
}

TEST_CASE("the benchmark matrix covers every strategy and writes stable files") {
    const std::filesystem::path dir = fresh_dir("sfada_matrix_test");
    const ExperimentConfig cfg = tiny_experiment(dir);
    const MatrixResult result = run_matrix(cfg);

    // 3 domains x 2 seeds; (source_only + random + stdr + stdr_semi) x 2 targets x 2 seeds;
    // 3 stages x 2 targets x 2 seeds.
    CHECK(result.transfer.size() == 6);
    CHECK(result.strategies.size() == 16);
    CHECK(result.ablation.size() == 12);
    for (const OutcomeRow& r : result.strategies) {
        if (r.label == "source_only")
            CHECK(r.labels == 0);
        else
            CHECK(r.labels == 4);  // 40% of the 11-sample target train split
        CHECK(r.metrics.count == 4);
    }

    CHECK(slurp(dir / "transfer.csv").substr(0, 12) == "domain,seed,");
    const std::string strategies_csv = slurp(dir / "strategies.csv");
    CHECK(strategies_csv.substr(0, 28) == "target,strategy,seed,labels,");
    CHECK(strategies_csv.find("stdr_semi") != std::string::npos);
    CHECK(slurp(dir / "ablations.csv").find("stage3") != std::string::npos);
    const std::string summary = slurp(dir / "summary.md");
    CHECK(summary.find("Design intent") != std::string::npos);
    CHECK(summary.find("similarity-guided picks beat a random budget") != std::string::npos);

    // Every manifest hash must match the file it describes.
    const nlohmann::json manifest = nlohmann::json::parse(slurp(dir / "files.json"));
    CHECK(manifest.size() > 5);
    for (const auto& [rel, hash] : manifest.items()) {
        char expected[19];
        std::snprintf(expected, sizeof expected, "0x%016llx",
                      static_cast<unsigned long long>(fnv1a_file(dir / rel)));
        CHECK(hash.get<std::string>() == expected);
    }

    // A second campaign in a fresh directory reproduces the tables byte for
    // byte; one in the same directory reuses the cache and still does.
    const std::filesystem::path dir2 = fresh_dir("sfada_matrix_test2");
    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = dir2;
    run_matrix(cfg2);
    for (const char* name : {"transfer.csv", "strategies.csv", "ablations.csv", "summary.md"})
        CHECK(slurp(dir / name) == slurp(dir2 / name));

    run_matrix(cfg);
    CHECK(slurp(dir / "strategies.csv") == slurp(dir2 / "strategies.csv"));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("the budget sweep spends exactly the asked-for labels") {
    const std::filesystem::path dir = fresh_dir("sfada_sweep_test");
    ExperimentConfig cfg = tiny_experiment(dir);
    cfg.seeds = {3};
    cfg.sweep_budgets = {20.0, 50.0, 100.0};
    const std::vector<OutcomeRow> rows = run_budget_sweep(cfg);

    REQUIRE(rows.size() == 3);
    CHECK(rows[0].target == "targetA");
    CHECK(rows[0].label == "20.00");
    CHECK(rows[2].label == "100.00");
    // Train split holds 11 samples: 20% -> 2, 50% -> 6, 100% -> 11.
    CHECK(rows[0].labels == 2);
    CHECK(rows[1].labels == 6);
    CHECK(rows[2].labels == 11);

    const std::string csv = slurp(dir / "budget_sweep.csv");
    CHECK(csv.substr(0, 34) == "target,budget_percent,seed,labels,");
    CHECK(csv.find("targetA,100.00,3,11,") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "files.json"));
    std::filesystem::remove_all(dir);
}
