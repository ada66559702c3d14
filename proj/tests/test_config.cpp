#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sfada/config.hpp"
#include "sfada/errors.hpp"

using namespace sfada;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "sfada_config_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

void write_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file);
    out << text;
}

}  // namespace

TEST_CASE("apply_setting parses every key and rejects junk") {
    GlobalConfig cfg;
    apply_setting(cfg, "resolution", "128");
    CHECK(cfg.resolution == 128);
    apply_setting(cfg, "pool_k", "4");
    CHECK(cfg.pool_k == 4);
    apply_setting(cfg, "k", "7");
    CHECK(cfg.k == 7);
    apply_setting(cfg, "budget_percent", "12.5");
    CHECK(cfg.budget_percent == doctest::Approx(12.5));
    apply_setting(cfg, "lr0", "0.05");
    CHECK(cfg.lr0 == doctest::Approx(0.05));
    apply_setting(cfg, "decay_power", "0.8");
    CHECK(cfg.decay_power == doctest::Approx(0.8));
    apply_setting(cfg, "source_iters", "123");
    CHECK(cfg.source_iters == 123);
    apply_setting(cfg, "stage1_iters", "45");
    CHECK(cfg.stage1_iters == 45);
    apply_setting(cfg, "stage3_iters", "67");
    CHECK(cfg.stage3_iters == 67);
    apply_setting(cfg, "batch_size", "16");
    CHECK(cfg.batch_size == 16);
    apply_setting(cfg, "val_cadence", "50");
    CHECK(cfg.val_cadence == 50);
    apply_setting(cfg, "seed", "99");
    CHECK(cfg.seed == 99);
    apply_setting(cfg, "strategy", "entropy");
    CHECK(cfg.strategy == "entropy");
    apply_setting(cfg, "semi", "false");
    CHECK_FALSE(cfg.semi);
    apply_setting(cfg, "semi", "1");
    CHECK(cfg.semi);
    apply_setting(cfg, "spacing", "2.0");
    CHECK(cfg.spacing == doctest::Approx(2.0));
    apply_setting(cfg, "mode", "sweep");
    CHECK(cfg.mode == "sweep");
    apply_setting(cfg, "n_source", "42");
    CHECK(cfg.n_source == 42);
    apply_setting(cfg, "n_target", "24");
    CHECK(cfg.n_target == 24);
    apply_setting(cfg, "seeds", "4,5,6");
    CHECK(cfg.seeds == std::vector<uint64_t>{4, 5, 6});
    apply_setting(cfg, "strategies", "random,stdr");
    CHECK(cfg.strategies == std::vector<std::string>{"random", "stdr"});
    apply_setting(cfg, "sweep_budgets", "10,50");
    REQUIRE(cfg.sweep_budgets.size() == 2);
    CHECK(cfg.sweep_budgets[1] == doctest::Approx(50.0));
    apply_setting(cfg, "refresh_cache", "yes");
    CHECK(cfg.refresh_cache);

    CHECK_THROWS_WITH_AS(apply_setting(cfg, "resolutionn", "32"),
                         doctest::Contains("resolutionn"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "resolution", "abc"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "resolution", "32x"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "lr0", ""), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "semi", "maybe"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "mode", "bogus"), UsageError);
    CHECK_THROWS_AS(apply_setting(cfg, "seeds", "1,,2"), UsageError);
}

TEST_CASE("config files ignore comments and report bad lines") {
    const std::filesystem::path file = temp_file("basic.cfg");
    write_file(file,
               "# campaign setup\n"
               "resolution = 48\n"
               "\n"
               "seeds=7,8\n"
               "strategy=alpha\n");
    GlobalConfig cfg;
    load_config_file(cfg, file);
    CHECK(cfg.resolution == 48);
    CHECK(cfg.seeds == std::vector<uint64_t>{7, 8});
    CHECK(cfg.strategy == "alpha");
    CHECK(cfg.batch_size == GlobalConfig{}.batch_size);

    const std::filesystem::path broken = temp_file("broken.cfg");
    write_file(broken, "resolution=48\nnot a setting\n");
    GlobalConfig cfg2;
    CHECK_THROWS_WITH_AS(load_config_file(cfg2, broken), doctest::Contains("line 2"),
                         UsageError);

    GlobalConfig cfg3;
    CHECK_THROWS_AS(load_config_file(cfg3, temp_file("missing.cfg")), DataError);
}

TEST_CASE("config text round trips through the parser") {
    GlobalConfig cfg;
    cfg.resolution = 32;
    cfg.budget_percent = 37.5;
    cfg.semi = false;
    cfg.seeds = {11, 12};
    cfg.strategies = {"stdr"};
    cfg.sweep_budgets = {5, 95.5};
    cfg.mode = "all";
    cfg.refresh_cache = true;

    const std::filesystem::path file = temp_file("round.cfg");
    write_file(file, config_text(cfg));
    GlobalConfig back;
    load_config_file(back, file);
    CHECK(back.resolution == cfg.resolution);
    CHECK(back.budget_percent == doctest::Approx(cfg.budget_percent));
    CHECK(back.semi == cfg.semi);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.strategies == cfg.strategies);
    CHECK(back.sweep_budgets.size() == 2);
    CHECK(back.sweep_budgets[1] == doctest::Approx(95.5));
    CHECK(back.mode == cfg.mode);
    CHECK(back.refresh_cache == cfg.refresh_cache);
}

TEST_CASE("derived configs mirror the global settings") {
    GlobalConfig cfg;
    cfg.budget_percent = 15;
    cfg.k = 4;
    cfg.pool_k = 16;
    cfg.source_iters = 321;
    cfg.stage1_iters = 222;
    cfg.stage3_iters = 111;
    cfg.seed = 5;
    cfg.strategy = "beta";
    cfg.semi = false;
    cfg.spacing = 1.5;

    const AdaptationConfig acfg = adaptation_config(cfg);
    CHECK(acfg.budget_percent == doctest::Approx(15.0));
    CHECK(acfg.k == 4);
    CHECK(acfg.pool_k == 16);
    CHECK(acfg.source_iters == 321);
    CHECK(acfg.stage1_iters == 222);
    CHECK(acfg.stage3_iters == 111);
    CHECK(acfg.seed == 5);
    CHECK(acfg.strategy == "beta");
    CHECK_FALSE(acfg.semi_enabled);
    CHECK(acfg.spacing == doctest::Approx(1.5));

    cfg.seeds = {3, 4};
    cfg.n_source = 30;
    cfg.n_target = 20;
    cfg.resolution = 32;
    const ExperimentConfig ecfg = experiment_config(cfg, "some/dir");
    CHECK(ecfg.base.seed == acfg.seed);
    CHECK(ecfg.seeds == cfg.seeds);
    CHECK(ecfg.data.n_source == 30);
    CHECK(ecfg.data.n_target == 20);
    CHECK(ecfg.data.height == 32);
    CHECK(ecfg.out_dir == std::filesystem::path("some/dir"));
}
