#include "sfada/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "sfada/config.hpp"
#include "sfada/dataset_io.hpp"
#include "sfada/pipeline.hpp"
#include "sfada/transforms.hpp"

namespace sfada {
namespace {

// SFADA_OUT_DIR relocates default outputs; explicit --out always wins.
std::filesystem::path default_out(const std::string& leaf) {
    if (const char* env = std::getenv("SFADA_OUT_DIR"); env && *env)
        return std::filesystem::path(env) / leaf;
    return leaf;
}

void print_resolved(const std::string& subcommand, const GlobalConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& paths) {
    std::printf("# resolved configuration (rerun: sfada %s with these settings)\n",
                subcommand.c_str());
    std::printf("subcommand=%s\n", subcommand.c_str());
    for (const auto& [key, value] : paths) std::printf("%s=%s\n", key.c_str(), value.c_str());
    std::fputs(config_text(cfg).c_str(), stdout);
    std::printf("# end configuration\n");
}

// Settings land in this order: defaults, then the config file, then any flag
// the user actually passed (checked via Option::count after parsing).
struct ConfigLayers {
    std::string config_file;
    GlobalConfig flags;  // receives flag values parsed by CLI11
};

void add_config_flag(CLI::App* sub, ConfigLayers& layers) {
    sub->add_option("-c,--config", layers.config_file,
                    "key=value config file applied before flags");
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    out << text;
}

std::string metrics_line(const char* label, const AggregateMetrics& m) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%-12s DSC %6.2f +- %5.2f | HD95 %6.2f | ASD %6.2f | n=%zu undef=%zu", label,
                  m.dsc_mean, m.dsc_std, m.hd95_mean, m.asd_mean, m.count, m.undefined_count);
    return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Source-free active domain adaptation toolkit for binary segmentation"};
    app.require_subcommand(1);

    // ---- synth ----------------------------------------------------------
    struct SynthArgs {
        ConfigLayers layers;
        std::string out;
        std::string name = "synthetic";
        int n = 100;
        bool benchmark = false;
        DomainStyle style;
    } synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset directory");
    add_config_flag(synth_cmd, synth.layers);
    synth_cmd->add_option("--out", synth.out, "output dataset directory");
    synth_cmd->add_option("--name", synth.name, "dataset name and id prefix");
    synth_cmd->add_option("--n", synth.n, "sample count (single-domain mode)");
    synth_cmd->add_flag("--benchmark", synth.benchmark,
                        "write the three-domain benchmark (source, targetA, targetB)");
    auto* synth_seed = synth_cmd->add_option("--seed", synth.layers.flags.seed, "generation seed");
    auto* synth_res =
        synth_cmd->add_option("--resolution", synth.layers.flags.resolution, "image side length");
    auto* synth_nsrc =
        synth_cmd->add_option("--n-source", synth.layers.flags.n_source, "benchmark source size");
    auto* synth_ntgt =
        synth_cmd->add_option("--n-target", synth.layers.flags.n_target, "benchmark target size");
    synth_cmd->add_option("--gain", synth.style.gain, "style: intensity gain");
    synth_cmd->add_option("--bias", synth.style.bias, "style: intensity offset");
    synth_cmd->add_option("--gamma", synth.style.gamma, "style: contrast exponent");
    synth_cmd->add_option("--noise", synth.style.noise_sigma, "style: additive noise sigma");
    synth_cmd->add_option("--blur", synth.style.blur_radius, "style: box blur radius");
    synth_cmd->add_option("--freq", synth.style.texture_freq, "style: background texture cells");

    // ---- train-source ---------------------------------------------------
    struct TrainArgs {
        ConfigLayers layers;
        std::string data;
        std::string out;
    } tr;
    CLI::App* train_cmd = app.add_subcommand(
        "train-source", "Train on a labeled source dataset and fit the reference set");
    add_config_flag(train_cmd, tr.layers);
    train_cmd->add_option("--data", tr.data, "source dataset directory")->required();
    train_cmd->add_option("--out", tr.out, "output directory");
    auto* tr_seed = train_cmd->add_option("--seed", tr.layers.flags.seed, "training seed");
    auto* tr_iters =
        train_cmd->add_option("--iters", tr.layers.flags.source_iters, "SGD iterations");
    auto* tr_batch = train_cmd->add_option("--batch", tr.layers.flags.batch_size, "batch size");
    auto* tr_lr = train_cmd->add_option("--lr0", tr.layers.flags.lr0, "initial learning rate");
    auto* tr_decay =
        train_cmd->add_option("--decay-power", tr.layers.flags.decay_power, "LR decay power");
    auto* tr_cad = train_cmd->add_option("--val-cadence", tr.layers.flags.val_cadence,
                                         "iterations between validation passes");
    auto* tr_poolk = train_cmd->add_option("--pool-k", tr.layers.flags.pool_k,
                                           "projection pooling kernel");
    auto* tr_k = train_cmd->add_option("--k", tr.layers.flags.k, "reference centroid count");

    // ---- project --------------------------------------------------------
    struct ProjectArgs {
        ConfigLayers layers;
        std::string ckpt, data, out;
    } pr;
    CLI::App* project_cmd =
        app.add_subcommand("project", "Project a dataset into reference space, write a CSV");
    add_config_flag(project_cmd, pr.layers);
    project_cmd->add_option("--ckpt", pr.ckpt, "segmenter checkpoint")->required();
    project_cmd->add_option("--data", pr.data, "dataset directory")->required();
    project_cmd->add_option("--out", pr.out, "output CSV file");
    auto* pr_poolk =
        project_cmd->add_option("--pool-k", pr.layers.flags.pool_k, "pooling kernel");

    // ---- select ---------------------------------------------------------
    struct SelectArgs {
        ConfigLayers layers;
        std::string ckpt, refs, data, out;
    } se;
    CLI::App* select_cmd =
        app.add_subcommand("select", "Choose the annotation set for a target dataset");
    add_config_flag(select_cmd, se.layers);
    select_cmd->add_option("--ckpt", se.ckpt, "segmenter checkpoint")->required();
    select_cmd->add_option("--refs", se.refs, "reference set file (needed by stdr/alpha/beta)");
    select_cmd->add_option("--data", se.data, "target dataset directory")->required();
    select_cmd->add_option("--out", se.out, "output manifest file");
    auto* se_strategy =
        select_cmd->add_option("--strategy", se.layers.flags.strategy, "selection strategy");
    auto* se_budget = select_cmd->add_option("--budget", se.layers.flags.budget_percent,
                                             "annotation budget percent");
    auto* se_seed = select_cmd->add_option("--seed", se.layers.flags.seed, "selection seed");
    auto* se_poolk =
        select_cmd->add_option("--pool-k", se.layers.flags.pool_k, "pooling kernel");

    // ---- adapt ----------------------------------------------------------
    struct AdaptArgs {
        ConfigLayers layers;
        std::string source_ckpt, refs, target_dir, out;
    } ad;
    CLI::App* adapt_cmd = app.add_subcommand(
        "adapt", "Run selection and staged fine-tuning against a target dataset");
    add_config_flag(adapt_cmd, ad.layers);
    adapt_cmd->add_option("--source-ckpt", ad.source_ckpt, "frozen source checkpoint")
        ->required();
    adapt_cmd->add_option("--refs", ad.refs, "reference set file")->required();
    adapt_cmd->add_option("--target-dir", ad.target_dir, "target dataset directory")->required();
    adapt_cmd->add_option("--out", ad.out, "output run directory");
    auto* ad_strategy =
        adapt_cmd->add_option("--strategy", ad.layers.flags.strategy, "selection strategy");
    auto* ad_budget = adapt_cmd->add_option("--budget", ad.layers.flags.budget_percent,
                                            "annotation budget percent");
    auto* ad_semi = adapt_cmd->add_option("--semi", ad.layers.flags.semi,
                                          "run the pseudo-label and joint stages (0/1)");
    auto* ad_seed = adapt_cmd->add_option("--seed", ad.layers.flags.seed, "run seed");
    auto* ad_s1 = adapt_cmd->add_option("--stage1-iters", ad.layers.flags.stage1_iters,
                                        "first-stage iterations");
    auto* ad_s3 = adapt_cmd->add_option("--stage3-iters", ad.layers.flags.stage3_iters,
                                        "joint-stage iterations");
    auto* ad_poolk =
        adapt_cmd->add_option("--pool-k", ad.layers.flags.pool_k, "pooling kernel");

    // ---- eval -----------------------------------------------------------
    struct EvalArgs {
        ConfigLayers layers;
        std::string pred, truth, out;
    } ev;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "Compare two mask directories and write the metrics CSV");
    add_config_flag(eval_cmd, ev.layers);
    eval_cmd->add_option("--pred", ev.pred, "predicted mask directory")->required();
    eval_cmd->add_option("--truth", ev.truth, "reference mask directory")->required();
    eval_cmd->add_option("--out", ev.out, "output CSV file");
    auto* ev_spacing =
        eval_cmd->add_option("--spacing", ev.layers.flags.spacing, "pixel spacing");

    // ---- bench ----------------------------------------------------------
    struct BenchArgs {
        ConfigLayers layers;
        std::string out;
        std::string mode;
        bool refresh = false;
    } be;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "Run the benchmark campaign from a config file");
    add_config_flag(bench_cmd, be.layers);
    bench_cmd->add_option("--out", be.out, "campaign output directory");
    bench_cmd->add_option("--mode", be.mode, "matrix | sweep | all (overrides config)");
    bench_cmd->add_flag("--refresh", be.refresh, "ignore cached source checkpoints");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*synth_cmd) {
            GlobalConfig cfg;
            if (!synth.layers.config_file.empty())
                load_config_file(cfg, synth.layers.config_file);
            if (synth_seed->count()) cfg.seed = synth.layers.flags.seed;
            if (synth_res->count()) cfg.resolution = synth.layers.flags.resolution;
            if (synth_nsrc->count()) cfg.n_source = synth.layers.flags.n_source;
            if (synth_ntgt->count()) cfg.n_target = synth.layers.flags.n_target;
            const std::filesystem::path out =
                synth.out.empty() ? default_out(synth.benchmark ? "benchmark_data" : "synth_data")
                                  : std::filesystem::path(synth.out);
            print_resolved("synth", cfg,
                           {{"out", out.string()},
                            {"benchmark_mode", synth.benchmark ? "1" : "0"},
                            {"name", synth.name},
                            {"n", std::to_string(synth.n)}});
            if (synth.benchmark) {
                BenchmarkSpec spec{cfg.n_source, cfg.n_target, cfg.resolution, cfg.resolution};
                const BenchmarkData data = benchmark_data(cfg.seed, spec);
                write_dataset(data.source, out / "source");
                write_dataset(data.targetA, out / "targetA");
                write_dataset(data.targetB, out / "targetB");
                std::printf("wrote %zu + %zu + %zu samples under %s\n", data.source.size(),
                            data.targetA.size(), data.targetB.size(), out.string().c_str());
            } else {
                SynthConfig sc;
                sc.name = synth.name;
                sc.n_samples = synth.n;
                sc.height = sc.width = cfg.resolution;
                sc.style = synth.style;
                sc.seed = cfg.seed;
                scale_blob_radii(sc);
                const Dataset ds = generate_domain(sc);
                write_dataset(ds, out);
                std::printf("wrote %zu samples to %s\n", ds.size(), out.string().c_str());
            }
            return 0;
        }

        if (*train_cmd) {
            GlobalConfig cfg;
            if (!tr.layers.config_file.empty()) load_config_file(cfg, tr.layers.config_file);
            if (tr_seed->count()) cfg.seed = tr.layers.flags.seed;
            if (tr_iters->count()) cfg.source_iters = tr.layers.flags.source_iters;
            if (tr_batch->count()) cfg.batch_size = tr.layers.flags.batch_size;
            if (tr_lr->count()) cfg.lr0 = tr.layers.flags.lr0;
            if (tr_decay->count()) cfg.decay_power = tr.layers.flags.decay_power;
            if (tr_cad->count()) cfg.val_cadence = tr.layers.flags.val_cadence;
            if (tr_poolk->count()) cfg.pool_k = tr.layers.flags.pool_k;
            if (tr_k->count()) cfg.k = tr.layers.flags.k;
            const std::filesystem::path out =
                tr.out.empty() ? default_out("source_run") : std::filesystem::path(tr.out);
            print_resolved("train-source", cfg, {{"data", tr.data}, {"out", out.string()}});

            const Dataset source_ds = load_dataset(tr.data);
            const SourcePhaseResult phase = run_source_phase(source_ds, adaptation_config(cfg));
            const AggregateMetrics test =
                evaluate_on(phase.params, phase.split.test, cfg.spacing);

            std::filesystem::create_directories(out);
            save_checkpoint(phase.params, out / "source.ckpt");
            save_reference(phase.refs, out / "refs.csv");
            {
                std::string csv = "iteration,loss\n";
                for (size_t i = 0; i < phase.loss_trace.size(); ++i) {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, phase.loss_trace[i]);
                    csv += buf;
                }
                write_text(out / "loss_trace.csv", csv);
            }
            {
                std::string csv = "iteration,val_dsc\n";
                for (const auto& [it, d] : phase.val_dsc_trace) {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%d,%.6f\n", it, d);
                    csv += buf;
                }
                write_text(out / "val_trace.csv", csv);
            }
            write_metrics_csv({{"source_test", test}}, out / "metrics.csv");
            {
                char buf[256];
                std::snprintf(buf, sizeof buf,
                              "{\n  \"best_val_dsc\": %.6f,\n  \"best_iteration\": %d,\n"
                              "  \"train_seconds\": %.3f\n}\n",
                              phase.best_val_dsc, phase.best_iteration, phase.seconds);
                write_text(out / "source_phase.json", buf);
            }
            std::printf("%s\n", metrics_line("source_test", test).c_str());
            std::printf("best validation DSC %.2f at iteration %d; artifacts in %s\n",
                        phase.best_val_dsc, phase.best_iteration, out.string().c_str());
            return 0;
        }

        if (*project_cmd) {
            GlobalConfig cfg;
            if (!pr.layers.config_file.empty()) load_config_file(cfg, pr.layers.config_file);
            if (pr_poolk->count()) cfg.pool_k = pr.layers.flags.pool_k;
            const std::filesystem::path out =
                pr.out.empty() ? default_out("latents.csv") : std::filesystem::path(pr.out);
            print_resolved("project", cfg,
                           {{"ckpt", pr.ckpt}, {"data", pr.data}, {"out", out.string()}});
            const SegmenterParams params = load_checkpoint(pr.ckpt);
            const Dataset ds = normalize_dataset(load_dataset(pr.data));
            const std::vector<LatentVector> vectors = project_dataset(params, ds, cfg.pool_k);
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            write_latent_csv(vectors, out);
            size_t valid = 0;
            for (const auto& v : vectors) valid += v.valid;
            std::printf("projected %zu samples (%zu valid) to %s\n", vectors.size(), valid,
                        out.string().c_str());
            return 0;
        }

        if (*select_cmd) {
            GlobalConfig cfg;
            if (!se.layers.config_file.empty()) load_config_file(cfg, se.layers.config_file);
            if (se_strategy->count()) cfg.strategy = se.layers.flags.strategy;
            if (se_budget->count()) cfg.budget_percent = se.layers.flags.budget_percent;
            if (se_seed->count()) cfg.seed = se.layers.flags.seed;
            if (se_poolk->count()) cfg.pool_k = se.layers.flags.pool_k;
            const std::filesystem::path out =
                se.out.empty() ? default_out("manifest.json") : std::filesystem::path(se.out);
            print_resolved("select", cfg,
                           {{"ckpt", se.ckpt},
                            {"refs", se.refs.empty() ? "-" : se.refs},
                            {"data", se.data},
                            {"out", out.string()}});
            const SegmenterParams params = load_checkpoint(se.ckpt);
            std::optional<ReferenceSet> refs;
            if (!se.refs.empty()) refs = load_reference(se.refs);
            const Dataset ds = normalize_dataset(load_dataset(se.data));
            const SelectionManifest manifest =
                run_selection(params, refs ? &*refs : nullptr, ds, adaptation_config(cfg));
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            save_manifest(manifest, out);
            std::printf("selected %zu of %zu samples (%zu invariant + %zu specific) -> %s\n",
                        manifest.all_ids().size(), ds.size(), manifest.invariant_ids.size(),
                        manifest.specific_ids.size(), out.string().c_str());
            return 0;
        }

        if (*adapt_cmd) {
            GlobalConfig cfg;
            if (!ad.layers.config_file.empty()) load_config_file(cfg, ad.layers.config_file);
            if (ad_strategy->count()) cfg.strategy = ad.layers.flags.strategy;
            if (ad_budget->count()) cfg.budget_percent = ad.layers.flags.budget_percent;
            if (ad_semi->count()) cfg.semi = ad.layers.flags.semi;
            if (ad_seed->count()) cfg.seed = ad.layers.flags.seed;
            if (ad_s1->count()) cfg.stage1_iters = ad.layers.flags.stage1_iters;
            if (ad_s3->count()) cfg.stage3_iters = ad.layers.flags.stage3_iters;
            if (ad_poolk->count()) cfg.pool_k = ad.layers.flags.pool_k;
            const std::filesystem::path out =
                ad.out.empty() ? default_out("adapt_run") : std::filesystem::path(ad.out);
            print_resolved("adapt", cfg,
                           {{"source_ckpt", ad.source_ckpt},
                            {"refs", ad.refs},
                            {"target_dir", ad.target_dir},
                            {"out", out.string()}});

            const AdaptationConfig acfg = adaptation_config(cfg);
            RunReport report;
            report.cfg = acfg;
            report.source_params = load_checkpoint(ad.source_ckpt);
            const ReferenceSet refs = load_reference(ad.refs);
            const Dataset target_ds = load_dataset(ad.target_dir);

            SplitSpec spec;
            spec.seed = acfg.seed;
            const SplitResult split = split_dataset(target_ds, spec);
            const AdaptationResult adapted =
                run_adaptation(report.source_params, refs, split.train, acfg);
            report.manifest = adapted.manifest;
            report.labels_revealed = adapted.labels_revealed;
            report.stage1_params = adapted.stage1_params;
            report.stage3_params = adapted.stage3_params;
            report.selection_seconds = adapted.selection_seconds;
            report.stage1_seconds = adapted.stage1_seconds;
            report.stage2_seconds = adapted.stage2_seconds;
            report.stage3_seconds = adapted.stage3_seconds;

            const Dataset test = normalize_dataset(split.test);
            report.source_only = evaluate_on(report.source_params, test, acfg.spacing);
            report.stage1 = evaluate_on(report.stage1_params, test, acfg.spacing);
            if (report.stage3_params)
                report.stage3 = evaluate_on(*report.stage3_params, test, acfg.spacing);

            write_run_report(report, out);
            std::printf("%s\n", metrics_line("source_only", report.source_only).c_str());
            std::printf("%s\n", metrics_line("stage1", report.stage1).c_str());
            if (report.stage3)
                std::printf("%s\n", metrics_line("stage3", *report.stage3).c_str());
            std::printf("revealed %zu labels; report in %s\n", report.labels_revealed,
                        out.string().c_str());
            return 0;
        }

        if (*eval_cmd) {
            GlobalConfig cfg;
            if (!ev.layers.config_file.empty()) load_config_file(cfg, ev.layers.config_file);
            if (ev_spacing->count()) cfg.spacing = ev.layers.flags.spacing;
            const std::filesystem::path out =
                ev.out.empty() ? default_out("metrics.csv") : std::filesystem::path(ev.out);
            print_resolved("eval", cfg,
                           {{"pred", ev.pred}, {"truth", ev.truth}, {"out", out.string()}});

            if (!std::filesystem::is_directory(ev.pred))
                throw DataError("not a directory: " + ev.pred);
            if (!std::filesystem::is_directory(ev.truth))
                throw DataError("not a directory: " + ev.truth);
            std::vector<std::filesystem::path> files;
            for (const auto& entry : std::filesystem::directory_iterator(ev.pred))
                if (entry.is_regular_file() && entry.path().extension() == ".pgm")
                    files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw DataError("no .pgm masks in " + ev.pred);
            std::vector<Mask> preds, truths;
            for (const std::filesystem::path& f : files) {
                const std::filesystem::path match =
                    std::filesystem::path(ev.truth) / f.filename();
                if (!std::filesystem::exists(match))
                    throw DataError("no matching mask for " + f.filename().string() + " in " +
                                    ev.truth);
                preds.push_back(load_mask_pgm(f));
                truths.push_back(load_mask_pgm(match));
            }
            const AggregateMetrics agg = evaluate_dataset(preds, truths, cfg.spacing);
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            write_metrics_csv({{"eval", agg}}, out);
            std::printf("%s\n", metrics_line("eval", agg).c_str());
            std::printf("compared %zu mask pairs; CSV in %s\n", preds.size(),
                        out.string().c_str());
            return 0;
        }

        if (*bench_cmd) {
            GlobalConfig cfg;
            if (!be.layers.config_file.empty()) load_config_file(cfg, be.layers.config_file);
            if (!be.mode.empty()) apply_setting(cfg, "mode", be.mode);
            if (be.refresh) cfg.refresh_cache = true;
            const std::filesystem::path out =
                be.out.empty() ? default_out("bench_run") : std::filesystem::path(be.out);
            print_resolved("bench", cfg, {{"out", out.string()}});

            const ExperimentConfig ecfg = experiment_config(cfg, out);
            if (cfg.mode == "matrix" || cfg.mode == "all") {
                const MatrixResult matrix = run_matrix(ecfg);
                std::printf("matrix: %zu transfer rows, %zu strategy rows, %zu ablation rows\n",
                            matrix.transfer.size(), matrix.strategies.size(),
                            matrix.ablation.size());
            }
            if (cfg.mode == "sweep" || cfg.mode == "all") {
                const std::vector<OutcomeRow> sweep = run_budget_sweep(ecfg);
                std::printf("sweep: %zu budget rows\n", sweep.size());
            }
            std::printf("campaign artifacts in %s\n", out.string().c_str());
            return 0;
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.push_back("sfada");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(storage.size());
    for (const std::string& s : storage) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace sfada
