#include "sfada/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sfada/transforms.hpp"

namespace sfada {
namespace {

using nlohmann::json;

std::string hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void append_double(std::string& bytes, double v) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

json aggregate_json(const AggregateMetrics& agg) {
    return {{"count", agg.count},
            {"undefined_count", agg.undefined_count},
            {"dsc_mean", agg.dsc_mean},
            {"dsc_std", agg.dsc_std},
            {"hd95_mean", agg.hd95_mean},
            {"hd95_std", agg.hd95_std},
            {"asd_mean", agg.asd_mean},
            {"asd_std", agg.asd_std}};
}

AggregateMetrics aggregate_from_json(const json& j) {
    AggregateMetrics agg;
    agg.count = j.at("count").get<size_t>();
    agg.undefined_count = j.at("undefined_count").get<size_t>();
    agg.dsc_mean = j.at("dsc_mean").get<double>();
    agg.dsc_std = j.at("dsc_std").get<double>();
    agg.hd95_mean = j.at("hd95_mean").get<double>();
    agg.hd95_std = j.at("hd95_std").get<double>();
    agg.asd_mean = j.at("asd_mean").get<double>();
    agg.asd_std = j.at("asd_std").get<double>();
    return agg;
}

// Every input that can change the cached source artifacts.
json cache_key(const Dataset& source_ds, const AdaptationConfig& cfg) {
    return {{"data", hex64(dataset_fingerprint(source_ds))},
            {"seed", cfg.seed},
            {"source_iters", cfg.source_iters},
            {"batch_size", cfg.batch_size},
            {"lr0", cfg.lr0},
            {"decay_power", cfg.decay_power},
            {"val_cadence", cfg.val_cadence},
            {"pool_k", cfg.pool_k},
            {"k", cfg.k},
            {"spacing", cfg.spacing}};
}

bool checksums_hold(const std::filesystem::path& dir, const json& sums) {
    for (const auto& [name, expected] : sums.items()) {
        const std::filesystem::path file = dir / name;
        if (!std::filesystem::exists(file)) return false;
        if (hex64(fnv1a_file(file)) != expected.get<std::string>()) return false;
    }
    return true;
}

void write_row(std::ofstream& out, const AggregateMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", m.dsc_mean, m.dsc_std,
                  m.hd95_mean, m.hd95_std, m.asd_mean, m.asd_std);
    out << buf << "\n";
}

constexpr const char* kMetricCols = "DSC_mean,DSC_std,HD95_mean,HD95_std,ASD_mean,ASD_std";

std::ofstream open_csv(const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    return out;
}

// Mean and population std of the per-seed DSC means for one (target, label).
struct SeedStats {
    double mean = 0.0, stdev = 0.0;
    size_t n = 0;
};

SeedStats dsc_over_seeds(const std::vector<OutcomeRow>& rows, const std::string& target,
                         const std::string& label) {
    std::vector<double> values;
    for (const OutcomeRow& r : rows)
        if (r.target == target && r.label == label) values.push_back(r.metrics.dsc_mean);
    SeedStats s;
    s.n = values.size();
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    for (double v : values) s.stdev += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(s.stdev / static_cast<double>(values.size()));
    return s;
}

std::string fmt_ms(const SeedStats& s) {
    if (s.n == 0) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", s.mean, s.stdev);
    return buf;
}

// files.json: every regular file under out_dir (except files.json itself)
// mapped to its content hash, with forward-slash relative paths.
void write_file_manifest(const std::filesystem::path& out_dir) {
    std::map<std::string, std::string> entries;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(out_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel =
            std::filesystem::relative(entry.path(), out_dir).generic_string();
        if (rel == "files.json") continue;
        entries[rel] = hex64(fnv1a_file(entry.path()));
    }
    json j(entries);
    std::ofstream out(out_dir / "files.json");
    if (!out) throw DataError("cannot write " + (out_dir / "files.json").string());
    out << j.dump(2) << "\n";
}

struct IntentLine {
    std::string claim;
    std::string observed;
    bool matches = false;
};

}  // namespace

uint64_t fnv1a(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t fnv1a_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    return fnv1a(bytes.data(), bytes.size());
}

uint64_t dataset_fingerprint(const Dataset& ds) {
    std::string bytes = ds.name;
    bytes.push_back('\0');
    for (const Sample& s : ds.samples) {
        bytes += s.id;
        bytes.push_back('\0');
        bytes += s.domain;
        bytes.push_back('\0');
        for (double v : s.image.pixels) append_double(bytes, v);
        bytes.push_back(s.truth ? 1 : 0);
        if (s.truth)
            bytes.append(reinterpret_cast<const char*>(s.truth->labels.data()),
                         s.truth->labels.size());
    }
    return fnv1a(bytes.data(), bytes.size());
}

void validate(const ExperimentConfig& cfg) {
    validate(cfg.base);
    validate(cfg.data);
    if (cfg.seeds.empty()) throw UsageError("at least one seed is required");
    if (cfg.strategies.empty()) throw UsageError("at least one strategy is required");
    static const std::set<std::string> kKnown = {"random", "entropy", "alpha", "beta", "stdr"};
    for (const std::string& s : cfg.strategies)
        if (!kKnown.count(s)) throw UsageError("unknown strategy '" + s + "'");
    if (cfg.sweep_budgets.empty()) throw UsageError("at least one sweep budget is required");
    for (double b : cfg.sweep_budgets)
        if (!(b > 0.0 && b <= 100.0)) throw UsageError("sweep budgets must be in (0, 100]");
    if (cfg.out_dir.empty()) throw UsageError("out_dir must be set");
}

CachedSource cached_source_phase(const Dataset& source_ds, const AdaptationConfig& cfg,
                                 const std::filesystem::path& cache_dir, bool refresh) {
    const std::filesystem::path dir =
        cache_dir / (source_ds.name + "_seed" + std::to_string(cfg.seed));
    const json key = cache_key(source_ds, cfg);

    if (!refresh && std::filesystem::exists(dir / "meta.json")) {
        try {
            std::ifstream mf(dir / "meta.json");
            const json meta = json::parse(mf);
            if (meta.at("key") == key && checksums_hold(dir, meta.at("checksums"))) {
                CachedSource out;
                out.params = load_checkpoint(dir / "source.ckpt");
                out.refs = load_reference(dir / "refs.csv");
                out.best_val_dsc = meta.at("best_val_dsc").get<double>();
                out.best_iteration = meta.at("best_iteration").get<int>();
                out.source_test = aggregate_from_json(meta.at("source_test"));
                out.from_cache = true;
                return out;
            }
        } catch (const std::exception&) {
            // Unreadable or stale entry; fall through and recompute.
        }
    }

    const SourcePhaseResult phase = run_source_phase(source_ds, cfg);
    CachedSource out;
    out.params = phase.params;
    out.refs = phase.refs;
    out.best_val_dsc = phase.best_val_dsc;
    out.best_iteration = phase.best_iteration;
    out.source_test = evaluate_on(phase.params, phase.split.test, cfg.spacing);

    std::filesystem::create_directories(dir);
    save_checkpoint(out.params, dir / "source.ckpt");
    save_reference(out.refs, dir / "refs.csv");
    json meta;
    meta["key"] = key;
    meta["best_val_dsc"] = out.best_val_dsc;
    meta["best_iteration"] = out.best_iteration;
    meta["source_test"] = aggregate_json(out.source_test);
    json sums;
    for (const char* name : {"source.ckpt", "refs.csv", "refs.csv.json"})
        sums[name] = hex64(fnv1a_file(dir / name));
    meta["checksums"] = sums;
    std::ofstream mf(dir / "meta.json");
    if (!mf) throw DataError("cannot write " + (dir / "meta.json").string());
    mf << meta.dump(2) << "\n";
    return out;
}

MatrixResult run_matrix(const ExperimentConfig& cfg) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    MatrixResult result;

    for (const uint64_t seed : cfg.seeds) {
        const BenchmarkData data = benchmark_data(seed, cfg.data);
        AdaptationConfig base = cfg.base;
        base.seed = seed;

        const CachedSource src =
            cached_source_phase(data.source, base, cfg.out_dir / "cache", cfg.refresh_cache);
        result.transfer.push_back({"source", "source_model", seed, 0, src.source_test});

        for (const Dataset* target : {&data.targetA, &data.targetB}) {
            SplitSpec spec;
            spec.seed = seed;
            const SplitResult split = split_dataset(*target, spec);
            const Dataset test = normalize_dataset(split.test);

            const AggregateMetrics source_only = evaluate_on(src.params, test, base.spacing);
            result.transfer.push_back({target->name, "source_model", seed, 0, source_only});
            result.strategies.push_back({target->name, "source_only", seed, 0, source_only});

            for (const std::string& strategy : cfg.strategies) {
                AdaptationConfig acfg = base;
                acfg.strategy = strategy;
                acfg.semi_enabled = (strategy == "stdr") && cfg.base.semi_enabled;
                const AdaptationResult run =
                    run_adaptation(src.params, src.refs, split.train, acfg);
                const AggregateMetrics stage1 =
                    evaluate_on(run.stage1_params, test, base.spacing);
                result.strategies.push_back(
                    {target->name, strategy, seed, run.labels_revealed, stage1});
                if (run.stage3_params) {
                    const AggregateMetrics stage3 =
                        evaluate_on(*run.stage3_params, test, base.spacing);
                    result.strategies.push_back(
                        {target->name, "stdr_semi", seed, run.labels_revealed, stage3});
                    result.ablation.push_back({target->name, "source_only", seed, 0, source_only});
                    result.ablation.push_back(
                        {target->name, "stage1", seed, run.labels_revealed, stage1});
                    result.ablation.push_back(
                        {target->name, "stage3", seed, run.labels_revealed, stage3});
                }
            }
        }
    }

    {
        std::ofstream out = open_csv(cfg.out_dir / "transfer.csv");
        out << "domain,seed," << kMetricCols << "\n";
        for (const OutcomeRow& r : result.transfer) {
            out << r.target << "," << r.seed << ",";
            write_row(out, r.metrics);
        }
    }
    {
        std::ofstream out = open_csv(cfg.out_dir / "strategies.csv");
        out << "target,strategy,seed,labels," << kMetricCols << "\n";
        for (const OutcomeRow& r : result.strategies) {
            out << r.target << "," << r.label << "," << r.seed << "," << r.labels << ",";
            write_row(out, r.metrics);
        }
    }
    if (!result.ablation.empty()) {
        std::ofstream out = open_csv(cfg.out_dir / "ablations.csv");
        out << "target,checkpoint,seed,labels," << kMetricCols << "\n";
        for (const OutcomeRow& r : result.ablation) {
            out << r.target << "," << r.label << "," << r.seed << "," << r.labels << ",";
            write_row(out, r.metrics);
        }
    }

    // Human-readable digest: aggregated tables plus the design expectations
    // checked against what actually happened.
    std::ofstream md(cfg.out_dir / "summary.md");
    if (!md) throw DataError("cannot write " + (cfg.out_dir / "summary.md").string());
    md << "# Benchmark summary\n\n";
    md << "Seeds:";
    for (uint64_t s : cfg.seeds) md << " " << s;
    md << "  \nScale: " << cfg.data.n_source << " source / " << cfg.data.n_target
       << " target samples at " << cfg.data.height << "x" << cfg.data.width << "  \nBudget: "
       << cfg.base.budget_percent << "% of the target train split  \nIterations: "
       << cfg.base.source_iters << " source, " << cfg.base.stage1_iters << " + "
       << cfg.base.stage3_iters << " adaptation\n\n";

    const std::vector<std::string> targets = {"targetA", "targetB"};
    md << "## Source-model transfer (DSC %, mean ± std over seeds)\n\n";
    md << "| domain | DSC |\n|---|---|\n";
    for (const std::string& d : {std::string("source"), targets[0], targets[1]})
        md << "| " << d << " | " << fmt_ms(dsc_over_seeds(result.transfer, d, "source_model"))
           << " |\n";
    md << "\n";

    md << "## Strategies (DSC % on the target test split)\n\n";
    md << "| strategy | " << targets[0] << " | " << targets[1] << " |\n|---|---|---|\n";
    std::vector<std::string> strategy_rows = {"source_only"};
    strategy_rows.insert(strategy_rows.end(), cfg.strategies.begin(), cfg.strategies.end());
    if (std::count(cfg.strategies.begin(), cfg.strategies.end(), "stdr") &&
        cfg.base.semi_enabled)
        strategy_rows.push_back("stdr_semi");
    for (const std::string& s : strategy_rows) {
        md << "| " << s << " |";
        for (const std::string& t : targets)
            md << " " << fmt_ms(dsc_over_seeds(result.strategies, t, s)) << " |";
        md << "\n";
    }
    md << "\n";

    if (!result.ablation.empty()) {
        md << "## Stage ablation (dual selection, DSC %)\n\n";
        md << "| checkpoint | " << targets[0] << " | " << targets[1] << " |\n|---|---|---|\n";
        for (const char* s : {"source_only", "stage1", "stage3"}) {
            md << "| " << s << " |";
            for (const std::string& t : targets)
                md << " " << fmt_ms(dsc_over_seeds(result.ablation, t, s)) << " |";
            md << "\n";
        }
        md << "\n";
    }

    md << "## Design intent versus observed\n\n";
    std::vector<IntentLine> lines;
    auto mean_over_targets = [&](const std::vector<OutcomeRow>& rows, const std::string& label) {
        const SeedStats a = dsc_over_seeds(rows, targets[0], label);
        const SeedStats b = dsc_over_seeds(rows, targets[1], label);
        const size_t n = a.n + b.n;
        return n ? (a.mean * a.n + b.mean * b.n) / static_cast<double>(n) : 0.0;
    };
    {
        const double on_source = dsc_over_seeds(result.transfer, "source", "source_model").mean;
        const double on_a = dsc_over_seeds(result.transfer, targets[0], "source_model").mean;
        const double on_b = dsc_over_seeds(result.transfer, targets[1], "source_model").mean;
        char buf[160];
        std::snprintf(buf, sizeof buf, "source %.2f vs targetA %.2f, targetB %.2f", on_source,
                      on_a, on_b);
        lines.push_back({"appearance shift degrades the unadapted model on both targets", buf,
                         on_a < on_source && on_b < on_source});
    }
    auto compare = [&](const std::string& hi, const std::string& lo, const std::string& claim) {
        const double a = mean_over_targets(result.strategies, hi);
        const double b = mean_over_targets(result.strategies, lo);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %.2f vs %s %.2f", hi.c_str(), a, lo.c_str(), b);
        lines.push_back({claim, buf, a >= b});
    };
    auto have = [&](const std::string& s) {
        return std::count(strategy_rows.begin(), strategy_rows.end(), s) > 0;
    };
    if (have("stdr")) compare("stdr", "source_only", "a labeled sliver beats no adaptation");
    if (have("stdr") && have("random"))
        compare("stdr", "random", "similarity-guided picks beat a random budget");
    if (have("stdr_semi")) compare("stdr_semi", "stdr", "the unlabeled stages add on top");
    if (have("stdr") && have("alpha"))
        compare("stdr", "alpha", "the dual split is at least as good as source-like picks only");
    if (have("stdr") && have("beta"))
        compare("stdr", "beta", "the dual split is at least as good as outlier picks only");
    for (const IntentLine& l : lines)
        md << "- " << l.claim << ": " << l.observed << " ("
           << (l.matches ? "matches" : "differs") << ")\n";
    md << "\n";
    md.close();

    write_file_manifest(cfg.out_dir);
    return result;
}

std::vector<OutcomeRow> run_budget_sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<OutcomeRow> rows;

    for (const uint64_t seed : cfg.seeds) {
        const BenchmarkData data = benchmark_data(seed, cfg.data);
        AdaptationConfig base = cfg.base;
        base.seed = seed;
        const CachedSource src =
            cached_source_phase(data.source, base, cfg.out_dir / "cache", cfg.refresh_cache);

        SplitSpec spec;
        spec.seed = seed;
        const SplitResult split = split_dataset(data.targetA, spec);
        const Dataset test = normalize_dataset(split.test);

        for (const double budget : cfg.sweep_budgets) {
            AdaptationConfig acfg = base;
            acfg.strategy = "stdr";
            acfg.budget_percent = budget;
            acfg.semi_enabled = false;
            const AdaptationResult run = run_adaptation(src.params, src.refs, split.train, acfg);
            const AggregateMetrics stage1 = evaluate_on(run.stage1_params, test, base.spacing);
            char label[32];
            std::snprintf(label, sizeof label, "%.2f", budget);
            rows.push_back({data.targetA.name, label, seed, run.labels_revealed, stage1});
        }
    }

    std::ofstream out = open_csv(cfg.out_dir / "budget_sweep.csv");
    out << "target,budget_percent,seed,labels," << kMetricCols << "\n";
    for (const OutcomeRow& r : rows) {
        out << r.target << "," << r.label << "," << r.seed << "," << r.labels << ",";
        write_row(out, r.metrics);
    }
    out.close();

    write_file_manifest(cfg.out_dir);
    return rows;
}

}  // namespace sfada
