#include "sfada/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "sfada/transforms.hpp"

namespace sfada {
namespace {

// Per-phase seed salts; every random stream in the workflow is derived from
// cfg.seed and one of these, so no two phases share a stream.
constexpr uint64_t kInitSalt = 0x696e6974;     // parameter initialization
constexpr uint64_t kSourceSalt = 0x73726374;   // source training batches
constexpr uint64_t kStage1Salt = 0x73746731;   // stage-1 batches
constexpr uint64_t kStage3Salt = 0x73746733;   // stage-3 batches
constexpr uint64_t kKmeansSalt = 0x6b6d6e73;   // reference fitting

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

TrainConfig phase_config(const AdaptationConfig& cfg, int iterations, uint64_t salt, size_t n) {
    if (n == 0) throw DataError("cannot build a training schedule for an empty dataset");
    TrainConfig tc;
    tc.iterations = iterations;
    tc.batch_size = std::min<int>(cfg.batch_size, static_cast<int>(n));
    tc.lr0 = cfg.lr0;
    tc.decay_power = cfg.decay_power;
    tc.seed = mix_seed(cfg.seed, salt);
    tc.augment = true;
    return tc;
}

std::vector<Prediction> predict_all(const SegmenterParams& params, const Dataset& ds) {
    std::vector<Prediction> preds(ds.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(ds.size()); ++i)
        preds[static_cast<size_t>(i)] = predict_mask(params, ds.samples[static_cast<size_t>(i)].image);
    return preds;
}

std::vector<std::string> dataset_ids(const Dataset& ds) {
    std::vector<std::string> ids;
    ids.reserve(ds.size());
    for (const Sample& s : ds.samples) ids.push_back(s.id);
    return ids;
}

nlohmann::json aggregate_json(const AggregateMetrics& agg) {
    return {{"count", agg.count},
            {"undefined_count", agg.undefined_count},
            {"dsc_mean", agg.dsc_mean},
            {"dsc_std", agg.dsc_std},
            {"hd95_mean", agg.hd95_mean},
            {"hd95_std", agg.hd95_std},
            {"asd_mean", agg.asd_mean},
            {"asd_std", agg.asd_std}};
}

}  // namespace

void validate(const AdaptationConfig& cfg) {
    static const std::set<std::string> kStrategies = {"stdr", "alpha", "beta", "random", "entropy"};
    if (!kStrategies.count(cfg.strategy))
        throw UsageError("unknown strategy '" + cfg.strategy + "'");
    if (!(cfg.budget_percent > 0.0 && cfg.budget_percent <= 100.0))
        throw UsageError("budget_percent must be in (0, 100]");
    if (cfg.k < 1) throw UsageError("k must be at least 1");
    if (cfg.pool_k < 1) throw UsageError("pool_k must be at least 1");
    if (cfg.source_iters < 1 || cfg.stage1_iters < 1 || cfg.stage3_iters < 1)
        throw UsageError("iteration counts must be at least 1");
    if (cfg.batch_size < 1) throw UsageError("batch_size must be at least 1");
    if (!(cfg.lr0 > 0.0)) throw UsageError("lr0 must be positive");
    if (cfg.decay_power < 0.0) throw UsageError("decay_power must be non-negative");
    if (cfg.val_cadence < 1) throw UsageError("val_cadence must be at least 1");
    if (!(cfg.spacing > 0.0)) throw UsageError("spacing must be positive");
}

TrainConfig source_train_config(const AdaptationConfig& cfg, size_t n_train) {
    return phase_config(cfg, cfg.source_iters, kSourceSalt, n_train);
}

TrainConfig stage1_train_config(const AdaptationConfig& cfg, size_t n_labeled) {
    return phase_config(cfg, cfg.stage1_iters, kStage1Salt, n_labeled);
}

TrainConfig stage3_train_config(const AdaptationConfig& cfg, size_t n_union) {
    return phase_config(cfg, cfg.stage3_iters, kStage3Salt, n_union);
}

AggregateMetrics evaluate_on(const SegmenterParams& params, const Dataset& ds, double spacing) {
    if (ds.empty()) throw DataError("cannot evaluate on an empty dataset");
    for (const Sample& s : ds.samples)
        if (!s.truth) throw DataError("evaluation sample '" + s.id + "' has no truth mask");
    const std::vector<Prediction> preds = predict_all(params, ds);
    std::vector<Mask> pred_masks, truths;
    pred_masks.reserve(ds.size());
    truths.reserve(ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
        pred_masks.push_back(preds[i].mask);
        truths.push_back(*ds.samples[i].truth);
    }
    return evaluate_dataset(pred_masks, truths, spacing);
}

SourcePhaseResult run_source_phase(const Dataset& source_ds, const AdaptationConfig& cfg) {
    validate(cfg);
    const auto t0 = Clock::now();

    SplitSpec spec;
    spec.seed = cfg.seed;
    SplitResult split = split_dataset(source_ds, spec);
    split.train = normalize_dataset(split.train);
    split.valid = normalize_dataset(split.valid);
    split.test = normalize_dataset(split.test);

    SourcePhaseResult out;
    out.split = split;

    const SegmenterParams start = init_params(mix_seed(cfg.seed, kInitSalt));
    const TrainConfig tc = source_train_config(cfg, split.train.size());

    // Track the best validation DSC seen at the cadence points; ties keep the
    // earliest checkpoint.
    out.best_val_dsc = -1.0;
    const TrainCallback on_step = [&](int iter, const SegmenterParams& params) {
        const int done = iter + 1;
        if (done % cfg.val_cadence != 0 && done != cfg.source_iters) return;
        const AggregateMetrics val = evaluate_on(params, split.valid, cfg.spacing);
        out.val_dsc_trace.emplace_back(done, val.dsc_mean);
        if (val.dsc_mean > out.best_val_dsc) {
            out.best_val_dsc = val.dsc_mean;
            out.best_iteration = done;
            out.params = params;
        }
    };

    TrainResult trained = train(start, split.train, tc, on_step);
    out.loss_trace = std::move(trained.loss_trace);

    const std::vector<LatentVector> vectors = project_dataset(out.params, split.train, cfg.pool_k);
    out.refs = kmeans_fit(vectors, cfg.k, mix_seed(cfg.seed, kKmeansSalt));
    out.refs.pool_k = cfg.pool_k;

    out.seconds = seconds_since(t0);
    return out;
}

SegmenterParams stage1_finetune(const SegmenterParams& source_params, const Dataset& target_train,
                                const SelectionManifest& manifest, const AdaptationConfig& cfg,
                                std::vector<double>* loss_trace) {
    validate(manifest);
    std::map<std::string, const Sample*> by_id;
    for (const Sample& s : target_train.samples) by_id.emplace(s.id, &s);

    Dataset labeled;
    labeled.name = target_train.name + ".labeled";
    for (const std::string& id : manifest.all_ids()) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw DataError("manifest id '" + id + "' not found in the target train set");
        if (!it->second->truth)
            throw DataError("manifest id '" + id + "' has no truth mask to reveal");
        labeled.samples.push_back(*it->second);
    }

    const TrainConfig tc = stage1_train_config(cfg, labeled.size());
    TrainResult result = train(source_params, labeled, tc);
    if (loss_trace) *loss_trace = std::move(result.loss_trace);
    return result.params;
}

std::vector<std::pair<std::string, Mask>> stage2_pseudolabel(const SegmenterParams& params,
                                                             const Dataset& unlabeled) {
    std::vector<std::pair<std::string, Mask>> out(unlabeled.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(unlabeled.size()); ++i) {
        const Sample& s = unlabeled.samples[static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] = {s.id, predict_mask(params, s.image).mask};
    }
    return out;
}

SegmenterParams stage3_joint(const SegmenterParams& stage1_params, const Dataset& target_train,
                             const std::vector<std::pair<std::string, Mask>>& labeled,
                             const std::vector<std::pair<std::string, Mask>>& pseudo,
                             const AdaptationConfig& cfg, std::vector<double>* loss_trace) {
    std::map<std::string, const Mask*> mask_of;
    for (const auto& [id, mask] : labeled)
        if (!mask_of.emplace(id, &mask).second)
            throw DataError("duplicate labeled id '" + id + "'");
    for (const auto& [id, mask] : pseudo)
        if (!mask_of.emplace(id, &mask).second)
            throw DataError("id '" + id + "' appears in both the labeled and pseudo sets");
    if (mask_of.size() != target_train.size())
        throw DataError("labeled plus pseudo sets must cover the target train set exactly");

    // Union dataset in target order; each sample carries either its revealed
    // truth or its pseudo-label, and training treats them identically.
    Dataset joint;
    joint.name = target_train.name + ".joint";
    joint.samples.reserve(target_train.size());
    for (const Sample& s : target_train.samples) {
        const auto it = mask_of.find(s.id);
        if (it == mask_of.end())
            throw DataError("target sample '" + s.id + "' has no label in either set");
        Sample labeled_sample = s;
        labeled_sample.truth = *it->second;
        joint.samples.push_back(std::move(labeled_sample));
    }

    const TrainConfig tc = stage3_train_config(cfg, joint.size());
    TrainResult result = train(stage1_params, joint, tc);
    if (loss_trace) *loss_trace = std::move(result.loss_trace);
    return result.params;
}

SelectionManifest run_selection(const SegmenterParams& params, const ReferenceSet* refs,
                                const Dataset& normalized_train, const AdaptationConfig& cfg) {
    validate(cfg);
    if (cfg.strategy == "stdr" || cfg.strategy == "alpha" || cfg.strategy == "beta") {
        if (!refs)
            throw UsageError("strategy '" + cfg.strategy + "' needs a reference set");
        const std::vector<LatentVector> vectors =
            project_dataset(params, normalized_train, cfg.pool_k);
        const std::vector<SimilarityScore> scores = similarity_scores(vectors, *refs);
        if (cfg.strategy == "stdr") return select_stdr(scores, cfg.budget_percent, cfg.seed);
        if (cfg.strategy == "alpha") return select_alpha(scores, cfg.budget_percent);
        return select_beta(scores, cfg.budget_percent);
    }
    if (cfg.strategy == "random")
        return select_random(dataset_ids(normalized_train), cfg.budget_percent, cfg.seed);
    const std::vector<Prediction> preds = predict_all(params, normalized_train);
    return select_entropy(preds, dataset_ids(normalized_train), cfg.budget_percent);
}

AdaptationResult run_adaptation(const SegmenterParams& source_params, const ReferenceSet& refs,
                                const Dataset& target_train, const AdaptationConfig& cfg) {
    validate(cfg);
    const Dataset train = normalize_dataset(target_train);

    AdaptationResult out;
    auto t0 = Clock::now();
    out.manifest = run_selection(source_params, &refs, train, cfg);
    out.selection_seconds = seconds_since(t0);
    out.labels_revealed = out.manifest.all_ids().size();

    t0 = Clock::now();
    out.stage1_params = stage1_finetune(source_params, train, out.manifest, cfg,
                                        &out.stage1_loss_trace);
    out.stage1_seconds = seconds_since(t0);

    if (!cfg.semi_enabled) return out;

    const std::vector<std::string> chosen_ids = out.manifest.all_ids();
    const std::set<std::string> chosen(chosen_ids.begin(), chosen_ids.end());
    std::vector<std::pair<std::string, Mask>> labeled;
    Dataset unlabeled;
    unlabeled.name = train.name + ".unlabeled";
    for (const Sample& s : train.samples) {
        if (chosen.count(s.id)) {
            if (!s.truth) throw DataError("manifest id '" + s.id + "' has no truth mask to reveal");
            labeled.emplace_back(s.id, *s.truth);
        } else {
            unlabeled.samples.push_back(s);
        }
    }

    t0 = Clock::now();
    const std::vector<std::pair<std::string, Mask>> pseudo =
        stage2_pseudolabel(out.stage1_params, unlabeled);
    out.stage2_seconds = seconds_since(t0);

    t0 = Clock::now();
    out.stage3_params = stage3_joint(out.stage1_params, train, labeled, pseudo, cfg,
                                     &out.stage3_loss_trace);
    out.stage3_seconds = seconds_since(t0);
    return out;
}

RunReport run_sfada(const Dataset& source_ds, const Dataset& target_ds,
                    const AdaptationConfig& cfg) {
    validate(cfg);
    RunReport report;
    report.cfg = cfg;

    const SourcePhaseResult source = run_source_phase(source_ds, cfg);
    report.source_params = source.params;
    report.source_val_best = source.best_val_dsc;
    report.source_best_iteration = source.best_iteration;
    report.source_seconds = source.seconds;

    SplitSpec spec;
    spec.seed = cfg.seed;
    const SplitResult target_split = split_dataset(target_ds, spec);

    const AdaptationResult adapted =
        run_adaptation(source.params, source.refs, target_split.train, cfg);
    report.manifest = adapted.manifest;
    report.labels_revealed = adapted.labels_revealed;
    report.stage1_params = adapted.stage1_params;
    report.stage3_params = adapted.stage3_params;
    report.selection_seconds = adapted.selection_seconds;
    report.stage1_seconds = adapted.stage1_seconds;
    report.stage2_seconds = adapted.stage2_seconds;
    report.stage3_seconds = adapted.stage3_seconds;

    const Dataset test = normalize_dataset(target_split.test);
    report.source_only = evaluate_on(report.source_params, test, cfg.spacing);
    report.stage1 = evaluate_on(report.stage1_params, test, cfg.spacing);
    if (report.stage3_params)
        report.stage3 = evaluate_on(*report.stage3_params, test, cfg.spacing);
    return report;
}

void write_run_report(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    nlohmann::json j;
    j["config"] = {{"strategy", report.cfg.strategy},
                   {"budget_percent", report.cfg.budget_percent},
                   {"k", report.cfg.k},
                   {"pool_k", report.cfg.pool_k},
                   {"source_iters", report.cfg.source_iters},
                   {"stage1_iters", report.cfg.stage1_iters},
                   {"stage3_iters", report.cfg.stage3_iters},
                   {"batch_size", report.cfg.batch_size},
                   {"lr0", report.cfg.lr0},
                   {"decay_power", report.cfg.decay_power},
                   {"val_cadence", report.cfg.val_cadence},
                   {"seed", report.cfg.seed},
                   {"semi_enabled", report.cfg.semi_enabled},
                   {"spacing", report.cfg.spacing}};
    j["labels_revealed"] = report.labels_revealed;
    // A report assembled from a pre-trained checkpoint has no source
    // validation history; best_iteration 0 marks that.
    if (report.source_best_iteration > 0)
        j["source"] = {{"best_val_dsc", report.source_val_best},
                       {"best_iteration", report.source_best_iteration}};
    j["metrics"] = {{"source_only", aggregate_json(report.source_only)},
                    {"stage1", aggregate_json(report.stage1)}};
    if (report.stage3) j["metrics"]["stage3"] = aggregate_json(*report.stage3);
    j["seconds"] = {{"source", report.source_seconds},
                    {"selection", report.selection_seconds},
                    {"stage1", report.stage1_seconds},
                    {"stage2", report.stage2_seconds},
                    {"stage3", report.stage3_seconds}};
    std::ofstream rf(dir / "report.json");
    if (!rf) throw DataError("cannot write " + (dir / "report.json").string());
    rf << j.dump(2) << "\n";

    std::vector<std::pair<std::string, AggregateMetrics>> rows = {
        {"source_only", report.source_only}, {"stage1", report.stage1}};
    if (report.stage3) rows.emplace_back("stage3", *report.stage3);
    write_metrics_csv(rows, dir / "metrics.csv");

    save_manifest(report.manifest, dir / "manifest.json");
    save_checkpoint(report.source_params, dir / "source.ckpt");
    save_checkpoint(report.stage1_params, dir / "stage1.ckpt");
    if (report.stage3_params) save_checkpoint(*report.stage3_params, dir / "stage3.ckpt");
}

}  // namespace sfada
