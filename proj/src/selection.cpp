#include "sfada/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "sfada/errors.hpp"
#include "sfada/rng.hpp"

namespace sfada {

namespace {

// Ascending by distance, then ascending id; +infinity sorts last.
bool lower_distance(const SimilarityScore& a, const SimilarityScore& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.sample_id < b.sample_id;
}

// Descending by distance, then ascending id; +infinity sorts first.
bool higher_distance(const SimilarityScore& a, const SimilarityScore& b) {
    if (a.distance != b.distance) return a.distance > b.distance;
    return a.sample_id < b.sample_id;
}

void require_unique_ids(const std::vector<SimilarityScore>& scores) {
    std::set<std::string> seen;
    for (const auto& s : scores)
        if (!seen.insert(s.sample_id).second)
            throw DataError("duplicate sample id in scores: " + s.sample_id);
}

}  // namespace

std::vector<SimilarityScore> similarity_scores(const std::vector<LatentVector>& vectors,
                                               const ReferenceSet& refs) {
    validate(refs);
    const size_t len = refs.centroids.front().size();
    std::vector<SimilarityScore> out(vectors.size());
    for (size_t i = 0; i < vectors.size(); ++i) {
        const LatentVector& v = vectors[i];
        out[i].sample_id = v.sample_id;
        if (!v.valid) {
            out[i].valid = false;
            out[i].distance = std::numeric_limits<double>::infinity();
            continue;
        }
        if (v.values.size() != len)
            throw DataError("latent vector length does not match centroids");
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : refs.centroids) {
            double d = 0.0;
            for (size_t j = 0; j < len; ++j) {
                const double t = v.values[j] - c[j];
                d += t * t;
            }
            best = std::min(best, d);
        }
        out[i].distance = best;
    }
    return out;
}

std::vector<std::string> SelectionManifest::all_ids() const {
    std::vector<std::string> out = invariant_ids;
    out.insert(out.end(), specific_ids.begin(), specific_ids.end());
    return out;
}

void validate(const SelectionManifest& manifest) {
    static const std::set<std::string> kStrategies{"stdr", "alpha", "beta", "random", "entropy"};
    if (!kStrategies.count(manifest.strategy))
        throw DataError("unknown selection strategy: " + manifest.strategy);
    if (!(manifest.budget_percent > 0.0 && manifest.budget_percent <= 100.0))
        throw DataError("budget percent outside (0, 100]");
    std::set<std::string> seen;
    for (const auto& id : manifest.invariant_ids)
        if (!seen.insert(id).second) throw DataError("duplicate id in manifest: " + id);
    for (const auto& id : manifest.specific_ids)
        if (!seen.insert(id).second) throw DataError("duplicate id in manifest: " + id);
    if (seen.empty()) throw DataError("empty selection manifest");
}

size_t budgeted_count(double budget_percent, size_t n, size_t minimum) {
    if (!(budget_percent > 0.0 && budget_percent <= 100.0))
        throw DataError("budget percent outside (0, 100]");
    if (n == 0) throw DataError("cannot select from an empty score list");
    size_t m = static_cast<size_t>(std::floor(budget_percent * static_cast<double>(n) / 100.0 + 0.5));
    m = std::max(m, minimum);
    if (m > n)
        throw DataError("budget of " + std::to_string(m) + " exceeds dataset size " +
                        std::to_string(n));
    return m;
}

SelectionManifest select_stdr(const std::vector<SimilarityScore>& scores, double budget_percent,
                              uint64_t seed) {
    require_unique_ids(scores);
    const size_t m = budgeted_count(budget_percent, scores.size(), 2);
    const size_t m_half = m / 2;

    std::vector<SimilarityScore> valid;
    for (const auto& s : scores)
        if (s.valid) valid.push_back(s);
    if (valid.size() < 2) throw DataError("fewer than 2 valid similarity scores");
    if (valid.size() < m_half)
        throw DataError("not enough valid scores for the invariant half");

    SelectionManifest manifest;
    manifest.strategy = "stdr";
    manifest.budget_percent = budget_percent;
    manifest.seed = seed;

    std::sort(valid.begin(), valid.end(), lower_distance);
    std::set<std::string> taken;
    for (size_t i = 0; i < m_half; ++i) {
        manifest.invariant_ids.push_back(valid[i].sample_id);
        taken.insert(valid[i].sample_id);
    }

    std::vector<SimilarityScore> order = scores;
    std::sort(order.begin(), order.end(), higher_distance);
    for (const auto& s : order) {
        if (manifest.specific_ids.size() == m - m_half) break;
        if (taken.count(s.sample_id)) continue;
        manifest.specific_ids.push_back(s.sample_id);
    }
    validate(manifest);
    return manifest;
}

SelectionManifest select_alpha(const std::vector<SimilarityScore>& scores, double budget_percent) {
    require_unique_ids(scores);
    const size_t m = budgeted_count(budget_percent, scores.size(), 1);
    std::vector<SimilarityScore> valid;
    for (const auto& s : scores)
        if (s.valid) valid.push_back(s);
    if (valid.size() < m) throw DataError("not enough valid scores for the requested budget");
    std::sort(valid.begin(), valid.end(), lower_distance);

    SelectionManifest manifest;
    manifest.strategy = "alpha";
    manifest.budget_percent = budget_percent;
    for (size_t i = 0; i < m; ++i) manifest.invariant_ids.push_back(valid[i].sample_id);
    validate(manifest);
    return manifest;
}

SelectionManifest select_beta(const std::vector<SimilarityScore>& scores, double budget_percent) {
    require_unique_ids(scores);
    const size_t m = budgeted_count(budget_percent, scores.size(), 1);
    std::vector<SimilarityScore> order = scores;
    std::sort(order.begin(), order.end(), higher_distance);

    SelectionManifest manifest;
    manifest.strategy = "beta";
    manifest.budget_percent = budget_percent;
    for (size_t i = 0; i < m; ++i) manifest.specific_ids.push_back(order[i].sample_id);
    validate(manifest);
    return manifest;
}

SelectionManifest select_random(const std::vector<std::string>& ids, double budget_percent,
                                uint64_t seed) {
    const size_t m = budgeted_count(budget_percent, ids.size(), 1);
    std::vector<std::string> pool = ids;
    std::sort(pool.begin(), pool.end());
    for (size_t i = 1; i < pool.size(); ++i)
        if (pool[i] == pool[i - 1]) throw DataError("duplicate sample id: " + pool[i]);

    Rng rng(seed);
    SelectionManifest manifest;
    manifest.strategy = "random";
    manifest.budget_percent = budget_percent;
    manifest.seed = seed;
    for (size_t i = 0; i < m; ++i) {
        const size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        manifest.specific_ids.push_back(pool[i]);
    }
    validate(manifest);
    return manifest;
}

double mean_pixel_entropy(const Tensor& probs) {
    const size_t pixels = static_cast<size_t>(probs.h) * probs.w;
    double total = 0.0;
    for (int c = 0; c < probs.c; ++c) {
        const double* p = probs.plane(c);
        for (size_t i = 0; i < pixels; ++i)
            if (p[i] > 0.0) total -= p[i] * std::log(p[i]);
    }
    return total / static_cast<double>(pixels);
}

SelectionManifest select_entropy(const std::vector<Prediction>& preds,
                                 const std::vector<std::string>& ids, double budget_percent) {
    if (preds.size() != ids.size())
        throw DataError("prediction count does not match id count");
    const size_t m = budgeted_count(budget_percent, ids.size(), 1);

    std::vector<SimilarityScore> order(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        order[i].sample_id = ids[i];
        order[i].distance = mean_pixel_entropy(preds[i].probs);
    }
    require_unique_ids(order);
    std::sort(order.begin(), order.end(), higher_distance);

    SelectionManifest manifest;
    manifest.strategy = "entropy";
    manifest.budget_percent = budget_percent;
    for (size_t i = 0; i < m; ++i) manifest.specific_ids.push_back(order[i].sample_id);
    validate(manifest);
    return manifest;
}

void save_manifest(const SelectionManifest& manifest, const std::filesystem::path& file) {
    validate(manifest);
    nlohmann::json j{{"strategy", manifest.strategy},
                     {"budget_percent", manifest.budget_percent},
                     {"seed", manifest.seed},
                     {"invariant_ids", manifest.invariant_ids},
                     {"specific_ids", manifest.specific_ids}};
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    out << j.dump(2) << "\n";
    if (!out) throw DataError("failed writing " + file.string());
}

SelectionManifest load_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    SelectionManifest manifest;
    try {
        nlohmann::json j;
        in >> j;
        manifest.strategy = j.at("strategy").get<std::string>();
        manifest.budget_percent = j.at("budget_percent").get<double>();
        manifest.seed = j.at("seed").get<uint64_t>();
        manifest.invariant_ids = j.at("invariant_ids").get<std::vector<std::string>>();
        manifest.specific_ids = j.at("specific_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed selection manifest: " + std::string(e.what()));
    }
    validate(manifest);
    return manifest;
}

}  // namespace sfada
