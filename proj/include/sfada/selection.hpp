#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfada/reference.hpp"
#include "sfada/segmenter.hpp"

namespace sfada {

// Distance to the nearest reference centroid; smaller = more source-like.
// Invalid latent vectors carry distance = +infinity and valid = false.
struct SimilarityScore {
    std::string sample_id;
    double distance = 0.0;
    bool valid = true;
};

std::vector<SimilarityScore> similarity_scores(const std::vector<LatentVector>& vectors,
                                               const ReferenceSet& refs);

// The annotation request: which target samples get labels. invariant_ids are
// the most source-like picks, specific_ids the least source-like (or the
// picks of a single-list strategy). The halves are always disjoint.
struct SelectionManifest {
    std::string strategy;
    double budget_percent = 0.0;
    uint64_t seed = 0;
    std::vector<std::string> invariant_ids;
    std::vector<std::string> specific_ids;

    std::vector<std::string> all_ids() const;
};

void validate(const SelectionManifest& manifest);

// Total budget m = round-half-up(percent/100 * n), clamped to `minimum`;
// throws when the clamped budget exceeds n or the percent is outside (0,100].
size_t budgeted_count(double budget_percent, size_t n, size_t minimum);

// Dual selection: floor(m/2) lowest distances (valid only) plus the rest
// from the top of the distance order, invalid scores ranking highest. Ties
// break by sample id; the halves never overlap.
SelectionManifest select_stdr(const std::vector<SimilarityScore>& scores, double budget_percent,
                              uint64_t seed);
// Full budget to the lowest-distance valid samples.
SelectionManifest select_alpha(const std::vector<SimilarityScore>& scores, double budget_percent);
// Full budget to the highest-distance samples, invalid ranking highest.
SelectionManifest select_beta(const std::vector<SimilarityScore>& scores, double budget_percent);
// Seeded uniform draw without replacement.
SelectionManifest select_random(const std::vector<std::string>& ids, double budget_percent,
                                uint64_t seed);
// Highest mean pixelwise entropy of the predicted probabilities.
SelectionManifest select_entropy(const std::vector<Prediction>& preds,
                                 const std::vector<std::string>& ids, double budget_percent);

// Mean over pixels of the Shannon entropy (natural log) of the per-pixel
// class distribution.
double mean_pixel_entropy(const Tensor& probs);

void save_manifest(const SelectionManifest& manifest, const std::filesystem::path& file);
SelectionManifest load_manifest(const std::filesystem::path& file);

}  // namespace sfada
