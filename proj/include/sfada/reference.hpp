#pragma once
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sfada/projection.hpp"

namespace sfada {

// Source-domain reference centroids. This object (as a file) is the only
// source-derived artifact the target side ever sees.
struct ReferenceSet {
    std::vector<std::vector<double>> centroids;  // K vectors, equal length
    int k = 0;
    double inertia = 0.0;     // final clustering objective
    int iterations_run = 0;
    std::vector<double> objective_trace;  // objective after each assignment pass
    int pool_k = 0;           // provenance for the file sidecar; 0 = unset
    uint64_t seed = 0;
};

void validate(const ReferenceSet& refs);

// Seeded k-means++ then Lloyd iterations. Invalid vectors are excluded from
// fitting. Assignment ties go to the lowest centroid index; an empty cluster
// is reseeded to the point farthest from its assigned centroid. Vectors are
// canonicalized by sorting before seeding and the final centroids are sorted
// lexicographically, so the result is invariant to input order.
ReferenceSet kmeans_fit(const std::vector<LatentVector>& vectors, int k, uint64_t seed,
                        int max_iters = 300, double tol = 1e-6);

// Nearest centroid by squared Euclidean distance, ties to the lowest index.
int assign(const LatentVector& v, const ReferenceSet& refs);

// CSV with one row of coordinates per centroid plus a JSON sidecar
// (file + ".json") holding {K, pool_k, inertia, seed}.
void save_reference(const ReferenceSet& refs, const std::filesystem::path& file);
ReferenceSet load_reference(const std::filesystem::path& file);

}  // namespace sfada
