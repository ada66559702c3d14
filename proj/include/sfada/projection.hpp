#pragma once
#include <filesystem>
#include <string>
#include <vector>

#include "sfada/segmenter.hpp"

namespace sfada {

// Projection of one sample into reference space. Length is
// (H / pool_k) * (W / pool_k), fixed by shape alone; valid is false when the
// predicted foreground was empty (values are then all zero).
struct LatentVector {
    std::string sample_id;
    std::vector<double> values;
    bool valid = true;
};

// Mask-weighted penultimate features reduced to a patch descriptor: multiply
// features by the predicted mask, average over channels, max-pool with
// kernel = stride = pool_k, flatten row-major, divide by the predicted
// foreground pixel count. Requires H and W divisible by pool_k.
LatentVector project(const Prediction& pred, const std::string& sample_id, int pool_k);

// One vector per sample, input order preserved; params are read-only.
std::vector<LatentVector> project_dataset(const SegmenterParams& params, const Dataset& ds,
                                          int pool_k);

// CSV with header sample_id,valid,v_0...v_{L-1}; full double precision.
void write_latent_csv(const std::vector<LatentVector>& vectors,
                      const std::filesystem::path& file);

}  // namespace sfada
