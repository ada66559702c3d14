#pragma once
#include "sfada/segmenter.hpp"

namespace sfada::serial_ref {

// Naive single-threaded counterpart of the optimized segmenter path: direct
// per-pixel convolution loops, no OpenMP, no row-pass restructuring. Kept as
// the comparison baseline for tests and the kernel benchmark.
Prediction forward(const SegmenterParams& params, const Image& img);
BatchGradient batch_gradient(const SegmenterParams& params,
                             const std::vector<const Sample*>& batch);

}  // namespace sfada::serial_ref
