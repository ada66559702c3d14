#pragma once
#include <filesystem>
#include <functional>

#include "sfada/image.hpp"
#include "sfada/rng.hpp"
#include "sfada/tensor_ops.hpp"

namespace sfada {

// Fixed graph: enc1 3x3 1->8, relu, pool2; enc2 3x3 8->16, relu, pool2;
// up2, dec1 3x3 16->8, relu; up2, dec2 3x3 8->8, relu (penultimate features,
// full resolution); head 1x1 8->2 logits. Parameters live in one flat vector
// with the block layout below; weight blocks are [out][in][ky][kx].
struct SegmenterParams {
    static constexpr int kIn = 1, kEnc1 = 8, kEnc2 = 16, kDec = 8, kClasses = 2;

    static constexpr size_t kEnc1W = 0;
    static constexpr size_t kEnc1B = kEnc1W + kEnc1 * kIn * 9;
    static constexpr size_t kEnc2W = kEnc1B + kEnc1;
    static constexpr size_t kEnc2B = kEnc2W + kEnc2 * kEnc1 * 9;
    static constexpr size_t kDec1W = kEnc2B + kEnc2;
    static constexpr size_t kDec1B = kDec1W + kDec * kEnc2 * 9;
    static constexpr size_t kDec2W = kDec1B + kDec;
    static constexpr size_t kDec2B = kDec2W + kDec * kDec * 9;
    static constexpr size_t kHeadW = kDec2B + kDec;
    static constexpr size_t kHeadB = kHeadW + kClasses * kDec;
    static constexpr size_t kCount = kHeadB + kClasses;

    std::vector<double> flat;
};

void validate(const SegmenterParams& params);

struct Prediction {
    Tensor logits;       // 2 x H x W
    Tensor probs;        // 2 x H x W, per-pixel softmax
    Mask mask;           // argmax, ties -> background
    Tensor penultimate;  // 8 x H x W
};

struct TrainConfig {
    int iterations = 2000;
    int batch_size = 8;
    double lr0 = 0.03;
    double decay_power = 0.9;
    uint64_t seed = 0;
    bool augment = true;
};

void validate(const TrainConfig& cfg);

// He initialization: weights ~ N(0, 2/fan_in), biases 0.
SegmenterParams init_params(uint64_t seed);

// Requires height and width divisible by 4.
Prediction forward(const SegmenterParams& params, const Image& img);
// Identical to forward; named for the frozen-model call sites.
Prediction predict_mask(const SegmenterParams& params, const Image& img);

// Cross-entropy over both channels plus soft-Dice on the foreground channel.
// Both foreground sums zero -> the Dice term is 0.
double composite_loss(const Prediction& pred, const Mask& truth);

// Mean composite loss over the batch and its exact gradient in params layout.
struct BatchGradient {
    std::vector<double> grad;
    double loss = 0.0;
};
BatchGradient batch_gradient(const SegmenterParams& params,
                             const std::vector<const Sample*>& batch);

double lr_at(int iter, const TrainConfig& cfg);

// Batch drawn for one SGD step: distinct indices within the batch, fresh draw
// per iteration. Exposed so tests can replay the exact batch sequence.
std::vector<int> train_batch_indices(uint64_t seed, int iter, int n, int batch_size);

// Called after each completed SGD step; used for checkpoint evaluation.
using TrainCallback = std::function<void(int iter, const SegmenterParams& params)>;

struct TrainResult {
    SegmenterParams params;
    std::vector<double> loss_trace;  // one mean batch loss per iteration
};
// Seeded batches without replacement inside a batch, with replacement across
// iterations; augmentation per config. Deterministic per seed.
TrainResult train(const SegmenterParams& start, const Dataset& ds, const TrainConfig& cfg,
                  const TrainCallback& after_step = {});

void save_checkpoint(const SegmenterParams& params, const std::filesystem::path& file);
SegmenterParams load_checkpoint(const std::filesystem::path& file);

}  // namespace sfada
