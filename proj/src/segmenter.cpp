#include "sfada/segmenter.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sfada/transforms.hpp"

namespace sfada {

namespace {

constexpr double kLogClamp = 1e-12;
constexpr double kDiceEps = 1e-6;
constexpr uint64_t kBatchSalt = 0x62617463;
constexpr uint64_t kAugSalt = 0x61756773;

using P = SegmenterParams;

// All intermediate activations needed by the backward pass.
struct Trace {
    Tensor x;    // 1 x H x W
    Tensor a1;   // 8 x H x W, enc1+relu
    Tensor p1;   // 8 x H/2 x W/2
    Tensor a2;   // 16 x H/2 x W/2, enc2+relu
    Tensor p2;   // 16 x H/4 x W/4
    Tensor u1;   // 16 x H/2 x W/2
    Tensor a3;   // 8 x H/2 x W/2, dec1+relu
    Tensor u2;   // 8 x H x W
    Tensor a4;   // 8 x H x W, dec2+relu, penultimate
    Tensor logits;
    Tensor probs;
    std::vector<int> am1, am2;
};

void forward_trace(const SegmenterParams& params, const Image& img, Trace& t) {
    if (img.height % 4 != 0 || img.width % 4 != 0)
        throw DataError("segmenter input shape must be divisible by 4");
    const double* f = params.flat.data();

    t.x.resize(1, img.height, img.width);
    std::copy(img.pixels.begin(), img.pixels.end(), t.x.v.begin());

    conv3x3_same(t.x, f + P::kEnc1W, f + P::kEnc1B, P::kEnc1, t.a1);
    relu_inplace(t.a1);
    maxpool2(t.a1, t.p1, t.am1);
    conv3x3_same(t.p1, f + P::kEnc2W, f + P::kEnc2B, P::kEnc2, t.a2);
    relu_inplace(t.a2);
    maxpool2(t.a2, t.p2, t.am2);
    upsample2(t.p2, t.u1);
    conv3x3_same(t.u1, f + P::kDec1W, f + P::kDec1B, P::kDec, t.a3);
    relu_inplace(t.a3);
    upsample2(t.a3, t.u2);
    conv3x3_same(t.u2, f + P::kDec2W, f + P::kDec2B, P::kDec, t.a4);
    relu_inplace(t.a4);
    conv1x1(t.a4, f + P::kHeadW, f + P::kHeadB, P::kClasses, t.logits);

    t.probs.resize(2, img.height, img.width);
    const size_t n = static_cast<size_t>(img.height) * img.width;
    const double* z0 = t.logits.plane(0);
    const double* z1 = t.logits.plane(1);
    double* q0 = t.probs.plane(0);
    double* q1 = t.probs.plane(1);
    for (size_t i = 0; i < n; ++i) {
        const double m = std::max(z0[i], z1[i]);
        const double e0 = std::exp(z0[i] - m), e1 = std::exp(z1[i] - m);
        q0[i] = e0 / (e0 + e1);
        q1[i] = e1 / (e0 + e1);
    }
}

Prediction prediction_from(Trace&& t) {
    Prediction pred;
    const size_t n = static_cast<size_t>(t.logits.h) * t.logits.w;
    pred.mask = make_mask(t.logits.h, t.logits.w);
    const double* z0 = t.logits.plane(0);
    const double* z1 = t.logits.plane(1);
    for (size_t i = 0; i < n; ++i) pred.mask.labels[i] = z1[i] > z0[i] ? 1 : 0;
    pred.logits = std::move(t.logits);
    pred.probs = std::move(t.probs);
    pred.penultimate = std::move(t.a4);
    return pred;
}

// dL/dprobs for one sample, written into g (2 x H x W).
void loss_prob_gradient(const Tensor& probs, const Mask& truth, Tensor& g) {
    const size_t n = static_cast<size_t>(probs.h) * probs.w;
    g.resize(2, probs.h, probs.w);
    const double* q0 = probs.plane(0);
    const double* q1 = probs.plane(1);
    double* g0 = g.plane(0);
    double* g1 = g.plane(1);
    const double inv_n = 1.0 / static_cast<double>(n);

    double sum_y = 0, sum_p2 = 0, sum_yp = 0;
    for (size_t i = 0; i < n; ++i) {
        const double y = truth.labels[i];
        sum_y += y;
        sum_p2 += q1[i] * q1[i];
        sum_yp += y * q1[i];
    }

    for (size_t i = 0; i < n; ++i) {
        const double pc = truth.labels[i] ? q1[i] : q0[i];
        const double ce = pc > kLogClamp ? -inv_n / pc : 0.0;
        g0[i] = truth.labels[i] ? 0.0 : ce;
        g1[i] = truth.labels[i] ? ce : 0.0;
    }
    if (!(sum_y == 0.0 && sum_p2 == 0.0)) {
        const double J = sum_y + sum_p2 + kDiceEps;
        for (size_t i = 0; i < n; ++i) {
            const double y = truth.labels[i];
            g1[i] += (-2.0 * y * J + 4.0 * sum_yp * q1[i]) / (J * J);
        }
    }
}

// Exact reverse pass through the graph; accumulates into grad (caller zeroes).
void sample_backward(const SegmenterParams& params, const Trace& t, const Mask& truth,
                     double* grad) {
    const double* f = params.flat.data();

    Tensor dprobs;
    loss_prob_gradient(t.probs, truth, dprobs);

    // softmax jacobian: dz_c = p_c * (g_c - sum_k g_k p_k)
    Tensor dz;
    dz.resize(2, t.probs.h, t.probs.w);
    {
        const size_t n = static_cast<size_t>(t.probs.h) * t.probs.w;
        const double* q0 = t.probs.plane(0);
        const double* q1 = t.probs.plane(1);
        const double* g0 = dprobs.plane(0);
        const double* g1 = dprobs.plane(1);
        double* d0 = dz.plane(0);
        double* d1 = dz.plane(1);
        for (size_t i = 0; i < n; ++i) {
            const double dot = g0[i] * q0[i] + g1[i] * q1[i];
            d0[i] = q0[i] * (g0[i] - dot);
            d1[i] = q1[i] * (g1[i] - dot);
        }
    }

    Tensor da4, du2, da3, du1, dp2, da2, dp1, da1, dx;
    conv1x1_backward(t.a4, f + P::kHeadW, P::kClasses, dz, da4, grad + P::kHeadW,
                     grad + P::kHeadB);
    relu_backward_inplace(t.a4, da4);
    conv3x3_same_backward(t.u2, f + P::kDec2W, P::kDec, da4, du2, grad + P::kDec2W,
                          grad + P::kDec2B);
    upsample2_backward(du2, da3);
    relu_backward_inplace(t.a3, da3);
    conv3x3_same_backward(t.u1, f + P::kDec1W, P::kDec, da3, du1, grad + P::kDec1W,
                          grad + P::kDec1B);
    upsample2_backward(du1, dp2);
    maxpool2_backward(t.am2, dp2, da2, t.a2.h, t.a2.w);
    relu_backward_inplace(t.a2, da2);
    conv3x3_same_backward(t.p1, f + P::kEnc2W, P::kEnc2, da2, dp1, grad + P::kEnc2W,
                          grad + P::kEnc2B);
    maxpool2_backward(t.am1, dp1, da1, t.a1.h, t.a1.w);
    relu_backward_inplace(t.a1, da1);
    conv3x3_same_backward(t.x, f + P::kEnc1W, P::kEnc1, da1, dx, grad + P::kEnc1W,
                          grad + P::kEnc1B);
}

}  // namespace

void validate(const SegmenterParams& params) {
    if (params.flat.size() != P::kCount)
        throw DataError("parameter vector has wrong length " + std::to_string(params.flat.size()));
    for (double v : params.flat)
        if (!std::isfinite(v)) throw NumericError("parameter vector contains non-finite value");
}

void validate(const TrainConfig& cfg) {
    if (cfg.iterations < 1) throw DataError("iterations must be >= 1");
    if (cfg.batch_size < 1) throw DataError("batch_size must be >= 1");
    if (!(cfg.lr0 > 0)) throw DataError("lr0 must be > 0");
    if (!(cfg.decay_power >= 0) || !std::isfinite(cfg.decay_power))
        throw DataError("decay_power must be finite and >= 0");
}

SegmenterParams init_params(uint64_t seed) {
    SegmenterParams params;
    params.flat.assign(P::kCount, 0.0);
    Rng rng(seed);
    const auto fill = [&](size_t off, size_t count, int fan_in) {
        const double sd = std::sqrt(2.0 / fan_in);
        for (size_t i = 0; i < count; ++i) params.flat[off + i] = sd * rng.normal();
    };
    fill(P::kEnc1W, P::kEnc1 * P::kIn * 9, P::kIn * 9);
    fill(P::kEnc2W, P::kEnc2 * P::kEnc1 * 9, P::kEnc1 * 9);
    fill(P::kDec1W, P::kDec * P::kEnc2 * 9, P::kEnc2 * 9);
    fill(P::kDec2W, P::kDec * P::kDec * 9, P::kDec * 9);
    fill(P::kHeadW, P::kClasses * P::kDec, P::kDec);
    return params;
}

Prediction forward(const SegmenterParams& params, const Image& img) {
    Trace t;
    forward_trace(params, img, t);
    return prediction_from(std::move(t));
}

Prediction predict_mask(const SegmenterParams& params, const Image& img) {
    return forward(params, img);
}

double composite_loss(const Prediction& pred, const Mask& truth) {
    if (pred.probs.h != truth.height || pred.probs.w != truth.width)
        throw DataError("loss shapes do not match");
    const size_t n = static_cast<size_t>(truth.height) * truth.width;
    const double* q0 = pred.probs.plane(0);
    const double* q1 = pred.probs.plane(1);

    double ce = 0, sum_y = 0, sum_p2 = 0, sum_yp = 0;
    for (size_t i = 0; i < n; ++i) {
        const double y = truth.labels[i];
        ce -= std::log(std::max(y != 0.0 ? q1[i] : q0[i], kLogClamp));
        sum_y += y;
        sum_p2 += q1[i] * q1[i];
        sum_yp += y * q1[i];
    }
    ce /= static_cast<double>(n);
    const double dice =
        (sum_y == 0.0 && sum_p2 == 0.0) ? 0.0 : 1.0 - 2.0 * sum_yp / (sum_y + sum_p2 + kDiceEps);
    return ce + dice;
}

BatchGradient batch_gradient(const SegmenterParams& params,
                             const std::vector<const Sample*>& batch) {
    validate(params);
    if (batch.empty()) throw DataError("gradient batch is empty");
    for (const Sample* s : batch)
        if (!s->truth) throw DataError("gradient batch sample '" + s->id + "' has no truth mask");

    const int B = static_cast<int>(batch.size());
    std::vector<std::vector<double>> grads(B);
    std::vector<double> losses(B);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        Trace t;
        forward_trace(params, batch[b]->image, t);
        grads[b].assign(P::kCount, 0.0);
        sample_backward(params, t, *batch[b]->truth, grads[b].data());

        Prediction pred;  // loss needs probs only
        pred.probs = std::move(t.probs);
        losses[b] = composite_loss(pred, *batch[b]->truth);
    }

    // fixed-order reduction keeps results identical for any thread count
    BatchGradient out;
    out.grad.assign(P::kCount, 0.0);
    for (int b = 0; b < B; ++b) {
        for (size_t j = 0; j < P::kCount; ++j) out.grad[j] += grads[b][j];
        out.loss += losses[b];
    }
    const double inv_b = 1.0 / B;
    for (double& g : out.grad) g *= inv_b;
    out.loss *= inv_b;
    if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");
    return out;
}

double lr_at(int iter, const TrainConfig& cfg) {
    if (iter < 0 || iter >= cfg.iterations) throw DataError("iteration outside schedule");
    return cfg.lr0 *
           std::pow(1.0 - static_cast<double>(iter) / cfg.iterations, cfg.decay_power);
}

std::vector<int> train_batch_indices(uint64_t seed, int iter, int n, int batch_size) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, kBatchSalt, static_cast<uint64_t>(iter)));
    for (int i = 0; i < batch_size; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n - i)));
        std::swap(order[i], order[j]);
    }
    order.resize(batch_size);
    return order;
}

TrainResult train(const SegmenterParams& start, const Dataset& ds, const TrainConfig& cfg,
                  const TrainCallback& after_step) {
    validate(start);
    validate(cfg);
    validate(ds);
    for (const Sample& s : ds.samples)
        if (!s.truth) throw DataError("training sample '" + s.id + "' has no truth mask");
    const int n = static_cast<int>(ds.size());
    if (cfg.batch_size > n) throw DataError("batch_size exceeds dataset size");

    TrainResult result;
    result.params = start;
    result.loss_trace.reserve(cfg.iterations);

    std::vector<Sample> augmented(cfg.batch_size);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const std::vector<int> idx = train_batch_indices(cfg.seed, iter, n, cfg.batch_size);
        std::vector<const Sample*> batch(cfg.batch_size);
        if (cfg.augment) {
            Rng aug_rng(mix_seed(cfg.seed, kAugSalt, static_cast<uint64_t>(iter)));
            for (int b = 0; b < cfg.batch_size; ++b) {
                augmented[b] = augment(ds.samples[idx[b]], aug_rng);
                batch[b] = &augmented[b];
            }
        } else {
            for (int b = 0; b < cfg.batch_size; ++b) batch[b] = &ds.samples[idx[b]];
        }

        const BatchGradient bg = batch_gradient(result.params, batch);
        const double lr = lr_at(iter, cfg);
        for (size_t j = 0; j < P::kCount; ++j) result.params.flat[j] -= lr * bg.grad[j];
        result.loss_trace.push_back(bg.loss);
        if (after_step) after_step(iter, result.params);
    }
    return result;
}

namespace {

constexpr char kMagic[8] = {'S', 'F', 'S', 'E', 'G', 'C', 'K', '1'};
constexpr uint32_t kChannelSpec[5] = {P::kIn, P::kEnc1, P::kEnc2, P::kDec, P::kClasses};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const SegmenterParams& params, const std::filesystem::path& file) {
    validate(params);
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + file.string());
    out.write(kMagic, 8);
    for (uint32_t c : kChannelSpec) put_u32(out, c);
    put_u64(out, P::kCount);
    for (double v : params.flat) put_u64(out, std::bit_cast<uint64_t>(v));
    if (!out) throw DataError("failed writing checkpoint " + file.string());
}

SegmenterParams load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("bad checkpoint magic in " + file.string());
    for (uint32_t c : kChannelSpec)
        if (get_u32(in) != c) throw DataError("checkpoint channel spec mismatch in " + file.string());
    if (get_u64(in) != P::kCount) throw DataError("checkpoint length mismatch in " + file.string());
    SegmenterParams params;
    params.flat.resize(P::kCount);
    for (double& v : params.flat) v = std::bit_cast<double>(get_u64(in));
    if (!in) throw DataError("truncated checkpoint " + file.string());
    validate(params);
    return params;
}

}  // namespace sfada
