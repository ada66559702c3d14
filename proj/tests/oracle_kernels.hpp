#pragma once
// Independent oracles used by unit tests and the acceptance suite. Everything
// here is deliberately written as plain loops against the documented
// definitions, not via the library's optimized code paths.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfada/metrics.hpp"
#include "sfada/projection.hpp"
#include "sfada/reference.hpp"
#include "sfada/rng.hpp"
#include "sfada/segmenter.hpp"
#include "sfada/selection.hpp"

namespace oracle {

// Smooth random sample: low-frequency sinusoid mix plus a thresholded disc
// mask, sized for gradient checks.
inline sfada::Sample random_sample(int h, int w, uint64_t seed) {
    sfada::Rng rng(seed);
    sfada::Sample s;
    s.id = "oracle_" + std::to_string(seed);
    s.domain = "oracle";
    s.image = sfada::make_image(h, w);
    const double fy = rng.uniform(0.5, 2.0), fx = rng.uniform(0.5, 2.0);
    const double py = rng.uniform(0.0, 6.28), px = rng.uniform(0.0, 6.28);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            s.image.at(y, x) = 0.5 + 0.3 * std::sin(fy * y * 6.28 / h + py) *
                                         std::cos(fx * x * 6.28 / w + px) +
                               0.05 * rng.uniform(-1.0, 1.0);
    sfada::Mask m = sfada::make_mask(h, w);
    const double cy = rng.uniform(0.3, 0.7) * h, cx = rng.uniform(0.3, 0.7) * w;
    const double r = rng.uniform(0.15, 0.3) * std::min(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at(y, x) = ((y - cy) * (y - cy) + (x - cx) * (x - cx) < r * r) ? 1 : 0;
    s.truth = std::move(m);
    return s;
}

inline double loss_at(const sfada::SegmenterParams& params, const sfada::Sample& s) {
    return sfada::composite_loss(sfada::forward(params, s.image), *s.truth);
}

// Test point for finite-difference gradient checks at step h = 1e-3. The loss
// is only piecewise smooth: a ReLU or pooling switch inside the probe interval
// invalidates the FD quotient without any gradient bug. Freshly initialized
// nets have pre-activations centered at zero, so such switches are near
// certain there. Shifting the conv biases by +0.75 moves most activations
// clear of their switching points while keeping a mix of active and inactive
// units, and the seeds used by callers were verified to give every one of the
// 3010 coordinates a clean probe at h = 1e-3 (kFdSeeds below).
inline sfada::SegmenterParams fd_test_params(uint64_t seed) {
    sfada::SegmenterParams p = sfada::init_params(seed);
    using P = sfada::SegmenterParams;
    const std::pair<size_t, size_t> bias_blocks[] = {
        {P::kEnc1B, P::kEnc2W},
        {P::kEnc2B, P::kDec1W},
        {P::kDec1B, P::kDec2W},
        {P::kDec2B, P::kHeadW},
    };
    for (const auto& [lo, hi] : bias_blocks)
        for (size_t j = lo; j < hi; ++j) p.flat[j] += 0.75;
    return p;
}

inline sfada::Sample fd_test_sample(uint64_t seed) { return random_sample(16, 16, 1000 + seed); }

// Seeds verified to keep every coordinate's probe interval free of activation
// switches; found by exhaustive search over candidate seeds.
inline constexpr uint64_t kFdSeeds[] = {28, 50, 69};

// Latent projection by explicit per-block triple loops, no pooling tricks.
inline sfada::LatentVector project_loops(const sfada::Prediction& pred,
                                         const std::string& id, int pool_k) {
    const int h = pred.mask.height, w = pred.mask.width, c = pred.penultimate.c;
    sfada::LatentVector out;
    out.sample_id = id;
    out.values.assign(static_cast<size_t>(h / pool_k) * (w / pool_k), 0.0);
    long fg = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) fg += pred.mask.at(y, x);
    if (fg == 0) {
        out.valid = false;
        return out;
    }
    for (int by = 0; by < h / pool_k; ++by) {
        for (int bx = 0; bx < w / pool_k; ++bx) {
            double best = -std::numeric_limits<double>::infinity();
            for (int y = by * pool_k; y < (by + 1) * pool_k; ++y) {
                for (int x = bx * pool_k; x < (bx + 1) * pool_k; ++x) {
                    double sum = 0.0;
                    for (int ci = 0; ci < c; ++ci) sum += pred.penultimate.at(ci, y, x);
                    best = std::max(best, sum / c * pred.mask.at(y, x));
                }
            }
            out.values[static_cast<size_t>(by) * (w / pool_k) + bx] = best / fg;
        }
    }
    return out;
}

// Exhaustive double-loop similarity: min over centroids of the squared
// distance, computed without any early termination.
inline double similarity_scan(const sfada::LatentVector& v, const sfada::ReferenceSet& refs) {
    std::vector<double> all;
    for (const auto& cen : refs.centroids) {
        double d = 0.0;
        for (size_t j = 0; j < cen.size(); ++j)
            d += (v.values[j] - cen[j]) * (v.values[j] - cen[j]);
        all.push_back(d);
    }
    return *std::min_element(all.begin(), all.end());
}

// Sort-based dual selection oracle: full sort of (distance, id) pairs, take
// the two budget halves from the ends.
struct SelectedSets {
    std::vector<std::string> invariant, specific;
};
inline SelectedSets stdr_sorted(std::vector<sfada::SimilarityScore> scores, size_t m) {
    std::stable_sort(scores.begin(), scores.end(),
                     [](const sfada::SimilarityScore& a, const sfada::SimilarityScore& b) {
                         if (a.distance != b.distance) return a.distance < b.distance;
                         return a.sample_id < b.sample_id;
                     });
    SelectedSets out;
    const size_t m_half = m / 2;
    for (size_t i = 0; i < m_half; ++i) out.invariant.push_back(scores[i].sample_id);
    // Highest distances, already excluding the invariant picks, but keeping
    // the id tie order of the descending sort.
    std::vector<sfada::SimilarityScore> rest(scores.begin() + m_half, scores.end());
    std::stable_sort(rest.begin(), rest.end(),
                     [](const sfada::SimilarityScore& a, const sfada::SimilarityScore& b) {
                         if (a.distance != b.distance) return a.distance > b.distance;
                         return a.sample_id < b.sample_id;
                     });
    for (size_t i = 0; i < m - m_half; ++i) out.specific.push_back(rest[i].sample_id);
    return out;
}

// All-pairs brute-force surface distances with the same nearest-rank rule.
inline std::vector<double> directed_brute(const sfada::SurfacePointSet& from,
                                          const sfada::SurfacePointSet& to) {
    std::vector<double> out;
    for (const auto& [ra, ca] : from.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [rb, cb] : to.points) {
            const double d = std::sqrt(double(ra - rb) * (ra - rb) + double(ca - cb) * (ca - cb));
            best = std::min(best, d);
        }
        out.push_back(best);
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct BruteSurfaceMetrics {
    std::optional<double> hd95, asd;
    double hausdorff_exact = 0.0;  // max over both full directed sets
};
inline BruteSurfaceMetrics surface_metrics_brute(const sfada::Mask& a, const sfada::Mask& b) {
    const sfada::SurfacePointSet sa = sfada::extract_surface(a);
    const sfada::SurfacePointSet sb = sfada::extract_surface(b);
    BruteSurfaceMetrics out;
    if (sa.points.empty() && sb.points.empty()) {
        out.hd95 = 0.0;
        out.asd = 0.0;
        return out;
    }
    if (sa.points.empty() || sb.points.empty()) return out;
    const std::vector<double> ab = directed_brute(sa, sb);
    const std::vector<double> ba = directed_brute(sb, sa);
    const auto rank95 = [](const std::vector<double>& d) {
        return d[static_cast<size_t>(std::ceil(0.95 * double(d.size()))) - 1];
    };
    out.hd95 = std::max(rank95(ab), rank95(ba));
    double total = 0.0;
    for (double d : ab) total += d;
    for (double d : ba) total += d;
    out.asd = total / double(ab.size() + ba.size());
    out.hausdorff_exact = std::max(ab.back(), ba.back());
    return out;
}

// Random blobby mask for metric property tests; may be empty.
inline sfada::Mask random_mask(int h, int w, uint64_t seed) {
    sfada::Rng rng(seed);
    sfada::Mask m = sfada::make_mask(h, w);
    const int blobs = static_cast<int>(rng.below(3));
    for (int b = 0; b < blobs; ++b) {
        const double cy = rng.uniform(0.0, h - 1.0), cx = rng.uniform(0.0, w - 1.0);
        const double r = rng.uniform(1.0, 0.3 * std::min(h, w));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if ((y - cy) * (y - cy) + (x - cx) * (x - cx) < r * r) m.at(y, x) = 1;
    }
    return m;
}

struct FdReport {
    double max_err = 0.0;  // worst relative error (absolute when both tiny)
    size_t bad = 0;        // coordinates over the 1e-4 threshold
    size_t worst_index = 0;
};

// Central finite differences over every parameter coordinate.
inline FdReport fd_gradient_check(const sfada::SegmenterParams& params, const sfada::Sample& s,
                                  double h = 1e-3) {
    const std::vector<const sfada::Sample*> batch{&s};
    const sfada::BatchGradient bg = sfada::batch_gradient(params, batch);

    FdReport report;
    sfada::SegmenterParams probe = params;
    for (size_t j = 0; j < probe.flat.size(); ++j) {
        const double saved = probe.flat[j];
        probe.flat[j] = saved + h;
        const double lp = loss_at(probe, s);
        probe.flat[j] = saved - h;
        const double lm = loss_at(probe, s);
        probe.flat[j] = saved;

        const double fd = (lp - lm) / (2.0 * h);
        const double an = bg.grad[j];
        const double denom = std::max(std::abs(fd), std::abs(an));
        const double err = denom > 1e-8 ? std::abs(fd - an) / denom : std::abs(fd - an);
        if (err > report.max_err) {
            report.max_err = err;
            report.worst_index = j;
        }
        if (err > 1e-4) ++report.bad;
    }
    return report;
}

}  // namespace oracle
