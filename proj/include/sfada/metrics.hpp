#pragma once
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfada/image.hpp"

namespace sfada {

// Foreground pixels with at least one background 4-neighbor; the grid
// boundary counts as background. Points are in row-major order.
struct SurfacePointSet {
    std::vector<std::pair<int, int>> points;
};

struct MetricResult {
    double dsc = 0.0;
    // hd95/asd hold values only when defined: exactly one empty surface
    // makes both undefined (both empty means perfect agreement, 0).
    bool distances_defined = true;
    double hd95 = 0.0;
    double asd = 0.0;
};

// 2|A∩B| / (|A|+|B|); both masks empty -> 1.
double dsc(const Mask& a, const Mask& b);

SurfacePointSet extract_surface(const Mask& m);

// Symmetric 95th-percentile surface distance: per direction, nearest-rank
// percentile (index ceil(0.95 n), 1-based, sorted ascending) of the
// point-to-nearest-surface distances; the result is the max of the two
// directions, scaled by `spacing`. Both surfaces empty -> 0; exactly one
// empty -> nullopt.
std::optional<double> hd95(const Mask& a, const Mask& b, double spacing = 1.0);

// Symmetric average surface distance: sum of both directed distance sets
// over the total surface point count, scaled by `spacing`; empty-surface
// policy as hd95.
std::optional<double> asd(const Mask& a, const Mask& b, double spacing = 1.0);

MetricResult evaluate_pair(const Mask& pred, const Mask& truth, double spacing = 1.0);

// Mean and population std per metric; DSC reported as percent. Undefined
// hd95/asd entries are excluded from the distance aggregates and counted.
struct AggregateMetrics {
    size_t count = 0;
    size_t undefined_count = 0;
    double dsc_mean = 0.0, dsc_std = 0.0;
    double hd95_mean = 0.0, hd95_std = 0.0;
    double asd_mean = 0.0, asd_std = 0.0;
    std::vector<MetricResult> per_sample;
};

AggregateMetrics evaluate_dataset(const std::vector<Mask>& preds,
                                  const std::vector<Mask>& truths, double spacing = 1.0);

// CSV rows of (label, aggregate) under the header
// checkpoint,DSC_mean,DSC_std,HD95_mean,HD95_std,ASD_mean,ASD_std.
void write_metrics_csv(const std::vector<std::pair<std::string, AggregateMetrics>>& rows,
                       const std::filesystem::path& file);

}  // namespace sfada
