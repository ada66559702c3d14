#include "sfada/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sfada/errors.hpp"

namespace sfada {

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
    if (a.height != b.height || a.width != b.width)
        throw DataError("mask shapes differ: " + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                        std::to_string(b.width));
}

// Surface points bucketed by row for pruned nearest-neighbor queries.
struct RowIndex {
    int min_row = 0;
    std::vector<std::vector<int>> cols_by_row;

    explicit RowIndex(const SurfacePointSet& s) {
        min_row = s.points.front().first;
        const int max_row = s.points.back().first;
        cols_by_row.resize(max_row - min_row + 1);
        for (const auto& [r, c] : s.points) cols_by_row[r - min_row].push_back(c);
    }

    // Exact squared distance to the nearest surface point: rows are scanned
    // outward from the query row and abandoned once the row offset alone
    // exceeds the best distance found.
    double nearest_sq(int r, int c) const {
        const int rows = static_cast<int>(cols_by_row.size());
        double best = std::numeric_limits<double>::infinity();
        for (int dr = 0;; ++dr) {
            const double dr2 = static_cast<double>(dr) * dr;
            if (dr2 >= best) break;
            const int above = r - dr - min_row, below = r + dr - min_row;
            if (above < 0 && below >= rows) break;
            for (const int rr : {below, dr == 0 ? -1 : above}) {
                if (rr < 0 || rr >= rows) continue;
                const auto& cols = cols_by_row[rr];
                if (cols.empty()) continue;
                const auto it = std::lower_bound(cols.begin(), cols.end(), c);
                if (it != cols.end()) {
                    const double dc = static_cast<double>(*it - c);
                    best = std::min(best, dr2 + dc * dc);
                }
                if (it != cols.begin()) {
                    const double dc = static_cast<double>(*(it - 1) - c);
                    best = std::min(best, dr2 + dc * dc);
                }
            }
        }
        return best;
    }
};

// Ascending distances from every point of `from` to the nearest point of `to`.
std::vector<double> directed_distances(const SurfacePointSet& from, const RowIndex& to) {
    std::vector<double> d;
    d.reserve(from.points.size());
    for (const auto& [r, c] : from.points) d.push_back(std::sqrt(to.nearest_sq(r, c)));
    std::sort(d.begin(), d.end());
    return d;
}

double nearest_rank_95(const std::vector<double>& sorted) {
    const size_t rank = static_cast<size_t>(
        std::ceil(0.95 * static_cast<double>(sorted.size())));
    return sorted[rank - 1];
}

struct SurfacePair {
    SurfacePointSet a, b;
    bool both_empty() const { return a.points.empty() && b.points.empty(); }
    bool one_empty() const { return a.points.empty() != b.points.empty(); }
};

SurfacePair surfaces_of(const Mask& a, const Mask& b) {
    require_same_shape(a, b);
    return {extract_surface(a), extract_surface(b)};
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double dsc(const Mask& a, const Mask& b) {
    require_same_shape(a, b);
    size_t na = 0, nb = 0, overlap = 0;
    for (size_t i = 0; i < a.labels.size(); ++i) {
        na += a.labels[i];
        nb += b.labels[i];
        overlap += a.labels[i] & b.labels[i];
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(na + nb);
}

SurfacePointSet extract_surface(const Mask& m) {
    SurfacePointSet s;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(y, x)) continue;
            const bool border = y == 0 || y == m.height - 1 || x == 0 || x == m.width - 1;
            if (border || !m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) ||
                !m.at(y, x + 1))
                s.points.emplace_back(y, x);
        }
    }
    return s;
}

std::optional<double> hd95(const Mask& a, const Mask& b, double spacing) {
    const SurfacePair s = surfaces_of(a, b);
    if (s.both_empty()) return 0.0;
    if (s.one_empty()) return std::nullopt;
    const RowIndex ia(s.a), ib(s.b);
    const double forward = nearest_rank_95(directed_distances(s.a, ib));
    const double backward = nearest_rank_95(directed_distances(s.b, ia));
    return std::max(forward, backward) * spacing;
}

std::optional<double> asd(const Mask& a, const Mask& b, double spacing) {
    const SurfacePair s = surfaces_of(a, b);
    if (s.both_empty()) return 0.0;
    if (s.one_empty()) return std::nullopt;
    const RowIndex ia(s.a), ib(s.b);
    double total = 0.0;
    for (const auto& [r, c] : s.a.points) total += std::sqrt(ib.nearest_sq(r, c));
    for (const auto& [r, c] : s.b.points) total += std::sqrt(ia.nearest_sq(r, c));
    return total / static_cast<double>(s.a.points.size() + s.b.points.size()) * spacing;
}

MetricResult evaluate_pair(const Mask& pred, const Mask& truth, double spacing) {
    MetricResult r;
    r.dsc = dsc(pred, truth);
    const std::optional<double> h = hd95(pred, truth, spacing);
    const std::optional<double> a = asd(pred, truth, spacing);
    r.distances_defined = h.has_value();
    if (h) r.hd95 = *h;
    if (a) r.asd = *a;
    return r;
}

AggregateMetrics evaluate_dataset(const std::vector<Mask>& preds,
                                  const std::vector<Mask>& truths, double spacing) {
    if (preds.size() != truths.size())
        throw DataError("prediction count " + std::to_string(preds.size()) +
                        " does not match truth count " + std::to_string(truths.size()));
    if (preds.empty()) throw DataError("cannot evaluate an empty mask list");

    for (size_t i = 0; i < preds.size(); ++i) require_same_shape(preds[i], truths[i]);

    AggregateMetrics agg;
    agg.count = preds.size();
    agg.per_sample.resize(preds.size());
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 0; i < preds.size(); ++i)
        agg.per_sample[i] = evaluate_pair(preds[i], truths[i], spacing);

    std::vector<double> dscs, hds, asds;
    for (const MetricResult& r : agg.per_sample) {
        dscs.push_back(100.0 * r.dsc);
        if (r.distances_defined) {
            hds.push_back(r.hd95);
            asds.push_back(r.asd);
        } else {
            ++agg.undefined_count;
        }
    }
    agg.dsc_mean = mean_of(dscs);
    agg.dsc_std = population_std(dscs, agg.dsc_mean);
    if (!hds.empty()) {
        agg.hd95_mean = mean_of(hds);
        agg.hd95_std = population_std(hds, agg.hd95_mean);
        agg.asd_mean = mean_of(asds);
        agg.asd_std = population_std(asds, agg.asd_mean);
    }
    return agg;
}

void write_metrics_csv(const std::vector<std::pair<std::string, AggregateMetrics>>& rows,
                       const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    out << "checkpoint,DSC_mean,DSC_std,HD95_mean,HD95_std,ASD_mean,ASD_std\n";
    char buf[128];
    for (const auto& [label, m] : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", m.dsc_mean, m.dsc_std,
                      m.hd95_mean, m.hd95_std, m.asd_mean, m.asd_std);
        out << label << ',' << buf << "\n";
    }
    if (!out) throw DataError("failed writing " + file.string());
}

}  // namespace sfada
