#include "sfada/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "sfada/errors.hpp"
#include "sfada/rng.hpp"

namespace sfada {

namespace {

double dist_sq(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int nearest_index(const std::vector<double>& p, const std::vector<std::vector<double>>& centroids,
                  double* out_d = nullptr) {
    int best = 0;
    double bd = dist_sq(p, centroids[0]);
    for (size_t k = 1; k < centroids.size(); ++k) {
        const double d = dist_sq(p, centroids[k]);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(k);
        }
    }
    if (out_d) *out_d = bd;
    return best;
}

std::vector<std::vector<double>> seed_plus_plus(const std::vector<std::vector<double>>& points,
                                                int k, Rng& rng) {
    const size_t n = points.size();
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[rng.below(n)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double d;
            nearest_index(points[i], centroids, &d);
            d2[i] = d;
            total += d;
        }
        size_t pick;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All remaining mass is zero (duplicate points); fall back to uniform.
            pick = rng.below(n);
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

}  // namespace

void validate(const ReferenceSet& refs) {
    if (refs.k < 1 || refs.centroids.size() != static_cast<size_t>(refs.k))
        throw DataError("reference set centroid count does not match K");
    const size_t len = refs.centroids.front().size();
    for (const auto& c : refs.centroids) {
        if (c.size() != len) throw DataError("reference centroids have unequal lengths");
        for (double v : c)
            if (!std::isfinite(v)) throw DataError("non-finite reference centroid");
    }
    if (!(refs.inertia >= 0.0)) throw DataError("negative clustering inertia");
}

ReferenceSet kmeans_fit(const std::vector<LatentVector>& vectors, int k, uint64_t seed,
                        int max_iters, double tol) {
    if (k < 1) throw DataError("K must be at least 1");
    if (max_iters < 1) throw DataError("max_iters must be at least 1");

    std::vector<std::vector<double>> points;
    for (const LatentVector& v : vectors)
        if (v.valid) points.push_back(v.values);
    if (points.size() < static_cast<size_t>(k))
        throw DataError("fewer valid vectors (" + std::to_string(points.size()) +
                        ") than clusters (" + std::to_string(k) + ")");
    const size_t len = points.front().size();
    for (const auto& p : points)
        if (p.size() != len) throw DataError("latent vectors have unequal lengths");

    // Canonical input order: sorting makes the fit independent of how the
    // caller ordered the vectors.
    std::sort(points.begin(), points.end());
    const size_t n = points.size();

    Rng rng(seed);
    std::vector<std::vector<double>> centroids = seed_plus_plus(points, k, rng);

    ReferenceSet refs;
    refs.k = k;
    refs.seed = seed;
    std::vector<int> owner(n, 0);
    for (int it = 0; it < max_iters; ++it) {
        double objective = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double d;
            owner[i] = nearest_index(points[i], centroids, &d);
            objective += d;
        }
        refs.objective_trace.push_back(objective);

        std::vector<std::vector<double>> next(k, std::vector<double>(len, 0.0));
        std::vector<size_t> counts(k, 0);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = 0; j < len; ++j) next[owner[i]][j] += points[i][j];
            ++counts[owner[i]];
        }
        std::vector<char> reseeded(n, 0);
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (size_t j = 0; j < len; ++j) next[c][j] /= static_cast<double>(counts[c]);
                continue;
            }
            // Reseed an empty cluster to the point farthest from its
            // assigned centroid, each point used at most once per pass.
            double worst = -1.0;
            size_t pick = 0;
            for (size_t i = 0; i < n; ++i) {
                if (reseeded[i]) continue;
                const double d = dist_sq(points[i], centroids[owner[i]]);
                if (d > worst) {
                    worst = d;
                    pick = i;
                }
            }
            reseeded[pick] = 1;
            next[c] = points[pick];
        }

        double movement = 0.0;
        for (int c = 0; c < k; ++c) movement = std::max(movement, std::sqrt(dist_sq(next[c], centroids[c])));
        centroids = std::move(next);
        refs.iterations_run = it + 1;
        if (movement < tol) break;
    }

    std::sort(centroids.begin(), centroids.end());
    refs.centroids = std::move(centroids);
    double final_objective = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d;
        nearest_index(points[i], refs.centroids, &d);
        final_objective += d;
    }
    refs.objective_trace.push_back(final_objective);
    refs.inertia = final_objective;
    validate(refs);
    return refs;
}

int assign(const LatentVector& v, const ReferenceSet& refs) {
    validate(refs);
    if (!v.valid) throw DataError("cannot assign an invalid latent vector");
    if (v.values.size() != refs.centroids.front().size())
        throw DataError("latent vector length does not match centroids");
    return nearest_index(v.values, refs.centroids);
}

void save_reference(const ReferenceSet& refs, const std::filesystem::path& file) {
    validate(refs);
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    char buf[32];
    for (const auto& c : refs.centroids) {
        for (size_t j = 0; j < c.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", c[j]);
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw DataError("failed writing " + file.string());

    nlohmann::json meta{{"K", refs.k},
                        {"pool_k", refs.pool_k},
                        {"inertia", refs.inertia},
                        {"seed", refs.seed}};
    std::ofstream side(file.string() + ".json");
    if (!side) throw DataError("cannot write " + file.string() + ".json");
    side << meta.dump(2) << "\n";
}

ReferenceSet load_reference(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    ReferenceSet refs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            try {
                row.push_back(std::stod(line.substr(pos, comma - pos)));
            } catch (const std::exception&) {
                throw DataError("malformed centroid value in " + file.string());
            }
            pos = comma + 1;
        }
        refs.centroids.push_back(std::move(row));
    }
    if (refs.centroids.empty()) throw DataError("no centroids in " + file.string());
    refs.k = static_cast<int>(refs.centroids.size());

    std::ifstream side(file.string() + ".json");
    if (!side) throw DataError("missing reference sidecar " + file.string() + ".json");
    nlohmann::json meta;
    try {
        side >> meta;
        if (meta.at("K").get<int>() != refs.k)
            throw DataError("reference sidecar K does not match centroid rows");
        refs.pool_k = meta.at("pool_k").get<int>();
        refs.inertia = meta.at("inertia").get<double>();
        refs.seed = meta.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed reference sidecar: " + std::string(e.what()));
    }
    validate(refs);
    return refs;
}

}  // namespace sfada
