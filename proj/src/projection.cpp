#include "sfada/projection.hpp"

#include <cstdio>
#include <fstream>

#include "sfada/errors.hpp"

namespace sfada {

LatentVector project(const Prediction& pred, const std::string& sample_id, int pool_k) {
    const int h = pred.mask.height, w = pred.mask.width;
    if (pool_k <= 0) throw DataError("pool kernel must be positive");
    if (h % pool_k != 0 || w % pool_k != 0)
        throw DataError("image shape " + std::to_string(h) + "x" + std::to_string(w) +
                        " not divisible by pool kernel " + std::to_string(pool_k));
    const int c = pred.penultimate.c;

    LatentVector out;
    out.sample_id = sample_id;
    out.values.assign(static_cast<size_t>(h / pool_k) * (w / pool_k), 0.0);

    size_t fg = 0;
    for (uint8_t v : pred.mask.labels) fg += v;
    if (fg == 0) {
        out.valid = false;
        return out;
    }

    // Channel mean of the mask-weighted features.
    std::vector<double> mean(static_cast<size_t>(h) * w, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        const double* f = pred.penultimate.plane(ci);
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += f[i];
    }
    const double inv_c = 1.0 / c;
    for (size_t i = 0; i < mean.size(); ++i) mean[i] *= inv_c * pred.mask.labels[i];

    // Non-overlapping max pool, kernel = stride = pool_k, row-major flatten.
    const int oh = h / pool_k, ow = w / pool_k;
    const double inv_n = 1.0 / static_cast<double>(fg);
    for (int by = 0; by < oh; ++by) {
        for (int bx = 0; bx < ow; ++bx) {
            double best = mean[static_cast<size_t>(by * pool_k) * w + bx * pool_k];
            for (int y = by * pool_k; y < (by + 1) * pool_k; ++y)
                for (int x = bx * pool_k; x < (bx + 1) * pool_k; ++x)
                    best = std::max(best, mean[static_cast<size_t>(y) * w + x]);
            out.values[static_cast<size_t>(by) * ow + bx] = best * inv_n;
        }
    }
    return out;
}

std::vector<LatentVector> project_dataset(const SegmenterParams& params, const Dataset& ds,
                                          int pool_k) {
    std::vector<LatentVector> out(ds.size());
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 0; i < ds.size(); ++i) {
        const Sample& s = ds.samples[i];
        out[i] = project(predict_mask(params, s.image), s.id, pool_k);
    }
    return out;
}

void write_latent_csv(const std::vector<LatentVector>& vectors,
                      const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw DataError("cannot write " + file.string());
    const size_t len = vectors.empty() ? 0 : vectors.front().values.size();
    out << "sample_id,valid";
    for (size_t j = 0; j < len; ++j) out << ",v_" << j;
    out << "\n";
    char buf[32];
    for (const LatentVector& v : vectors) {
        if (v.values.size() != len) throw DataError("inconsistent latent vector lengths");
        out << v.sample_id << ',' << (v.valid ? 1 : 0);
        for (double x : v.values) {
            std::snprintf(buf, sizeof buf, "%.17g", x);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw DataError("failed writing " + file.string());
}

}  // namespace sfada
