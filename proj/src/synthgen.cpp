#include "sfada/synthgen.hpp"

#include <algorithm>
#include <cmath>

namespace sfada {

namespace {

// Fixed per-role stream tags so geometry, texture and noise draws never
// interleave; changing one style field cannot shift another role's stream.
constexpr uint64_t kGeometrySalt = 0x67656f6d;
constexpr uint64_t kTextureSalt = 0x74657874;
constexpr uint64_t kNoiseSalt = 0x6e6f6973;
constexpr uint64_t kJitterSalt = 0x6a747472;

struct Blob {
    double cy = 0, cx = 0, r0 = 0;
    double amp[4] = {0, 0, 0, 0};
    double phase[4] = {0, 0, 0, 0};
};

double star_radius(const Blob& b, double phi) {
    double r = 1.0;
    for (int k = 0; k < 4; ++k) r += b.amp[k] * std::cos((k + 1) * phi + b.phase[k]);
    return b.r0 * r;
}

std::string pad4(int i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

// Smooth low-frequency field: bilinear interpolation of a coarse seeded grid.
Image texture_field(int h, int w, double freq, Rng& rng) {
    const int cells = std::max(1, static_cast<int>(std::ceil(freq)));
    std::vector<double> grid(static_cast<size_t>(cells + 1) * (cells + 1));
    for (double& g : grid) g = rng.uniform();
    Image out = make_image(h, w);
    for (int y = 0; y < h; ++y) {
        const double v = (h > 1 ? static_cast<double>(y) / (h - 1) : 0.0) * cells;
        const int i0 = std::min(static_cast<int>(v), cells - 1);
        const double fv = v - i0;
        for (int x = 0; x < w; ++x) {
            const double u = (w > 1 ? static_cast<double>(x) / (w - 1) : 0.0) * cells;
            const int j0 = std::min(static_cast<int>(u), cells - 1);
            const double fu = u - j0;
            const auto g = [&](int i, int j) { return grid[static_cast<size_t>(i) * (cells + 1) + j]; };
            out.at(y, x) = g(i0, j0) * (1 - fu) * (1 - fv) + g(i0, j0 + 1) * fu * (1 - fv) +
                           g(i0 + 1, j0) * (1 - fu) * fv + g(i0 + 1, j0 + 1) * fu * fv;
        }
    }
    return out;
}

// Truncated-window separable mean filter; identity at radius 0.
Image box_blur(const Image& img, int radius) {
    if (radius <= 0) return img;
    Image tmp = make_image(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const int lo = std::max(0, x - radius), hi = std::min(img.width - 1, x + radius);
            double sum = 0;
            for (int i = lo; i <= hi; ++i) sum += img.at(y, i);
            tmp.at(y, x) = sum / (hi - lo + 1);
        }
    Image out = make_image(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        const int lo = std::max(0, y - radius), hi = std::min(img.height - 1, y + radius);
        for (int x = 0; x < img.width; ++x) {
            double sum = 0;
            for (int i = lo; i <= hi; ++i) sum += tmp.at(i, x);
            out.at(y, x) = sum / (hi - lo + 1);
        }
    }
    return out;
}

Sample make_sample(const SynthConfig& cfg, int index) {
    const int h = cfg.height, w = cfg.width;

    Rng geom(mix_seed(cfg.seed, static_cast<uint64_t>(index), kGeometrySalt));
    const int count =
        cfg.blob_count_min +
        static_cast<int>(geom.below(static_cast<uint64_t>(cfg.blob_count_max - cfg.blob_count_min + 1)));
    std::vector<Blob> blobs(count);
    for (Blob& b : blobs) {
        b.r0 = geom.uniform(cfg.blob_radius_min, cfg.blob_radius_max);
        // keep most of the blob inside the grid; clamp so the range stays valid
        const double my = std::min(1.5 * b.r0, 0.45 * (h - 1));
        const double mx = std::min(1.5 * b.r0, 0.45 * (w - 1));
        b.cy = geom.uniform(my, (h - 1) - my);
        b.cx = geom.uniform(mx, (w - 1) - mx);
        for (int k = 0; k < 4; ++k) {
            b.amp[k] = geom.uniform(-0.12, 0.12);
            b.phase[k] = geom.uniform(0.0, 2.0 * M_PI);
        }
    }

    Rng tex_rng(mix_seed(cfg.seed, static_cast<uint64_t>(index), kTextureSalt));
    const Image tex = texture_field(h, w, cfg.style.texture_freq, tex_rng);

    DomainStyle style = cfg.style;
    if (cfg.gamma_jitter > 0.0 || cfg.noise_jitter > 0.0) {
        Rng jit(mix_seed(cfg.seed, static_cast<uint64_t>(index), kJitterSalt));
        style.gamma += jit.uniform(-cfg.gamma_jitter, cfg.gamma_jitter);
        style.noise_sigma += jit.uniform(-cfg.noise_jitter, cfg.noise_jitter);
    }

    Sample s;
    s.id = cfg.name + "_" + pad4(index);
    s.domain = cfg.name;
    s.image = make_image(h, w);
    s.truth = make_mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double bump = 0.0;
            bool inside = false;
            for (const Blob& b : blobs) {
                const double dy = y - b.cy, dx = x - b.cx;
                const double d = std::hypot(dy, dx) - star_radius(b, std::atan2(dy, dx));
                if (d <= 0.0) inside = true;
                bump = std::max(bump, std::clamp((1.5 - d) / 3.0, 0.0, 1.0));
            }
            s.truth->at(y, x) = inside ? 1 : 0;
            const double base = 0.25 + 0.2 * tex.at(y, x) + 0.35 * bump;
            s.image.at(y, x) = style.gain * std::pow(base, style.gamma) + style.bias;
        }

    s.image = box_blur(s.image, style.blur_radius);
    Rng noise(mix_seed(cfg.seed, static_cast<uint64_t>(index), kNoiseSalt));
    for (double& v : s.image.pixels) v += style.noise_sigma * noise.normal();
    return s;
}

}  // namespace

void validate(const DomainStyle& style) {
    for (double v : {style.gain, style.bias, style.gamma, style.noise_sigma, style.texture_freq})
        if (!std::isfinite(v)) throw DataError("domain style contains non-finite field");
    if (style.gamma < 0.3 || style.gamma > 3.0) throw DataError("gamma must be in [0.3, 3]");
    if (style.noise_sigma < 0) throw DataError("noise_sigma must be >= 0");
    if (style.blur_radius < 0) throw DataError("blur_radius must be >= 0");
    if (style.texture_freq <= 0) throw DataError("texture_freq must be > 0");
}

void validate(const SynthConfig& cfg) {
    validate(cfg.style);
    if (cfg.n_samples < 1) throw DataError("n_samples must be >= 1");
    if (cfg.height < 8 || cfg.width < 8) throw DataError("synthetic images must be at least 8x8");
    if (cfg.blob_count_min < 1 || cfg.blob_count_max < cfg.blob_count_min)
        throw DataError("blob count range must satisfy 1 <= min <= max");
    if (cfg.blob_radius_min <= 0 || cfg.blob_radius_max < cfg.blob_radius_min)
        throw DataError("blob radius range must satisfy 0 < min <= max");
    if (cfg.blob_radius_max >= std::min(cfg.height, cfg.width) / 2.0)
        throw DataError("blob_radius_max must be below half the image size");
    if (!std::isfinite(cfg.gamma_jitter) || cfg.gamma_jitter < 0 ||
        !std::isfinite(cfg.noise_jitter) || cfg.noise_jitter < 0)
        throw DataError("style jitter must be finite and >= 0");
    if (cfg.style.gamma - cfg.gamma_jitter < 0.3 || cfg.style.gamma + cfg.gamma_jitter > 3.0)
        throw DataError("gamma_jitter leaves the [0.3, 3] gamma band");
    if (cfg.style.noise_sigma - cfg.noise_jitter < 0)
        throw DataError("noise_jitter exceeds noise_sigma");
}

Dataset generate_domain(const SynthConfig& cfg) {
    validate(cfg);
    Dataset ds;
    ds.name = cfg.name;
    ds.samples.resize(cfg.n_samples);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < cfg.n_samples; ++i) ds.samples[i] = make_sample(cfg, i);
    validate(ds);
    return ds;
}

void validate(const BenchmarkSpec& spec) {
    if (spec.n_source < 1 || spec.n_target < 1)
        throw UsageError("benchmark sample counts must be positive");
    if (spec.height < 8 || spec.width < 8)
        throw UsageError("benchmark images must be at least 8x8");
}

void scale_blob_radii(SynthConfig& cfg) {
    // Radii track resolution so every scale poses the same relative task;
    // at the canonical 64x64 this is the 4..9 band.
    const double scale = std::min(cfg.height, cfg.width) / 64.0;
    cfg.blob_radius_min = std::max(1.5, 4.0 * scale);
    cfg.blob_radius_max = std::max(cfg.blob_radius_min + 1.0, 9.0 * scale);
}

BenchmarkData benchmark_data(uint64_t seed, const BenchmarkSpec& spec) {
    validate(spec);
    SynthConfig cfg;
    cfg.height = spec.height;
    cfg.width = spec.width;
    scale_blob_radii(cfg);

    BenchmarkData out;

    cfg.name = "source";
    cfg.n_samples = spec.n_source;
    cfg.seed = mix_seed(seed, 1);
    cfg.style = DomainStyle{1.0, 0.0, 1.0, 0.02, 0, 3.0};
    out.source = generate_domain(cfg);

    // Targets carry per-sample jitter: heterogeneous appearance is what makes
    // a small labeled subset insufficient on its own, so the selection and
    // pseudo-label stages have signal to add.
    cfg.name = "targetA";
    cfg.n_samples = spec.n_target;
    cfg.seed = mix_seed(seed, 2);
    cfg.style = DomainStyle{1.1, 0.05, 2.2, 0.06, 1, 3.0};
    cfg.gamma_jitter = 0.5;
    cfg.noise_jitter = 0.04;
    out.targetA = generate_domain(cfg);

    cfg.name = "targetB";
    cfg.n_samples = spec.n_target;
    cfg.seed = mix_seed(seed, 3);
    cfg.style = DomainStyle{0.9, -0.03, 0.8, 0.08, 1, 4.0};
    cfg.gamma_jitter = 0.1;
    cfg.noise_jitter = 0.04;
    out.targetB = generate_domain(cfg);

    return out;
}

BenchmarkData default_benchmark(uint64_t seed) { return benchmark_data(seed, BenchmarkSpec{}); }

}  // namespace sfada
