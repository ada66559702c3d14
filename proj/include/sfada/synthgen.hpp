#pragma once
#include "sfada/image.hpp"
#include "sfada/rng.hpp"

namespace sfada {

// Appearance-only style knobs; geometry (and thus masks) never depends on them.
struct DomainStyle {
    double gain = 1.0;
    double bias = 0.0;
    double gamma = 1.0;         // contrast exponent, [0.3, 3]
    double noise_sigma = 0.0;   // additive Gaussian, >= 0
    int blur_radius = 0;        // box filter half-width, >= 0
    double texture_freq = 3.0;  // background field cells across, > 0
};

struct SynthConfig {
    std::string name = "synthetic";  // dataset name, domain tag, id prefix
    int n_samples = 1;
    int height = 64;
    int width = 64;
    DomainStyle style;
    uint64_t seed = 0;
    int blob_count_min = 1;
    int blob_count_max = 3;
    double blob_radius_min = 4.0;
    double blob_radius_max = 9.0;
    // Per-sample appearance spread around the preset: gamma and noise_sigma
    // are offset by uniform(-j, +j) draws from a dedicated stream. The
    // jittered values must stay inside the DomainStyle bounds. Zero keeps
    // every sample exactly on the preset.
    double gamma_jitter = 0.0;
    double noise_jitter = 0.0;
};

void validate(const DomainStyle& style);
void validate(const SynthConfig& cfg);

// Each sample: smooth background field plus 1..count star-convex blobs whose
// exact interiors form the truth mask; the image is then styled by
// gain*(base)^gamma + bias, box-blurred, and noised. Deterministic per
// (seed, index) regardless of generation order.
Dataset generate_domain(const SynthConfig& cfg);

struct BenchmarkData {
    Dataset source;
    Dataset targetA;
    Dataset targetB;
};

// Scale knobs only; the three domain styles are fixed and define the
// transfer problem.
struct BenchmarkSpec {
    int n_source = 300;
    int n_target = 200;
    int height = 64;
    int width = 64;
};

void validate(const BenchmarkSpec& spec);

// Rescale cfg's blob radius band to its height/width (4..9 at 64x64).
void scale_blob_radii(SynthConfig& cfg);

// One geometry distribution, three styles with increasing appearance shift
// from the source. Domain contents depend only on (seed, spec).
BenchmarkData benchmark_data(uint64_t seed, const BenchmarkSpec& spec);

// benchmark_data at the canonical 300/200/200, 64x64 scale.
BenchmarkData default_benchmark(uint64_t seed);

}  // namespace sfada
