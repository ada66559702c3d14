#include "sfada/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace sfada {

Image normalize_image(const Image& img) {
    validate(img);
    const size_t n = img.size();
    double sum = 0.0;
    for (double v : img.pixels) sum += v;
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (double v : img.pixels) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);

    Image out = img;
    if (sd <= 1e-12 * (std::abs(mean) + 1e-12)) {
        std::fill(out.pixels.begin(), out.pixels.end(), 0.0);
        return out;
    }
    for (double& v : out.pixels) v = (v - mean) / sd;
    return out;
}

Dataset normalize_dataset(const Dataset& ds) {
    Dataset out = ds;
    for (Sample& s : out.samples) s.image = normalize_image(s.image);
    return out;
}

namespace {

// Integer source index for nearest-neighbor: floor(i * in / out).
inline int nn_index(int i, int in_dim, int out_dim) {
    return static_cast<int>((static_cast<int64_t>(i) * in_dim) / out_dim);
}

}  // namespace

Image resize_nearest(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw DataError("resize target must be positive");
    Image out = make_image(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = nn_index(y, img.height, out_h);
        for (int x = 0; x < out_w; ++x) out.at(y, x) = img.at(sy, nn_index(x, img.width, out_w));
    }
    return out;
}

Mask resize_nearest(const Mask& mask, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw DataError("resize target must be positive");
    Mask out = make_mask(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = nn_index(y, mask.height, out_h);
        for (int x = 0; x < out_w; ++x) out.at(y, x) = mask.at(sy, nn_index(x, mask.width, out_w));
    }
    return out;
}

AugmentDraw draw_augment(Rng& rng) {
    AugmentDraw d;
    d.flip = rng.uniform() < 0.5;
    d.angle_deg = rng.uniform(-15.0, 15.0);
    d.noise_sigma = 0.05;
    return d;
}

namespace {

Image flip_horizontal(const Image& img) {
    Image out = make_image(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(y, x) = img.at(y, img.width - 1 - x);
    return out;
}

Mask flip_horizontal(const Mask& m) {
    Mask out = make_mask(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
    return out;
}

Image rotate_bilinear(const Image& img, double angle_deg, double fill) {
    const double th = angle_deg * M_PI / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double cy = (img.height - 1) * 0.5, cx = (img.width - 1) * 0.5;
    Image out = make_image(img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
        const double dy = y - cy;
        for (int x = 0; x < img.width; ++x) {
            const double dx = x - cx;
            // inverse rotation of the output grid into source coordinates
            const double sx = cx + c * dx + s * dy;
            const double sy = cy - s * dx + c * dy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            const auto sample = [&](int yy, int xx) {
                return (yy >= 0 && yy < img.height && xx >= 0 && xx < img.width) ? img.at(yy, xx)
                                                                                : fill;
            };
            out.at(y, x) = sample(y0, x0) * (1 - fx) * (1 - fy) + sample(y0, x0 + 1) * fx * (1 - fy) +
                           sample(y0 + 1, x0) * (1 - fx) * fy + sample(y0 + 1, x0 + 1) * fx * fy;
        }
    }
    return out;
}

Mask rotate_nearest(const Mask& m, double angle_deg) {
    const double th = angle_deg * M_PI / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    const double cy = (m.height - 1) * 0.5, cx = (m.width - 1) * 0.5;
    Mask out = make_mask(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
        const double dy = y - cy;
        for (int x = 0; x < m.width; ++x) {
            const double dx = x - cx;
            const double sx = cx + c * dx + s * dy;
            const double sy = cy - s * dx + c * dy;
            const int xi = static_cast<int>(std::lround(sx));
            const int yi = static_cast<int>(std::lround(sy));
            out.at(y, x) =
                (yi >= 0 && yi < m.height && xi >= 0 && xi < m.width) ? m.at(yi, xi) : uint8_t{0};
        }
    }
    return out;
}

}  // namespace

Sample apply_augment(const Sample& sample, const AugmentDraw& draw, Rng& noise_rng) {
    if (!sample.truth) throw DataError("augment requires a truth mask");
    validate(sample);

    Sample out = sample;
    if (draw.flip) {
        out.image = flip_horizontal(out.image);
        out.truth = flip_horizontal(*out.truth);
    }
    if (draw.angle_deg != 0.0) {
        const double fill = *std::min_element(out.image.pixels.begin(), out.image.pixels.end());
        out.image = rotate_bilinear(out.image, draw.angle_deg, fill);
        out.truth = rotate_nearest(*out.truth, draw.angle_deg);
    }
    if (draw.noise_sigma > 0.0) {
        for (double& v : out.image.pixels) v += draw.noise_sigma * noise_rng.normal();
    }
    return out;
}

Sample augment(const Sample& sample, Rng& rng) {
    const AugmentDraw draw = draw_augment(rng);
    return apply_augment(sample, draw, rng);
}

}  // namespace sfada
