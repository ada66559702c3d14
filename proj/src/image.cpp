#include "sfada/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "sfada/rng.hpp"

namespace sfada {

Image make_image(int height, int width, double fill) {
    Image img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<size_t>(height) * width, fill);
    return img;
}

Mask make_mask(int height, int width, uint8_t fill) {
    Mask m;
    m.height = height;
    m.width = width;
    m.labels.assign(static_cast<size_t>(height) * width, fill);
    return m;
}

void validate(const Image& img) {
    if (img.height < 8 || img.width < 8)
        throw DataError("image must be at least 8x8, got " + std::to_string(img.height) + "x" +
                        std::to_string(img.width));
    if (img.pixels.size() != static_cast<size_t>(img.height) * img.width)
        throw DataError("image pixel buffer does not match height*width");
    for (double v : img.pixels)
        if (!std::isfinite(v)) throw DataError("image contains non-finite pixel");
}

void validate(const Mask& mask) {
    if (mask.height <= 0 || mask.width <= 0) throw DataError("mask has non-positive shape");
    if (mask.labels.size() != static_cast<size_t>(mask.height) * mask.width)
        throw DataError("mask label buffer does not match height*width");
    for (uint8_t v : mask.labels)
        if (v > 1) throw DataError("mask contains label outside {0,1}");
}

void validate(const Sample& sample) {
    if (sample.id.empty()) throw DataError("sample has empty id");
    validate(sample.image);
    if (sample.truth) {
        validate(*sample.truth);
        if (sample.truth->height != sample.image.height || sample.truth->width != sample.image.width)
            throw DataError("sample '" + sample.id + "': mask shape differs from image shape");
    }
}

void validate(const Dataset& ds) {
    if (ds.empty()) throw DataError("dataset '" + ds.name + "' is empty");
    std::unordered_set<std::string> seen;
    const int h = ds.samples.front().image.height;
    const int w = ds.samples.front().image.width;
    for (const Sample& s : ds.samples) {
        validate(s);
        if (!seen.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "'");
        if (s.image.height != h || s.image.width != w)
            throw DataError("dataset '" + ds.name + "' mixes image shapes");
    }
}

void validate(const SplitSpec& spec) {
    if (spec.train_fraction <= 0 || spec.valid_fraction <= 0 || spec.test_fraction <= 0)
        throw DataError("split fractions must be positive");
    const double sum = spec.train_fraction + spec.valid_fraction + spec.test_fraction;
    if (std::abs(sum - 1.0) > 1e-9)
        throw DataError("split fractions must sum to 1, got " + std::to_string(sum));
}

SplitResult split_dataset(const Dataset& ds, const SplitSpec& spec) {
    validate(ds);
    validate(spec);
    const size_t n = ds.size();
    if (n < 10) throw DataError("split needs at least 10 samples, got " + std::to_string(n));

    // floor of the exact rational; the epsilon absorbs binary representation
    // error in fractions like 0.7.
    const auto part = [n](double f) {
        return static_cast<size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    };
    const size_t n_train = part(spec.train_fraction);
    const size_t n_valid = part(spec.valid_fraction);
    if (n_train + n_valid >= n) throw DataError("split leaves no test samples");
    const size_t n_test = n - n_train - n_valid;
    if (n_train == 0 || n_valid == 0 || n_test == 0)
        throw DataError("dataset too small: a split part would be empty");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(spec.seed);
    for (size_t i = n - 1; i > 0; --i) {
        size_t j = rng.below(i + 1);
        std::swap(order[i], order[j]);
    }

    SplitResult out;
    out.train.name = ds.name + "/train";
    out.valid.name = ds.name + "/valid";
    out.test.name = ds.name + "/test";
    for (size_t i = 0; i < n; ++i) {
        const Sample& s = ds.samples[order[i]];
        if (i < n_train)
            out.train.samples.push_back(s);
        else if (i < n_train + n_valid)
            out.valid.samples.push_back(s);
        else
            out.test.samples.push_back(s);
    }
    return out;
}

}  // namespace sfada
