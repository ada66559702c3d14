#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfada/errors.hpp"

namespace sfada {

// Row-major real-valued intensity grid.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    double at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    double& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
};

// Binary label grid; same shape as its paired image.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> labels;

    uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return labels.size(); }
};

struct Sample {
    std::string id;
    Image image;
    std::optional<Mask> truth;
    std::string domain;
};

struct Dataset {
    std::string name;
    std::vector<Sample> samples;

    size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct SplitSpec {
    double train_fraction = 0.7;
    double valid_fraction = 0.1;
    double test_fraction = 0.2;
    uint64_t seed = 0;
};

Image make_image(int height, int width, double fill = 0.0);
Mask make_mask(int height, int width, uint8_t fill = 0);

// Throw DataError on any invariant violation.
void validate(const Image& img);
void validate(const Mask& mask);
void validate(const Sample& sample);
void validate(const Dataset& ds);
void validate(const SplitSpec& spec);

// Seeded shuffle then contiguous partition: floor(n*f_train), floor(n*f_valid),
// remainder to test. Rejects datasets where any part would be empty.
struct SplitResult {
    Dataset train;
    Dataset valid;
    Dataset test;
};
SplitResult split_dataset(const Dataset& ds, const SplitSpec& spec);

}  // namespace sfada
