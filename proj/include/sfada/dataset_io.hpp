#pragma once
#include <filesystem>

#include "sfada/image.hpp"

namespace sfada {

// Dataset directory layout:
//   manifest.json  — array of {id, image_file, mask_file?, domain}
//   images         — PGM P5, 16-bit big-endian, maxval 65535, linear to [0,1]
//   masks          — PGM P5, 8-bit, 0 = background, 255 = foreground

Dataset load_dataset(const std::filesystem::path& root);
void write_dataset(const Dataset& ds, const std::filesystem::path& root);

Image load_image_pgm(const std::filesystem::path& file);
void write_image_pgm(const Image& img, const std::filesystem::path& file);
Mask load_mask_pgm(const std::filesystem::path& file);
void write_mask_pgm(const Mask& mask, const std::filesystem::path& file);

}  // namespace sfada
