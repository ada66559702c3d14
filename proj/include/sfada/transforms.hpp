#pragma once
#include "sfada/image.hpp"
#include "sfada/rng.hpp"

namespace sfada {

// Shift/scale to zero mean and unit population variance; constant images map
// to all-zero instead of erroring.
Image normalize_image(const Image& img);

// Per-sample image normalization over a whole dataset; masks untouched.
Dataset normalize_dataset(const Dataset& ds);

// Nearest-neighbor resampling. Masks stay binary by construction.
Image resize_nearest(const Image& img, int out_h, int out_w);
Mask resize_nearest(const Mask& mask, int out_h, int out_w);

// One concrete augmentation draw, exposed so tests can force specific values.
struct AugmentDraw {
    bool flip = false;
    double angle_deg = 0.0;
    double noise_sigma = 0.05;
};

AugmentDraw draw_augment(Rng& rng);
Sample apply_augment(const Sample& sample, const AugmentDraw& draw, Rng& noise_rng);

// flip p=0.5, rotation U(-15, +15) degrees (bilinear image / nearest mask,
// fill = image minimum / mask 0), then Gaussian noise sigma=0.05 on the image.
Sample augment(const Sample& sample, Rng& rng);

}  // namespace sfada
