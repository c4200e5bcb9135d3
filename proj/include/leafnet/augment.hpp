#pragma once

#include <cstdint>

#include "leafnet/rng.hpp"
#include "leafnet/tensor.hpp"

namespace leafnet {

// Images are (C,H,W) tensors with values in [0,1].

struct AugmentConfig {
    bool horizontal_flip = false;
    double rotation_range = 0.0;  // degrees; draw is uniform in [-range, +range]
    double zoom_range = 0.0;      // factor drawn in [1-range, 1+range]
    double shift_range = 0.0;     // fraction of extent, drawn in [-range, +range]
    uint64_t seed = 0;

    void validate() const;
};

// Mirror indexing without duplicating the border pixel: ...2,1,0,1,2...
size_t reflect_index(long long i, size_t n);

Tensor horizontal_flip(const Tensor& img);
// Rotation about the image center, bilinear, reflect fill. Multiples of
// 90 degrees use exact integer cos/sin so grid-aligned rotations are exact.
Tensor rotate(const Tensor& img, double angle_deg);
Tensor zoom(const Tensor& img, double factor);
Tensor shift(const Tensor& img, double dx_frac, double dy_frac);
// Corner-aligned bilinear resize.
Tensor resize(const Tensor& img, size_t out_h, size_t out_w);

struct AugmentDraw {
    bool flip = false;
    double angle = 0.0, zoom_factor = 1.0, dx = 0.0, dy = 0.0;
};
// Five draws in fixed order, so the stream layout does not depend on the
// configured ranges.
AugmentDraw draw_augment(const AugmentConfig& cfg, Rng& rng);

// flip -> rotate -> zoom -> shift, parameters drawn from the stream keyed
// by (cfg.seed, sample_key).
Tensor augment_sample(const Tensor& img, const AugmentConfig& cfg, uint64_t sample_key);

}  // namespace leafnet
