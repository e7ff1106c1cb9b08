#pragma once

#include <cstdint>
#include <utility>

#include "sfda/augment/ag.hpp"
#include "sfda/core/image.hpp"

namespace sfda::aug {

// Fourier style transfer: output keeps the content phase everywhere and takes
// the reference amplitude inside the centered low-frequency square of side
// floor(beta * min(H, W)). The _raw variant skips the final [0,1] clip so
// spectral properties can be checked exactly.
Image fda_transfer(const Image& content, const Image& reference, double beta);
Image fda_transfer_raw(const Image& content, const Image& reference, double beta);

// Per-channel moment matching blended with strength alpha.
Image stat_style_transfer(const Image& content, const Image& reference, double alpha);
Image stat_style_transfer_raw(const Image& content, const Image& reference, double alpha);

// Seeded random color mix + gamma + low-frequency gain field.
Image random_color_stylize(const Image& content, int64_t style_seed);

enum class WeatherKind { SNOW, FROST };

Image weather_overlay(const Image& content, WeatherKind kind, int severity, int64_t seed);

Image cartoonize(const Image& content, int levels, int smooth_iters = 3,
                 bool edge_overlay = true);

Image box_blur5(const Image& content);
Image add_noise(const Image& content, double stddev, int64_t seed);
Image bilateral5(const Image& content, double sigma_space, double sigma_range);

// Rotates both rasters by the same angle; labels resample nearest-neighbor
// and out-of-frame pixels become UNKNOWN (= num_classes).
std::pair<Image, SegMap> rotate_pair(const Image& img, const SegMap& seg, double angle_deg,
                                     int unknown_id);

// Synthesized uniform-noise reference (used by the Fourier stylizer).
Image noise_reference(int h, int w, int64_t seed);

// Dispatch with seeded internal randomness (reference choice, style seed,
// severity, angle). Non-geometric kinds return the seg-map unchanged.
std::pair<Image, SegMap> apply_ag(const AugContext& ctx, const AugmentationGroup& ag,
                                  const Image& image, const SegMap& segmap, int64_t rng_seed);

}  // namespace sfda::aug
