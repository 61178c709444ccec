#pragma once

#include <cstdint>
#include <vector>

#include "girl/image.hpp"

namespace girl {

struct PixelPoint {
  float x = 0.f;
  float y = 0.f;
};

// Geometry and acuity parameters of the retina transform. The resolution
// falloff R(e) = e2/(e2 + e) uses the standard published constants; the
// display scale default comes from a 54-degree-wide, 512-pixel view.
struct FoveationConfig {
  int width = 512;
  int height = 320;
  int fovea_radius_px = 16;  // 32x32 full-acuity window
  float deg_per_px = 54.f / 512.f;
  int levels = 5;
  float e2_deg = 2.3f;

  void validate() const;
};

// L progressively low-passed copies of one image, all at source resolution.
// Level 0 aliases the input exactly; level k is level k-1 filtered with a
// 5-tap binomial kernel on both axes, decimated 2x, and re-expanded.
struct BlurPyramid {
  int width = 0;
  int height = 0;
  std::vector<ImageF32> levels;
};

// Retina-transformed image: pixels gathered per-pixel from the pyramid
// level chosen by the blur-level map.
struct RetImage {
  int width = 0;
  int height = 0;
  ImageF32 pixels;
  std::vector<uint8_t> level_map;  // values in [0, levels-1]

  uint8_t level_at(int x, int y) const {
    return level_map[static_cast<size_t>(y) * width + x];
  }
};

BlurPyramid build_pyramid(const ImageF32& image, const FoveationConfig& cfg);

// Blur level for a pixel at squared distance d2 (px^2) from the fixation:
// 0 inside the fovea radius, else clamp(round(log2(1/R(e))), 0, L-1).
int blur_level_for_dist2(float d2, const FoveationConfig& cfg);

RetImage foveate(const BlurPyramid& pyr, PixelPoint fixation,
                 const FoveationConfig& cfg);

// Per-pixel minimum level over the fixation sequence ("cumulative
// de-blurring"): each new fixation can only sharpen.
RetImage cumulative_foveate(const BlurPyramid& pyr,
                            const std::vector<PixelPoint>& fixations,
                            const FoveationConfig& cfg);

// Debug export: level map scaled onto 0..255.
ImageU8 level_map_raster(const RetImage& ret, const FoveationConfig& cfg);

}  // namespace girl
