#include "girl/retina.hpp"

#include <algorithm>
#include <cmath>

#include "girl/errors.hpp"

namespace girl {

namespace {

constexpr float kBinomial5[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16,
                                 1.f / 16};

inline int clamp_idx(int i, int n) { return std::min(std::max(i, 0), n - 1); }

// Separable 5-tap binomial smoothing with edge replication. Written in the
// center + sum(w * (tap - center)) form so constant regions pass through
// bit-exactly.
ImageF32 binomial_blur(const ImageF32& im) {
  ImageF32 tmp = ImageF32::blank(im.width, im.height);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x) {
      const float c = im.at(x, y);
      float s = 0.f;
      for (int t = -2; t <= 2; ++t)
        s += kBinomial5[t + 2] * (im.at(clamp_idx(x + t, im.width), y) - c);
      tmp.at(x, y) = c + s;
    }
  ImageF32 out = ImageF32::blank(im.width, im.height);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x) {
      const float c = tmp.at(x, y);
      float s = 0.f;
      for (int t = -2; t <= 2; ++t)
        s += kBinomial5[t + 2] * (tmp.at(x, clamp_idx(y + t, im.height)) - c);
      out.at(x, y) = c + s;
    }
  return out;
}

ImageF32 decimate2(const ImageF32& im) {
  ImageF32 out = ImageF32::blank((im.width + 1) / 2, (im.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = im.at(2 * x, 2 * y);
  return out;
}

}  // namespace

void FoveationConfig::validate() const {
  if (fovea_radius_px <= 0) throw ValidationError("fovea radius must be > 0");
  if (levels < 2) throw ValidationError("pyramid needs at least 2 levels");
  if (width % 32 != 0 || height % 32 != 0)
    throw ValidationError("image extents must be divisible by 32");
  if (deg_per_px <= 0.f || e2_deg <= 0.f)
    throw ValidationError("scale parameters must be positive");
}

BlurPyramid build_pyramid(const ImageF32& image, const FoveationConfig& cfg) {
  cfg.validate();
  if (image.width != cfg.width || image.height != cfg.height)
    throw ShapeError("build_pyramid: image does not match config dimensions");
  BlurPyramid pyr;
  pyr.width = cfg.width;
  pyr.height = cfg.height;
  pyr.levels.reserve(cfg.levels);
  pyr.levels.push_back(image);
  ImageF32 small = image;
  for (int k = 1; k < cfg.levels; ++k) {
    small = decimate2(binomial_blur(small));
    pyr.levels.push_back(resize_bilinear(small, cfg.width, cfg.height));
  }
  return pyr;
}

int blur_level_for_dist2(float d2, const FoveationConfig& cfg) {
  // Full acuity on the disc circumscribing the 2r x 2r foveal window, so
  // the whole window renders at source fidelity; the level stays a pure
  // function of eccentricity, which keeps it monotone in distance.
  const float r = static_cast<float>(cfg.fovea_radius_px);
  if (d2 <= 2.f * r * r) return 0;
  const float e = cfg.deg_per_px * std::sqrt(d2);
  // R(e) = e2/(e2+e); level = round(log2(1/R)).
  const float k = std::log2((cfg.e2_deg + e) / cfg.e2_deg);
  const int ki = static_cast<int>(std::lround(k));
  return std::min(std::max(ki, 0), cfg.levels - 1);
}

RetImage foveate(const BlurPyramid& pyr, PixelPoint fixation,
                 const FoveationConfig& cfg) {
  return cumulative_foveate(pyr, {fixation}, cfg);
}

RetImage cumulative_foveate(const BlurPyramid& pyr,
                            const std::vector<PixelPoint>& fixations,
                            const FoveationConfig& cfg) {
  cfg.validate();
  if (pyr.width != cfg.width || pyr.height != cfg.height ||
      static_cast<int>(pyr.levels.size()) != cfg.levels)
    throw ShapeError("cumulative_foveate: pyramid does not match config");
  if (fixations.empty())
    throw ValidationError("cumulative_foveate: no fixations given");
  for (const PixelPoint& f : fixations)
    if (f.x < 0.f || f.x >= cfg.width || f.y < 0.f || f.y >= cfg.height)
      throw ValidationError("fixation out of image bounds");

  RetImage ret;
  ret.width = cfg.width;
  ret.height = cfg.height;
  ret.level_map.assign(static_cast<size_t>(cfg.width) * cfg.height,
                       static_cast<uint8_t>(cfg.levels - 1));
  for (const PixelPoint& f : fixations) {
    size_t i = 0;
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x, ++i) {
        const float dx = x - f.x;
        const float dy = y - f.y;
        const int lv = blur_level_for_dist2(dx * dx + dy * dy, cfg);
        if (lv < ret.level_map[i]) ret.level_map[i] = static_cast<uint8_t>(lv);
      }
  }
  ret.pixels = ImageF32::blank(cfg.width, cfg.height);
  size_t i = 0;
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x, ++i)
      ret.pixels.at(x, y) = pyr.levels[ret.level_map[i]].at(x, y);
  return ret;
}

ImageU8 level_map_raster(const RetImage& ret, const FoveationConfig& cfg) {
  ImageU8 out = ImageU8::blank(ret.width, ret.height);
  const int denom = std::max(cfg.levels - 1, 1);
  for (size_t i = 0; i < ret.level_map.size(); ++i)
    out.pixels[i] = static_cast<uint8_t>(ret.level_map[i] * 255 / denom);
  return out;
}

}  // namespace girl
