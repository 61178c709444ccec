#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace girl {

// 8-bit grayscale image, row-major, origin at the top-left corner.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  static ImageU8 blank(int w, int h, uint8_t v = 0) {
    ImageU8 im;
    im.width = w;
    im.height = h;
    im.pixels.assign(static_cast<size_t>(w) * h, v);
    return im;
  }

  uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
};

// Float grayscale image in [0,1], row-major.
struct ImageF32 {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  static ImageF32 blank(int w, int h, float v = 0.f) {
    ImageF32 im;
    im.width = w;
    im.height = h;
    im.pixels.assign(static_cast<size_t>(w) * h, v);
    return im;
  }

  float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
};

ImageF32 to_f32(const ImageU8& im);
ImageU8 to_u8(const ImageF32& im);  // clamps to [0,1] then rounds to 0..255

// Binary PGM (P5, maxval 255). Throws IoError on malformed input.
ImageU8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageU8& im);

// Bilinear resample to (w, h) using pixel-center alignment.
ImageF32 resize_bilinear(const ImageF32& im, int w, int h);

}  // namespace girl
