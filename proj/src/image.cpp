#include "girl/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "girl/errors.hpp"

namespace girl {

ImageF32 to_f32(const ImageU8& im) {
  ImageF32 out;
  out.width = im.width;
  out.height = im.height;
  out.pixels.resize(im.pixels.size());
  for (size_t i = 0; i < im.pixels.size(); ++i)
    out.pixels[i] = im.pixels[i] / 255.f;
  return out;
}

ImageU8 to_u8(const ImageF32& im) {
  ImageU8 out;
  out.width = im.width;
  out.height = im.height;
  out.pixels.resize(im.pixels.size());
  for (size_t i = 0; i < im.pixels.size(); ++i) {
    float v = std::clamp(im.pixels[i], 0.f, 1.f);
    out.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.f));
  }
  return out;
}

namespace {

// Skips whitespace and '#' comment lines between PNM header tokens.
int next_pnm_token(std::istream& in) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  return c;
}

int read_pnm_int(std::istream& in) {
  int c = next_pnm_token(in);
  if (c == EOF || !std::isdigit(c)) throw IoError("pgm: bad header integer");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

}  // namespace

ImageU8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pgm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("pgm: not a P5 file: " + path);
  int w = read_pnm_int(in);
  int h = read_pnm_int(in);
  int maxval = read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw IoError("pgm: unsupported header in " + path);
  ImageU8 im = ImageU8::blank(w, h);
  in.read(reinterpret_cast<char*>(im.pixels.data()),
          static_cast<std::streamsize>(im.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(im.pixels.size()))
    throw IoError("pgm: truncated pixel data in " + path);
  return im;
}

void write_pgm(const std::string& path, const ImageU8& im) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm: cannot write " + path);
  out << "P5\n" << im.width << " " << im.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(im.pixels.data()),
            static_cast<std::streamsize>(im.pixels.size()));
  if (!out) throw IoError("pgm: write failed for " + path);
}

ImageF32 resize_bilinear(const ImageF32& im, int w, int h) {
  if (w <= 0 || h <= 0) throw ShapeError("resize_bilinear: bad target size");
  if (w == im.width && h == im.height) return im;
  ImageF32 out = ImageF32::blank(w, h);
  const float sx = static_cast<float>(im.width) / w;
  const float sy = static_cast<float>(im.height) / h;
  for (int y = 0; y < h; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    fy = std::clamp(fy, 0.f, static_cast<float>(im.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, im.height - 1);
    float wy = fy - y0;
    for (int x = 0; x < w; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      fx = std::clamp(fx, 0.f, static_cast<float>(im.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, im.width - 1);
      float wx = fx - x0;
      // Lerp form a + w*(b-a): exact for constant inputs.
      float a = im.at(x0, y0), b = im.at(x1, y0);
      float c = im.at(x0, y1), d = im.at(x1, y1);
      float top = a + wx * (b - a);
      float bot = c + wx * (d - c);
      out.at(x, y) = top + wy * (bot - top);
    }
  }
  return out;
}

}  // namespace girl
