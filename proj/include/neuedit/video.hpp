#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "neuedit/common.hpp"

namespace neuedit {

// A clip of L frames, H x W pixels, C=3 channels, values in [0,1].
// Layout: frame-major, then row, column, channel.
struct VideoClip {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<double> data;

  VideoClip() = default;
  VideoClip(int l, int h, int w, int c = 3)
      : frames(l), height(h), width(w), channels(c),
        data(static_cast<std::size_t>(l) * h * w * c, 0.0) {}

  std::size_t index(int l, int y, int x, int c) const {
    return ((static_cast<std::size_t>(l) * height + y) * width + x) * channels + c;
  }

  double& at(int l, int y, int x, int c) { return data[index(l, y, x, c)]; }
  double at(int l, int y, int x, int c) const { return data[index(l, y, x, c)]; }

  bool same_shape(const VideoClip& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(frames) * height * width;
  }
};

// Binary mask over a clip (per frame, per pixel).
struct Mask {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int l, int h, int w, std::uint8_t value = 0)
      : frames(l), height(h), width(w),
        data(static_cast<std::size_t>(l) * h * w, value) {}

  std::size_t index(int l, int y, int x) const {
    return (static_cast<std::size_t>(l) * height + y) * width + x;
  }

  std::uint8_t& at(int l, int y, int x) { return data[index(l, y, x)]; }
  std::uint8_t at(int l, int y, int x) const { return data[index(l, y, x)]; }

  std::size_t count_set() const {
    std::size_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
  }
};

// Per-pixel scalar field over a clip (factor scores, blends), values usually in [0,1].
struct ScalarField {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  ScalarField() = default;
  ScalarField(int l, int h, int w, double value = 0.0)
      : frames(l), height(h), width(w),
        data(static_cast<std::size_t>(l) * h * w, value) {}

  std::size_t index(int l, int y, int x) const {
    return (static_cast<std::size_t>(l) * height + y) * width + x;
  }

  double& at(int l, int y, int x) { return data[index(l, y, x)]; }
  double at(int l, int y, int x) const { return data[index(l, y, x)]; }
};

inline std::uint8_t quantize8(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Snaps every pixel to the 8-bit grid k/255 so PPM persistence round-trips
// bit-exactly.
inline void quantize_to_8bit_grid(VideoClip& v) {
  for (double& x : v.data) x = quantize8(x) / 255.0;
}

inline double mse(const VideoClip& a, const VideoClip& b) {
  require(a.same_shape(b), "shape-mismatch", "mse: clip shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

}  // namespace neuedit
