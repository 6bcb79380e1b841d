#pragma once

#include <cstddef>
#include <vector>

#include "mocal/errors.hpp"

namespace mocal {

/// Single-channel image, intensities in [0,1], row-major storage.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> samples;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return samples[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }

  bool same_size(const GrayImage& o) const {
    return width == o.width && height == o.height;
  }
};

/// Bilinear sample with coordinates clamped to the valid interpolation cell.
inline float sample_bilinear(const GrayImage& img, double u, double v) {
  if (u < 0) u = 0;
  if (v < 0) v = 0;
  if (u > img.width - 1) u = img.width - 1;
  if (v > img.height - 1) v = img.height - 1;
  int x0 = static_cast<int>(u), y0 = static_cast<int>(v);
  if (x0 > img.width - 2) x0 = img.width - 2;
  if (y0 > img.height - 2) y0 = img.height - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const int x1 = x0 + 1 < img.width ? x0 + 1 : x0;
  const int y1 = y0 + 1 < img.height ? y0 + 1 : y0;
  const double ax = u - x0, ay = v - y0;
  const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x1, y0);
  const double bot = (1.0 - ax) * img.at(x0, y1) + ax * img.at(x1, y1);
  return static_cast<float>((1.0 - ay) * top + ay * bot);
}

inline GrayImage mirror_horizontal(const GrayImage& img) {
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
  return out;
}

}  // namespace mocal
