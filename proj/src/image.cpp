#include "locrel/image.hpp"

#include <cmath>

#include "locrel/error.hpp"

namespace locrel {

Image to_luminance(const Image& img) {
  if (img.channels != 3) {
    throw DimensionError("to_luminance: expected 3 channels, got " + std::to_string(img.channels));
  }
  Image out(img.height, img.width, 1);
  const double* r = img.channel(0);
  const double* g = img.channel(1);
  const double* b = img.channel(2);
  double* y = out.channel(0);
  const size_t n = img.pixels();
  for (size_t i = 0; i < n; ++i) {
    y[i] = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  }
  return out;
}

void validate_image(const Image& img) {
  if (img.height < 8 || img.width < 8) {
    throw DimensionError("image extents must be at least 8x8");
  }
  if (img.channels != 1 && img.channels != 3) {
    throw DimensionError("image must have 1 or 3 channels");
  }
  if (img.data.size() != img.pixels() * img.channels) {
    throw DimensionError("image data size does not match extents");
  }
  for (double v : img.data) {
    if (!std::isfinite(v)) throw DimensionError("image contains non-finite values");
  }
}

}  // namespace locrel
