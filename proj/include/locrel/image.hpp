#pragma once

#include <vector>

namespace locrel {

/// Planar raster: data laid out channel by channel, each channel row-major.
/// Values are real; loaders scale 8-bit samples by 1/255 so file-backed images
/// sit in [0, 1]. Derived images (frequency residuals) may leave that range.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;          // 1 or 3
  std::vector<double> data;  // channels * height * width

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), data(static_cast<size_t>(h) * w * c, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double* channel(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
  const double* channel(int c) const { return data.data() + static_cast<size_t>(c) * height * width; }
  size_t pixels() const { return static_cast<size_t>(height) * width; }
};

/// BT.601 luminance weights, shared by the frequency cue and mask construction.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// 3-channel -> 1-channel luminance. Throws DimensionError on other inputs.
Image to_luminance(const Image& img);

/// Throws DimensionError unless height/width >= 8 and all values finite.
void validate_image(const Image& img);

}  // namespace locrel
