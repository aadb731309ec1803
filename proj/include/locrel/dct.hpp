#pragma once

#include <vector>

#include "locrel/image.hpp"

namespace locrel {

/// 2-D DCT coefficients of a single-channel image. Row-major, same extents as
/// the source; (0,0) is the DC term.
struct DctCoefficients {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  DctCoefficients() = default;
  DctCoefficients(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0) {}
  double& at(int i, int j) { return data[static_cast<size_t>(i) * width + j]; }
  double at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
};

/// High-pass filter spec: alpha in [0, 1] scales the zeroed top-left triangle.
struct FilterSpec {
  double alpha = 0.33;
};

/// Orthonormal type-II 2-D DCT of a 1-channel image (type-III inverse below).
/// Energy-preserving: the orthonormal pair satisfies Parseval exactly.
DctCoefficients dct2d(const Image& img);

/// Inverse of dct2d.
Image idct2d(const DctCoefficients& coeffs);

/// Zeroes coefficients with i + j < round(alpha * max(H, W)); the rest pass
/// through unchanged. Throws ConfigError when alpha is outside [0, 1].
DctCoefficients highpass_filter(const DctCoefficients& coeffs, const FilterSpec& spec);

/// Frequency cue: idct2d(highpass_filter(dct2d(to_luminance(img)), alpha)).
/// Output is 1-channel, same extents, values not re-clamped to [0, 1].
Image frequency_cue(const Image& img, const FilterSpec& spec);

}  // namespace locrel
