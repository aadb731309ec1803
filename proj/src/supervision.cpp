#include "locrel/supervision.hpp"

#include <cmath>

#include "locrel/error.hpp"

namespace locrel::supervision {

Image build_mask(const Image& source, const Image& forged, double threshold) {
  if (source.height != forged.height || source.width != forged.width ||
      source.channels != forged.channels) {
    throw DimensionError("build_mask: source and forged images must match in size");
  }
  if (source.channels != 3) throw DimensionError("build_mask: expected 3-channel images");
  Image mask(source.height, source.width, 1);
  const size_t n = source.pixels();
  const double* sr = source.channel(0);
  const double* sg = source.channel(1);
  const double* sb = source.channel(2);
  const double* fr = forged.channel(0);
  const double* fg = forged.channel(1);
  const double* fb = forged.channel(2);
  double* m = mask.channel(0);
  for (size_t i = 0; i < n; ++i) {
    const double g = kLumaR * std::fabs(fr[i] - sr[i]) + kLumaG * std::fabs(fg[i] - sg[i]) +
                     kLumaB * std::fabs(fb[i] - sb[i]);
    m[i] = g > threshold ? 1.0 : 0.0;
  }
  return mask;
}

std::vector<double> patch_probabilities(const Image& mask, int k) {
  if (mask.channels != 1) throw DimensionError("patch_probabilities: mask must be 1-channel");
  const int h = mask.height, w = mask.width;
  if (k < 1 || k > h || k > w) {
    throw ConfigError("patch_probabilities: k must satisfy 1 <= k <= min(H, W)");
  }
  const int ph = (h + k - 1) / k;
  const int pw = (w + k - 1) / k;
  std::vector<double> p(static_cast<size_t>(k) * k, 0.0);
  for (int gr = 0; gr < k; ++gr) {
    const int y0 = gr * ph;
    const int y1 = std::min(y0 + ph, h);
    for (int gc = 0; gc < k; ++gc) {
      const int x0 = gc * pw;
      const int x1 = std::min(x0 + pw, w);
      double sum = 0.0;
      long count = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          sum += mask.at(0, y, x);
          ++count;
        }
      }
      p[static_cast<size_t>(gr) * k + gc] = count > 0 ? sum / count : 0.0;
    }
  }
  return p;
}

std::vector<double> target_similarity(const std::vector<double>& p) {
  const size_t k2 = p.size();
  std::vector<double> s(k2 * k2);
  for (size_t i = 0; i < k2; ++i) {
    for (size_t j = 0; j < k2; ++j) {
      const double d = p[i] - p[j];
      s[i * k2 + j] = 1.0 - d * d;
    }
  }
  return s;
}

}  // namespace locrel::supervision
