#pragma once

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "locrel/image.hpp"
#include "locrel/rng.hpp"
#include "locrel/tensor.hpp"

namespace testutil {

inline locrel::Image random_image(locrel::Rng& rng, int h, int w, int c) {
  locrel::Image img(h, w, c);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

inline locrel::diff::Tensor random_tensor(locrel::Rng& rng, std::vector<int> shape,
                                          bool requires_grad = false, double lo = -1.0,
                                          double hi = 1.0) {
  auto t = locrel::diff::Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

/// Relative error with a small floor so near-zero pairs compare absolutely.
inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

/// Unique scratch directory under the build tree for file-based tests.
inline std::string scratch_dir(const std::string& name) {
  std::string dir = "locrel_test_scratch_" + name;
  const int rc = std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());
  (void)rc;
  return dir;
}

}  // namespace testutil
