#include "locrel/dct.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "locrel/error.hpp"

namespace locrel {

namespace {

// Orthonormal type-II basis: B[u][i] = a(u) cos(pi (2i+1) u / 2N),
// a(0) = sqrt(1/N), a(u>0) = sqrt(2/N). Rows are orthonormal, so the
// type-III inverse is the transpose.
const std::vector<double>& dct_basis(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> b(static_cast<size_t>(n) * n);
  const double a0 = std::sqrt(1.0 / n);
  const double au = std::sqrt(2.0 / n);
  for (int u = 0; u < n; ++u) {
    const double scale = u == 0 ? a0 : au;
    for (int i = 0; i < n; ++i) {
      b[static_cast<size_t>(u) * n + i] = scale * std::cos(M_PI * (2 * i + 1) * u / (2.0 * n));
    }
  }
  return cache.emplace(n, std::move(b)).first->second;
}

// rows(out) = B * rows(in): out[u][j] = sum_i B[u][i] * in[i][j]
void apply_rows(const double* basis, int n, const double* in, double* out, int cols) {
#pragma omp parallel for schedule(static)
  for (int u = 0; u < n; ++u) {
    const double* brow = basis + static_cast<size_t>(u) * n;
    double* orow = out + static_cast<size_t>(u) * cols;
    for (int j = 0; j < cols; ++j) orow[j] = 0.0;
    for (int i = 0; i < n; ++i) {
      const double b = brow[i];
      const double* irow = in + static_cast<size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) orow[j] += b * irow[j];
    }
  }
}

// cols(out) = in * B^T: out[i][v] = sum_j in[i][j] * B[v][j]
void apply_cols(const double* basis, int n, const double* in, double* out, int rows) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const double* irow = in + static_cast<size_t>(i) * n;
    double* orow = out + static_cast<size_t>(i) * n;
    for (int v = 0; v < n; ++v) {
      const double* brow = basis + static_cast<size_t>(v) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += irow[j] * brow[j];
      orow[v] = acc;
    }
  }
}

// transposed variants for the inverse (B^T on rows, B on cols)
void apply_rows_t(const double* basis, int n, const double* in, double* out, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* orow = out + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) orow[j] = 0.0;
    for (int u = 0; u < n; ++u) {
      const double b = basis[static_cast<size_t>(u) * n + i];
      const double* irow = in + static_cast<size_t>(u) * cols;
      for (int j = 0; j < cols; ++j) orow[j] += b * irow[j];
    }
  }
}

void apply_cols_t(const double* basis, int n, const double* in, double* out, int rows) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const double* irow = in + static_cast<size_t>(i) * n;
    double* orow = out + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int v = 0; v < n; ++v) acc += irow[v] * basis[static_cast<size_t>(v) * n + j];
      orow[j] = acc;
    }
  }
}

}  // namespace

DctCoefficients dct2d(const Image& img) {
  if (img.channels != 1) throw DimensionError("dct2d expects a single-channel image");
  const int h = img.height, w = img.width;
  DctCoefficients out(h, w);
  std::vector<double> tmp(static_cast<size_t>(h) * w);
  apply_rows(dct_basis(h).data(), h, img.channel(0), tmp.data(), w);
  apply_cols(dct_basis(w).data(), w, tmp.data(), out.data.data(), h);
  return out;
}

Image idct2d(const DctCoefficients& coeffs) {
  const int h = coeffs.height, w = coeffs.width;
  Image out(h, w, 1);
  std::vector<double> tmp(static_cast<size_t>(h) * w);
  apply_rows_t(dct_basis(h).data(), h, coeffs.data.data(), tmp.data(), w);
  apply_cols_t(dct_basis(w).data(), w, tmp.data(), out.channel(0), h);
  return out;
}

DctCoefficients highpass_filter(const DctCoefficients& coeffs, const FilterSpec& spec) {
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
    throw ConfigError("highpass_filter: alpha must lie in [0, 1]");
  }
  const long cutoff = std::lround(spec.alpha * std::max(coeffs.height, coeffs.width));
  DctCoefficients out = coeffs;
  for (int i = 0; i < out.height; ++i) {
    const long jmax = cutoff - i;
    for (int j = 0; j < out.width && j < jmax; ++j) out.at(i, j) = 0.0;
  }
  return out;
}

Image frequency_cue(const Image& img, const FilterSpec& spec) {
  validate_image(img);
  Image luma = img.channels == 3 ? to_luminance(img) : img;
  return idct2d(highpass_filter(dct2d(luma), spec));
}

}  // namespace locrel
