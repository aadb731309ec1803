#include "ref_kernels.hpp"

#include <cmath>

namespace locrel::ref {

DctCoefficients dct2d_naive(const Image& img) {
  const int h = img.height, w = img.width;
  DctCoefficients out(h, w);
  for (int u = 0; u < h; ++u) {
    const double au = (u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h));
    for (int v = 0; v < w; ++v) {
      const double av = (v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w));
      double acc = 0.0;
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          acc += img.at(0, i, j) * std::cos(M_PI * (2 * i + 1) * u / (2.0 * h)) *
                 std::cos(M_PI * (2 * j + 1) * v / (2.0 * w));
        }
      }
      out.at(u, v) = au * av * acc;
    }
  }
  return out;
}

Image idct2d_naive(const DctCoefficients& coeffs) {
  const int h = coeffs.height, w = coeffs.width;
  Image out(h, w, 1);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int u = 0; u < h; ++u) {
        const double au = (u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h));
        for (int v = 0; v < w; ++v) {
          const double av = (v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w));
          acc += au * av * coeffs.at(u, v) * std::cos(M_PI * (2 * i + 1) * u / (2.0 * h)) *
                 std::cos(M_PI * (2 * j + 1) * v / (2.0 * w));
        }
      }
      out.at(0, i, j) = acc;
    }
  }
  return out;
}

void conv2d_naive(const double* x, const double* w, const double* bias, double* out,
                  const kernels::ConvDims& d) {
  for (int n = 0; n < d.n; ++n)
    for (int oy = 0; oy < d.ho; ++oy)
      for (int ox = 0; ox < d.wo; ++ox)
        for (int co = 0; co < d.cout; ++co) {
          double acc = bias ? bias[co] : 0.0;
          for (int ky = 0; ky < d.kh; ++ky)
            for (int kx = 0; kx < d.kw; ++kx)
              for (int ci = 0; ci < d.cin; ++ci) {
                const int iy = oy * d.stride - d.pad + ky;
                const int ix = ox * d.stride - d.pad + kx;
                if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) continue;
                acc += x[((static_cast<size_t>(n) * d.h + iy) * d.w + ix) * d.cin + ci] *
                       w[((static_cast<size_t>(ky) * d.kw + kx) * d.cin + ci) * d.cout + co];
              }
          out[((static_cast<size_t>(n) * d.ho + oy) * d.wo + ox) * d.cout + co] = acc;
        }
}

void resize_bilinear_naive(const double* x, int n, int h, int w, int c, int ho, int wo,
                           double* out) {
  auto clampi = [](double v, int hi) {
    if (v < 0.0) return 0.0;
    if (v > hi) return static_cast<double>(hi);
    return v;
  };
  for (int b = 0; b < n; ++b)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          const double sy = clampi((oy + 0.5) * (static_cast<double>(h) / ho) - 0.5, h - 1);
          const double sx = clampi((ox + 0.5) * (static_cast<double>(w) / wo) - 0.5, w - 1);
          const int y0 = static_cast<int>(std::floor(sy));
          const int x0 = static_cast<int>(std::floor(sx));
          const int y1 = std::min(y0 + 1, h - 1);
          const int x1 = std::min(x0 + 1, w - 1);
          const double fy = sy - y0, fx = sx - x0;
          auto v = [&](int yy, int xx) {
            return x[((static_cast<size_t>(b) * h + yy) * w + xx) * c + ch];
          };
          out[((static_cast<size_t>(b) * ho + oy) * wo + ox) * c + ch] =
              (1 - fy) * (1 - fx) * v(y0, x0) + (1 - fy) * fx * v(y0, x1) +
              fy * (1 - fx) * v(y1, x0) + fy * fx * v(y1, x1);
        }
}

std::vector<double> similarity_pattern_naive(const std::vector<std::vector<double>>& patches,
                                             double norm_eps) {
  const size_t k2 = patches.size();
  std::vector<double> norms(k2);
  for (size_t i = 0; i < k2; ++i) {
    double ss = 0.0;
    for (double v : patches[i]) ss += v * v;
    norms[i] = std::sqrt(ss + norm_eps * norm_eps);
  }
  std::vector<double> s(k2 * k2);
  for (size_t i = 0; i < k2; ++i) {
    for (size_t j = 0; j < k2; ++j) {
      double dot = 0.0;
      for (size_t l = 0; l < patches[i].size(); ++l) dot += patches[i][l] * patches[j][l];
      s[i * k2 + j] = (dot / (norms[i] * norms[j]) + 1.0) / 2.0;
    }
  }
  return s;
}

void matmul_nt_naive(const double* a, const double* b, int rows_a, int rows_b, int inner,
                     double* out) {
  for (int i = 0; i < rows_a; ++i)
    for (int j = 0; j < rows_b; ++j) {
      double acc = 0.0;
      for (int l = 0; l < inner; ++l)
        acc += a[static_cast<size_t>(i) * inner + l] * b[static_cast<size_t>(j) * inner + l];
      out[static_cast<size_t>(i) * rows_b + j] = acc;
    }
}

}  // namespace locrel::ref
