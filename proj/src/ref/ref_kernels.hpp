#pragma once

#include <vector>

#include "locrel/dct.hpp"
#include "locrel/image.hpp"
#include "locrel/kernels.hpp"

// Plain serial implementations kept for testing and benchmarking. Written
// independently of the optimized kernels: straightforward nested loops that
// follow the operation definitions directly.
namespace locrel::ref {

/// O(N^4) double-sum orthonormal type-II DCT.
DctCoefficients dct2d_naive(const Image& img);

/// O(N^4) inverse (type-III).
Image idct2d_naive(const DctCoefficients& coeffs);

/// Six-nested-loop cross-correlation, NHWC.
void conv2d_naive(const double* x, const double* w, const double* bias, double* out,
                  const kernels::ConvDims& d);

/// Scalar bilinear resize, half-pixel centers with edge clamping.
void resize_bilinear_naive(const double* x, int n, int h, int w, int c, int ho, int wo,
                           double* out);

/// Pairwise guarded cosine pattern over row vectors:
/// s[i][j] = (dot(u_i, u_j) / (norm_i * norm_j) + 1) / 2,
/// norm = sqrt(sum of squares + norm_eps^2).
std::vector<double> similarity_pattern_naive(const std::vector<std::vector<double>>& patches,
                                             double norm_eps);

/// out[i][j] = sum_l a[i][l] * b[j][l], single batch.
void matmul_nt_naive(const double* a, const double* b, int rows_a, int rows_b, int inner,
                     double* out);

}  // namespace locrel::ref
