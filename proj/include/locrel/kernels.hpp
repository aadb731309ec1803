#pragma once

#include <cstddef>

namespace locrel::kernels {

// All tensors are dense NHWC doubles. Backward kernels accumulate (+=) into
// their gradient outputs so a consumer graph can sum contributions.

struct ConvDims {
  int n, h, w, cin;
  int kh, kw, cout;
  int stride, pad;
  int ho, wo;
};

/// Cross-correlation. bias may be null. Dispatches to register-blocked
/// AVX-512 paths for 3x3/s1/p1 and 1x1/s1/p0, generic loops otherwise.
void conv2d_forward(const double* x, const double* w, const double* bias, double* out,
                    const ConvDims& d);

/// dL/dx accumulation from dL/dout.
void conv2d_backward_input(const double* dout, const double* w, double* dx, const ConvDims& d);

/// dL/dw (and dL/dbias when db is non-null) accumulation.
void conv2d_backward_weights(const double* x, const double* dout, double* dw, double* db,
                             const ConvDims& d);

/// 2x2 average pool, stride 2. Extents must be even.
void avgpool2x2_forward(const double* x, int n, int h, int w, int c, double* out);
void avgpool2x2_backward(const double* dout, int n, int h, int w, int c, double* dx);

/// Bilinear resize with half-pixel centers and edge clamping:
/// src = (dst + 0.5) * (in_extent / out_extent) - 0.5.
void resize_bilinear_forward(const double* x, int n, int h, int w, int c, int ho, int wo,
                             double* out);
void resize_bilinear_backward(const double* dout, int n, int h, int w, int c, int ho, int wo,
                              double* dx);

/// Per-channel batch statistics over N*H*W (biased variance). Deterministic
/// for any thread count: per-row partials are combined in fixed order.
void batch_mean_var(const double* x, long rows, int c, double* mean, double* var);

/// Batch-norm backward (optionally through a fused trailing ReLU, masked by
/// y <= 0). Accumulates into dgamma/dbeta/dx; any of them may be null.
/// training selects the full batch-statistics gradient; otherwise the
/// running-statistics (affine-only) form.
void bn_backward(const double* x, const double* y, const double* dy, long rows, int c,
                 const double* mean, const double* invstd, const double* gamma, bool training,
                 bool relu_mask, double* dgamma, double* dbeta, double* dx);

/// Dense layer: out[N,M] = x[N,D] * w[D,M] + b[M] (b nullable).
void dense_forward(const double* x, const double* w, const double* b, int n, int d, int m,
                   double* out);
void dense_backward(const double* x, const double* w, const double* dout, int n, int d, int m,
                    double* dx, double* dw, double* db);

/// Batched A * B^T on matching batches: out[b,i,j] = sum_l a[b,i,l] * bt[b,j,l].
void bmm_nt(const double* a, const double* bt, int batch, int rows_a, int rows_b, int inner,
            double* out);

}  // namespace locrel::kernels
