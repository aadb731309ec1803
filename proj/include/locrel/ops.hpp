#pragma once

#include <vector>

#include "locrel/tensor.hpp"

namespace locrel::diff {

// Differentiable operations over NHWC tensors. Every op computes its forward
// result eagerly and, when any input requires gradients, records a backward
// closure on the tape. Backward closures accumulate into input gradients so a
// tensor consumed by several ops receives the sum of all path gradients.

/// Cross-correlation. x:[N,H,W,Ci], w:[kh,kw,Ci,Co], bias:[Co] or undefined.
/// Output extents: floor((H + 2*pad - kh) / stride) + 1 (likewise width).
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad);

/// Running statistics owned by the caller (updated in training mode).
struct BnStats {
  std::vector<double> mean;
  std::vector<double> var;
};

/// Per-channel batch normalization over all leading dims; channels last.
Tensor batchnorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BnStats& running, bool training, double momentum = 0.1, double eps = 1e-5);

/// batchnorm followed by ReLU in one pass (bitwise-identical results, fewer
/// memory sweeps). The backbone uses this for every BN -> ReLU pair.
Tensor batchnorm_relu(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      BnStats& running, bool training, double momentum = 0.1, double eps = 1e-5);

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);

/// Elementwise product. Shapes must match, or one operand may have a
/// trailing extent of 1 (per-position scalar broadcast over channels).
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

/// scale * x + shift, elementwise.
Tensor affine(Tape& tape, const Tensor& x, double scale, double shift);

/// Clamps to [lo, hi]; gradient passes only through the interior.
Tensor clamp(Tape& tape, const Tensor& x, double lo, double hi);

Tensor log_op(Tape& tape, const Tensor& x);
Tensor sqrt_op(Tape& tape, const Tensor& x);

/// Concatenation / split along the trailing (channel) dimension.
Tensor concat_channels(Tape& tape, const std::vector<Tensor>& xs);
std::vector<Tensor> split_channels(Tape& tape, const Tensor& x, const std::vector<int>& widths);

/// Copying reshape; numel must be preserved.
Tensor reshape(Tape& tape, const Tensor& x, std::vector<int> shape);
/// [N, ...] -> [N, product of the rest].
Tensor flatten(Tape& tape, const Tensor& x);

/// Fully connected: x:[N,D] * w:[D,M] + b:[M] (b optional).
Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

/// Bilinear resize (half-pixel centers, edge clamp) to ho x wo.
Tensor resize_bilinear(Tape& tape, const Tensor& x, int ho, int wo);

/// 2x2 mean pooling, stride 2; spatial extents must be even.
Tensor avgpool2x2(Tape& tape, const Tensor& x);

/// Spatial mean: [N,H,W,C] -> [N,C].
Tensor global_avgpool(Tape& tape, const Tensor& x);

/// Sum over the trailing dimension: [..., L] -> [...].
Tensor reduce_sum_lastdim(Tape& tape, const Tensor& x);

/// Mean of all entries -> scalar [1].
Tensor reduce_mean_all(Tape& tape, const Tensor& x);

/// Divides trailing-dim vectors by per-row scalars: x:[..., L], n:[...].
Tensor div_rows(Tape& tape, const Tensor& x, const Tensor& n);

/// Batched A * B^T: a:[B,R,L], b:[B,S,L] -> [B,R,S].
Tensor bmm_nt(Tape& tape, const Tensor& a, const Tensor& b);

/// Ceil-partition into a k x k grid of zero-padded patches:
/// [N,H,W,C] -> [N, k*k, ceil(H/k)*ceil(W/k)*C], patches row-major over the
/// grid, each flattened in (y, x, channel) order.
Tensor extract_patches(Tape& tape, const Tensor& x, int k);

}  // namespace locrel::diff
