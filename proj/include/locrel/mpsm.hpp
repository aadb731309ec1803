#pragma once

#include <string>
#include <vector>

#include "locrel/ops.hpp"
#include "locrel/tensor.hpp"

namespace locrel::mpsm {

/// Norm guard for the cosine pattern: norm(u) = sqrt(sum u^2 + kNormEps^2),
/// so a zero patch gets norm kNormEps and a neutral 0.5 similarity row.
inline constexpr double kNormEps = 1e-8;

/// Resizes low/mid fused maps bilinearly to the high map's extents and
/// concatenates channels in [low, mid, high] order.
diff::Tensor fuse_multiscale(diff::Tape& tape, const diff::Tensor& low, const diff::Tensor& mid,
                             const diff::Tensor& high);

/// Ceil-partition into k x k zero-padded patches: [N,H,W,C] -> [N,k*k,h*w*C].
diff::Tensor partition(diff::Tape& tape, const diff::Tensor& fused, int k);

/// Pairwise guarded cosine pattern over patch vectors:
/// s[i][j] = (<u_i/||u_i||, u_j/||u_j||> + 1) / 2, in [0,1], symmetric.
/// patches: [N, k*k, L] -> [N, k*k, k*k]. Differentiable.
diff::Tensor similarity_pattern(diff::Tape& tape, const diff::Tensor& patches);

/// CSV export/import of one k^2 x k^2 pattern (17 significant digits).
void export_pattern_csv(const std::vector<double>& s, int k2, const std::string& path);
std::vector<double> load_pattern_csv(const std::string& path, int& k2_out);

/// Grayscale heatmap image, k^2 x k^2 pixels, pixel value 255 * s.
void export_pattern_heatmap(const std::vector<double>& s, int k2, const std::string& path);

}  // namespace locrel::mpsm
