#pragma once

#include <utility>
#include <vector>

#include "locrel/ops.hpp"
#include "locrel/tensor.hpp"

namespace locrel::objective {

/// Probability clamp bound for the log terms.
inline constexpr double kProbClamp = 1e-7;
/// Differentiability guard for the Frobenius norm at zero.
inline constexpr double kSimEps = 1e-8;

/// Frobenius-norm similarity loss per sample, averaged over the batch.
/// s_hat, s: [N, k^2, k^2]. Guarded as sqrt(sum d^2 + kSimEps^2).
/// `weights`, when defined, scales the entrywise differences before the
/// norm; the trainer uses it to drop patch pairs that are structurally
/// empty (pure partition padding carries no signal and would otherwise put
/// a constant floor under the loss).
diff::Tensor loss_sim(diff::Tape& tape, const diff::Tensor& s_hat, const diff::Tensor& s,
                      const diff::Tensor& weights = diff::Tensor());

/// Binary cross-entropy on the forgery probability, averaged over the batch.
/// y_hat: [N,1] in (0,1) (clamped to [1e-7, 1-1e-7]); y: [N,1] in {0,1}.
diff::Tensor loss_ce(diff::Tape& tape, const diff::Tensor& y_hat, const diff::Tensor& y);

/// Per-pixel binary cross-entropy summed over the mask and, by default,
/// divided by the pixel count; averaged over the batch. mask_hat, mask:
/// [N,H,W,1]. Set normalize = false for the raw per-image sum.
diff::Tensor loss_seg(diff::Tape& tape, const diff::Tensor& mask_hat, const diff::Tensor& mask,
                      bool normalize = true);

struct LossBreakdown {
  double l_ce = 0.0;
  double l_sim = 0.0;
  double l_seg = 0.0;
  double l_total = 0.0;
  double lambda1 = 10.0;
  double lambda2 = 1.0;
  diff::Tensor total;  // scalar node for backward
};

/// total = ce + lambda1 * sim + lambda2 * seg. Negative weights are rejected.
LossBreakdown loss_total(diff::Tape& tape, const diff::Tensor& ce, const diff::Tensor& sim,
                         const diff::Tensor& seg, double lambda1 = 10.0, double lambda2 = 1.0);

struct EvalReport {
  double acc = 0.0;
  double auc = 0.0;
  double eer = 0.0;
  double threshold = 0.5;
};

/// Fraction of correct predictions at the threshold (score >= t => forged).
double accuracy(const std::vector<std::pair<double, int>>& scores, double threshold = 0.5);

/// Rank-based AUC with average ranks for ties (equals trapezoidal ROC
/// integration). Throws ConfigError when only one class is present.
double auc(const std::vector<std::pair<double, int>>& scores);

/// Equal-error rate: the ROC point where FPR = FNR, linearly interpolated
/// between adjacent thresholds. Throws ConfigError on single-class input.
double eer(const std::vector<std::pair<double, int>>& scores);

/// acc at 0.5 plus AUC/EER; throws ConfigError when AUC/EER are undefined
/// (single-class input) — use accuracy() directly in that case.
EvalReport metrics(const std::vector<std::pair<double, int>>& scores);

}  // namespace locrel::objective
