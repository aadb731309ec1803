#include "locrel/objective.hpp"

#include <algorithm>
#include <cmath>

#include "locrel/error.hpp"

namespace locrel::objective {

diff::Tensor loss_sim(diff::Tape& tape, const diff::Tensor& s_hat, const diff::Tensor& s,
                      const diff::Tensor& weights) {
  if (s_hat.shape() != s.shape() || s_hat.ndim() != 3) {
    throw DimensionError("loss_sim: patterns must share a [N,k^2,k^2] shape");
  }
  const int n = s_hat.dim(0);
  const int flat = s_hat.dim(1) * s_hat.dim(2);
  diff::Tensor d = diff::sub(tape, s_hat, s);
  if (weights.defined()) {
    if (weights.shape() != s_hat.shape()) {
      throw DimensionError("loss_sim: weights must match the pattern shape");
    }
    d = diff::mul(tape, d, weights);
  }
  diff::Tensor dsq = diff::mul(tape, d, d);
  diff::Tensor rows = diff::reshape(tape, dsq, {n, flat});
  diff::Tensor sums = diff::reduce_sum_lastdim(tape, rows);
  diff::Tensor norm = diff::sqrt_op(tape, diff::affine(tape, sums, 1.0, kSimEps * kSimEps));
  return diff::reduce_mean_all(tape, norm);
}

namespace {

// -[t log(c) + (1-t) log(1-c)] with c = clamp(x)
diff::Tensor bce_elementwise(diff::Tape& tape, const diff::Tensor& x, const diff::Tensor& target) {
  diff::Tensor c = diff::clamp(tape, x, kProbClamp, 1.0 - kProbClamp);
  diff::Tensor log_c = diff::log_op(tape, c);
  diff::Tensor log_1c = diff::log_op(tape, diff::affine(tape, c, -1.0, 1.0));
  diff::Tensor one_minus_t = diff::affine(tape, target, -1.0, 1.0);
  diff::Tensor pos = diff::mul(tape, target, log_c);
  diff::Tensor neg = diff::mul(tape, one_minus_t, log_1c);
  return diff::affine(tape, diff::add(tape, pos, neg), -1.0, 0.0);
}

}  // namespace

diff::Tensor loss_ce(diff::Tape& tape, const diff::Tensor& y_hat, const diff::Tensor& y) {
  if (y_hat.shape() != y.shape()) throw DimensionError("loss_ce: prediction/label shape mismatch");
  return diff::reduce_mean_all(tape, bce_elementwise(tape, y_hat, y));
}

diff::Tensor loss_seg(diff::Tape& tape, const diff::Tensor& mask_hat, const diff::Tensor& mask,
                      bool normalize) {
  if (mask_hat.shape() != mask.shape() || mask_hat.ndim() != 4) {
    throw DimensionError("loss_seg: masks must share a [N,H,W,1] shape");
  }
  const int n = mask_hat.dim(0);
  const long hw = static_cast<long>(mask_hat.dim(1)) * mask_hat.dim(2);
  diff::Tensor bce = bce_elementwise(tape, mask_hat, mask);
  diff::Tensor rows = diff::reshape(tape, bce, {n, static_cast<int>(hw)});
  diff::Tensor sums = diff::reduce_sum_lastdim(tape, rows);
  if (normalize) sums = diff::affine(tape, sums, 1.0 / static_cast<double>(hw), 0.0);
  return diff::reduce_mean_all(tape, sums);
}

LossBreakdown loss_total(diff::Tape& tape, const diff::Tensor& ce, const diff::Tensor& sim,
                         const diff::Tensor& seg, double lambda1, double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("loss_total: loss weights must be nonnegative");
  }
  LossBreakdown out;
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  out.l_ce = ce.scalar();
  out.l_sim = sim.scalar();
  out.l_seg = seg.scalar();
  diff::Tensor weighted = diff::add(tape, diff::affine(tape, sim, lambda1, 0.0),
                                    diff::affine(tape, seg, lambda2, 0.0));
  out.total = diff::add(tape, ce, weighted);
  out.l_total = out.total.scalar();
  return out;
}

double accuracy(const std::vector<std::pair<double, int>>& scores, double threshold) {
  if (scores.empty()) throw ConfigError("accuracy: no scores");
  long correct = 0;
  for (const auto& [s, y] : scores) {
    const int pred = s >= threshold ? 1 : 0;
    if (pred == y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

namespace {

void count_classes(const std::vector<std::pair<double, int>>& scores, long& pos, long& neg) {
  pos = neg = 0;
  for (const auto& [s, y] : scores) (y == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    throw ConfigError("AUC/EER undefined: input contains a single class");
  }
}

}  // namespace

double auc(const std::vector<std::pair<double, int>>& scores) {
  long pos, neg;
  count_classes(scores, pos, neg);
  std::vector<std::pair<double, int>> sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // average ranks over tie groups
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t t = i; t < j; ++t) {
      if (sorted[t].second == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  return (rank_sum_pos - 0.5 * pos * (pos + 1)) / (static_cast<double>(pos) * neg);
}

double eer(const std::vector<std::pair<double, int>>& scores) {
  long pos, neg;
  count_classes(scores, pos, neg);
  std::vector<std::pair<double, int>> sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Sweep thresholds from above the max score downward. Before any score is
  // classified positive: FPR = 0, FNR = 1. Points are taken after each tie
  // group so FPR rises and FNR falls monotonically.
  double fpr_prev = 0.0, fnr_prev = 1.0;
  long tp = 0, fp = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    for (size_t t = i; t < j; ++t) {
      if (sorted[t].second == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
    const double fpr = static_cast<double>(fp) / neg;
    const double fnr = static_cast<double>(pos - tp) / pos;
    if (fnr <= fpr) {
      const double d_prev = fnr_prev - fpr_prev;  // >= 0
      const double d_cur = fnr - fpr;             // <= 0
      const double span = d_prev - d_cur;
      const double t = span > 0.0 ? d_prev / span : 0.0;
      return fpr_prev + t * (fpr - fpr_prev);
    }
    fpr_prev = fpr;
    fnr_prev = fnr;
    i = j;
  }
  return 1.0;  // unreachable for well-formed inputs: FNR hits 0 at the end
}

EvalReport metrics(const std::vector<std::pair<double, int>>& scores) {
  EvalReport r;
  r.threshold = 0.5;
  r.acc = accuracy(scores, r.threshold);
  r.auc = auc(scores);
  r.eer = eer(scores);
  return r;
}

}  // namespace locrel::objective
