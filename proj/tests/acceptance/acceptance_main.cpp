// Acceptance gate: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code 0 only if all enabled
// criteria pass. Optional arguments select criterion numbers.
#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "locrel/config.hpp"
#include "locrel/datagen.hpp"
#include "locrel/dct.hpp"
#include "locrel/error.hpp"
#include "locrel/mpsm.hpp"
#include "locrel/net.hpp"
#include "locrel/objective.hpp"
#include "locrel/rng.hpp"
#include "locrel/supervision.hpp"
#include "locrel/trainer.hpp"
#include "ref/ref_kernels.hpp"
#include "support/fd_check.hpp"
#include "support/test_util.hpp"

using namespace locrel;
using diff::Tape;
using diff::Tensor;

namespace {

struct Criterion {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << what;
    }
  }
  void note(const std::string& what) {
    if (detail.tellp() > 0) detail << "; ";
    detail << what;
  }
};

std::string scratch_root() {
  static std::string dir = [] {
    std::string d = "locrel_acceptance_scratch";
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. DCT: round trip, brute-force oracle, Parseval. Runtime < 10 s.
// ---------------------------------------------------------------------------
Criterion criterion1() {
  Criterion c;
  const double t0 = omp_get_wtime();
  Rng rng(1001);
  double worst_rt = 0.0, worst_oracle = 0.0, worst_parseval = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int h = 8 + static_cast<int>(rng.uniform_int(25));  // 8..32
    const int w = 8 + static_cast<int>(rng.uniform_int(25));
    Image img = testutil::random_image(rng, h, w, 1);

    DctCoefficients d = dct2d(img);
    Image back = idct2d(d);
    worst_rt = std::max(worst_rt, testutil::max_abs_diff(img.data, back.data));

    DctCoefficients naive = ref::dct2d_naive(img);
    worst_oracle = std::max(worst_oracle, testutil::max_abs_diff(d.data, naive.data));

    double ex = 0.0, ec = 0.0;
    for (double v : img.data) ex += v * v;
    for (double v : d.data) ec += v * v;
    worst_parseval = std::max(worst_parseval, std::fabs(ex - ec) / ex);
  }
  const double secs = omp_get_wtime() - t0;
  c.require(worst_rt < 1e-9, "round trip max err too large");
  c.require(worst_oracle < 1e-9, "oracle disagreement too large");
  c.require(worst_parseval < 1e-9, "Parseval violated");
  c.require(secs < 10.0, "runtime over 10 s");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "roundtrip %.1e, oracle %.1e, parseval %.1e, %.1f s", worst_rt,
                worst_oracle, worst_parseval, secs);
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------------------
// 2. gradient suite: every op plus the full combined loss. Runtime < 2 min.
// ---------------------------------------------------------------------------
Criterion criterion2() {
  Criterion c;
  const double t0 = omp_get_wtime();
  Rng rng(2002);
  int checked_ops = 0;

  auto weighted = [](Tape& t, const Tensor& x, const Tensor& r) {
    return diff::reduce_mean_all(t, diff::mul(t, x, r));
  };
  auto run = [&](const std::string& op, const std::function<Tensor(Tape&)>& fwd,
                 std::vector<std::pair<std::string, Tensor>> params) {
    auto failures = testutil::fd_check(fwd, std::move(params), rng);
    ++checked_ops;
    for (const auto& f : failures) {
      char buf[200];
      std::snprintf(buf, sizeof(buf), "%s grad mismatch at %s[%ld]: %.3e vs %.3e", op.c_str(),
                    f.param.c_str(), f.index, f.analytic, f.numeric);
      c.require(false, buf);
    }
  };

  {  // conv2d: fast 3x3 path, masked channels, 1x1 path, generic stride
    struct Case {
      int n, h, w, ci, co, kh, kw, s, p;
    };
    for (const Case cc : {Case{2, 8, 8, 3, 16, 3, 3, 1, 1}, Case{1, 9, 9, 4, 2, 3, 3, 1, 1},
                          Case{1, 6, 6, 5, 6, 1, 1, 1, 0}, Case{1, 7, 7, 3, 4, 3, 3, 2, 1}}) {
      Tensor x = testutil::random_tensor(rng, {cc.n, cc.h, cc.w, cc.ci}, true);
      Tensor w = testutil::random_tensor(rng, {cc.kh, cc.kw, cc.ci, cc.co}, true);
      Tensor b = testutil::random_tensor(rng, {cc.co}, true);
      const int ho = (cc.h + 2 * cc.p - cc.kh) / cc.s + 1;
      const int wo = (cc.w + 2 * cc.p - cc.kw) / cc.s + 1;
      Tensor r = testutil::random_tensor(rng, {cc.n, ho, wo, cc.co});
      run("conv2d", [&](Tape& t) { return weighted(t, diff::conv2d(t, x, w, b, cc.s, cc.p), r); },
          {{"x", x}, {"w", w}, {"b", b}});
    }
  }
  {  // batchnorm train + eval
    for (bool training : {true, false}) {
      Tensor x = testutil::random_tensor(rng, {3, 4, 4, 4}, true);
      Tensor g = testutil::random_tensor(rng, {4}, true, 0.5, 1.5);
      Tensor b = testutil::random_tensor(rng, {4}, true, -0.5, 0.5);
      Tensor r = testutil::random_tensor(rng, {3, 4, 4, 4});
      diff::BnStats st;
      st.mean.assign(4, 0.05);
      st.var.assign(4, 1.1);
      run(training ? "batchnorm/train" : "batchnorm/eval",
          [&](Tape& t) {
            diff::BnStats local = st;
            return weighted(t, diff::batchnorm(t, x, g, b, local, training), r);
          },
          {{"x", x}, {"gamma", g}, {"beta", b}});
    }
  }
  {  // elementwise family
    Tensor x = testutil::random_tensor(rng, {4, 6}, true, 0.1, 0.9);
    Tensor y = testutil::random_tensor(rng, {4, 6}, true, 0.1, 0.9);
    Tensor r = testutil::random_tensor(rng, {4, 6});
    run("relu", [&](Tape& t) { return weighted(t, diff::relu(t, x), r); }, {{"x", x}});
    run("sigmoid", [&](Tape& t) { return weighted(t, diff::sigmoid(t, x), r); }, {{"x", x}});
    run("add", [&](Tape& t) { return weighted(t, diff::add(t, x, y), r); }, {{"x", x}, {"y", y}});
    run("sub", [&](Tape& t) { return weighted(t, diff::sub(t, x, y), r); }, {{"x", x}, {"y", y}});
    run("mul", [&](Tape& t) { return weighted(t, diff::mul(t, x, y), r); }, {{"x", x}, {"y", y}});
    run("affine", [&](Tape& t) { return weighted(t, diff::affine(t, x, 1.7, -0.2), r); },
        {{"x", x}});
    run("clamp", [&](Tape& t) { return weighted(t, diff::clamp(t, x, 0.0, 1.0), r); }, {{"x", x}});
    run("log", [&](Tape& t) { return weighted(t, diff::log_op(t, x), r); }, {{"x", x}});
    run("sqrt", [&](Tape& t) { return weighted(t, diff::sqrt_op(t, x), r); }, {{"x", x}});
  }
  {  // mul with channel broadcast
    Tensor u = testutil::random_tensor(rng, {2, 3, 3, 4}, true);
    Tensor a = testutil::random_tensor(rng, {2, 3, 3, 1}, true);
    Tensor r = testutil::random_tensor(rng, {2, 3, 3, 4});
    run("mul/broadcast", [&](Tape& t) { return weighted(t, diff::mul(t, u, a), r); },
        {{"u", u}, {"a", a}});
  }
  {  // concat / split / reshape / dense
    Tensor a = testutil::random_tensor(rng, {2, 2, 2, 3}, true);
    Tensor b = testutil::random_tensor(rng, {2, 2, 2, 2}, true);
    Tensor r = testutil::random_tensor(rng, {2, 2, 2, 2});
    run("concat+split",
        [&](Tape& t) {
          auto parts = diff::split_channels(t, diff::concat_channels(t, {a, b}), {3, 2});
          return weighted(t, parts[1], r);
        },
        {{"a", a}, {"b", b}});
    Tensor x = testutil::random_tensor(rng, {3, 6}, true);
    Tensor w = testutil::random_tensor(rng, {6, 4}, true);
    Tensor bb = testutil::random_tensor(rng, {4}, true);
    Tensor rd = testutil::random_tensor(rng, {3, 4});
    run("dense", [&](Tape& t) { return weighted(t, diff::dense(t, x, w, bb), rd); },
        {{"x", x}, {"w", w}, {"b", bb}});
    Tensor rf = testutil::random_tensor(rng, {3, 6});
    run("reshape", [&](Tape& t) { return weighted(t, diff::reshape(t, x, {3, 6}), rf); },
        {{"x", x}});
  }
  {  // resize, pools, reductions, rows, bmm, patches
    Tensor x = testutil::random_tensor(rng, {2, 6, 6, 3}, true);
    Tensor r54 = testutil::random_tensor(rng, {2, 5, 4, 3});
    run("resize_bilinear",
        [&](Tape& t) { return weighted(t, diff::resize_bilinear(t, x, 5, 4), r54); }, {{"x", x}});
    Tensor rp = testutil::random_tensor(rng, {2, 3, 3, 3});
    run("avgpool2x2", [&](Tape& t) { return weighted(t, diff::avgpool2x2(t, x), rp); },
        {{"x", x}});
    Tensor rg = testutil::random_tensor(rng, {2, 3});
    run("global_avgpool", [&](Tape& t) { return weighted(t, diff::global_avgpool(t, x), rg); },
        {{"x", x}});
    Tensor rs = testutil::random_tensor(rng, {2, 6, 6});
    run("reduce_sum_lastdim",
        [&](Tape& t) { return weighted(t, diff::reduce_sum_lastdim(t, x), rs); }, {{"x", x}});
    run("reduce_mean_all", [&](Tape& t) { return diff::reduce_mean_all(t, diff::mul(t, x, x)); },
        {{"x", x}});
    Tensor p = testutil::random_tensor(rng, {2, 4, 6}, true, 0.2, 1.0);
    Tensor n = testutil::random_tensor(rng, {2, 4}, true, 0.5, 2.0);
    Tensor rr = testutil::random_tensor(rng, {2, 4, 6});
    run("div_rows", [&](Tape& t) { return weighted(t, diff::div_rows(t, p, n), rr); },
        {{"p", p}, {"n", n}});
    Tensor rb = testutil::random_tensor(rng, {2, 4, 4});
    run("bmm_nt",
        [&](Tape& t) {
          Tensor q = diff::div_rows(t, p, n);
          return weighted(t, diff::bmm_nt(t, q, q), rb);
        },
        {{"p", p}, {"n", n}});
    Tensor rpatch = testutil::random_tensor(rng, {2, 9, 12});
    run("extract_patches",
        [&](Tape& t) { return weighted(t, diff::extract_patches(t, x, 3), rpatch); }, {{"x", x}});
  }

  // full combined loss on a 2-sample 32x32 batch: every parameter tensor
  {
    net::NetConfig ncfg;
    ncfg.image_size = 32;
    ncfg.k = 4;
    ncfg.seed = 77;
    net::TwoStreamNet network(ncfg);
    Tensor x1 = testutil::random_tensor(rng, {2, 32, 32, 3}, false, 0.0, 1.0);
    Tensor x2 = testutil::random_tensor(rng, {2, 32, 32, 1}, false, -0.2, 0.2);
    Tensor y = Tensor::from_data({2, 1}, {1.0, 0.0});
    Tensor st = Tensor::full({2, 16, 16}, 1.0);
    Tensor mk = Tensor::zeros({2, 32, 32, 1});
    for (long i = 0; i < mk.numel(); ++i) mk.data()[i] = (i % 7 == 0) ? 1.0 : 0.0;
    auto fwd = [&](Tape& t) {
      auto out = network.forward(t, x1, x2, true);
      return objective::loss_total(t, objective::loss_ce(t, out.y_hat, y),
                                   objective::loss_sim(t, out.s_hat, st),
                                   objective::loss_seg(t, out.mask_hat, mk))
          .total;
    };
    testutil::FdOptions opt;
    opt.probes_per_param = 2;  // every parameter tensor, 2 probes each
    auto failures = testutil::fd_check(fwd, network.store().params(), rng, opt);
    for (const auto& f : failures) {
      char buf[200];
      std::snprintf(buf, sizeof(buf), "full-loss grad mismatch at %s[%ld]: %.3e vs %.3e",
                    f.param.c_str(), f.index, f.analytic, f.numeric);
      c.require(false, buf);
    }
    c.note("full-loss probes over " + std::to_string(network.store().params().size()) +
           " parameter tensors");
  }

  const double secs = omp_get_wtime() - t0;
  c.require(secs < 120.0, "runtime over 2 min");
  c.note(std::to_string(checked_ops) + " op cases, " + std::to_string(secs).substr(0, 5) + " s");
  return c;
}

// ---------------------------------------------------------------------------
// 3. similarity-pattern properties on 200 random patch sets (k=5)
// ---------------------------------------------------------------------------
Criterion criterion3() {
  Criterion c;
  Rng rng(3003);
  const int k2 = 25, l = 448;
  double worst_oracle = 0.0, worst_diag = 0.0, worst_scale = 0.0;
  for (int trial = 0; trial < 200 && c.ok; ++trial) {
    std::vector<std::vector<double>> rows(k2, std::vector<double>(l));
    for (auto& r : rows)
      for (double& v : r) v = rng.uniform(-1.0, 1.0);
    Tensor patches = Tensor::zeros({1, k2, l});
    for (int i = 0; i < k2; ++i)
      std::copy(rows[i].begin(), rows[i].end(), patches.data() + static_cast<size_t>(i) * l);
    Tape tape(false);
    Tensor s = mpsm::similarity_pattern(tape, patches);
    auto at = [&](int i, int j) { return s.data()[static_cast<size_t>(i) * k2 + j]; };

    for (int i = 0; i < k2; ++i) {
      worst_diag = std::max(worst_diag, std::fabs(at(i, i) - 1.0));
      for (int j = 0; j < k2; ++j) {
        c.require(at(i, j) == at(j, i), "asymmetry");
        c.require(at(i, j) >= 0.0 && at(i, j) <= 1.0, "out of [0,1]");
      }
    }
    const std::vector<double> want = ref::similarity_pattern_naive(rows, mpsm::kNormEps);
    worst_oracle = std::max(worst_oracle, testutil::max_abs_diff(s.values(), want));

    auto scaled = rows;
    const int which = static_cast<int>(rng.uniform_int(k2));
    const double factor = std::exp(rng.uniform(-4.0, 4.0));
    for (double& v : scaled[which]) v *= factor;
    Tensor patches2 = Tensor::zeros({1, k2, l});
    for (int i = 0; i < k2; ++i)
      std::copy(scaled[i].begin(), scaled[i].end(), patches2.data() + static_cast<size_t>(i) * l);
    Tape t2(false);
    Tensor s2 = mpsm::similarity_pattern(t2, patches2);
    worst_scale = std::max(worst_scale, testutil::max_abs_diff(s.values(), s2.values()));
  }
  c.require(worst_oracle < 1e-10, "loop oracle disagreement");
  c.require(worst_diag < 1e-12, "diagonal off unity");
  c.require(worst_scale < 1e-9, "scale invariance violated");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "oracle %.1e, diag %.1e, scale %.1e over 200 sets", worst_oracle,
                worst_diag, worst_scale);
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------------------
// 4. supervision oracles and shipped constants
// ---------------------------------------------------------------------------
Criterion criterion4() {
  Criterion c;
  Rng rng(4004);
  const int k = 5;
  double worst = 0.0;
  for (int trial = 0; trial < 200 && c.ok; ++trial) {
    const int h = 24 + static_cast<int>(rng.uniform_int(17));
    const int w = 24 + static_cast<int>(rng.uniform_int(17));
    Image a = testutil::random_image(rng, h, w, 3);
    Image b = testutil::random_image(rng, h, w, 3);
    Image mask = supervision::build_mask(a, b, 0.15);
    // independent per-pixel recompute of the mask rule
    for (int y = 0; y < h && c.ok; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = 0.299 * std::fabs(b.at(0, y, x) - a.at(0, y, x)) +
                         0.587 * std::fabs(b.at(1, y, x) - a.at(1, y, x)) +
                         0.114 * std::fabs(b.at(2, y, x) - a.at(2, y, x));
        c.require(mask.at(0, y, x) == (g > 0.15 ? 1.0 : 0.0), "mask oracle mismatch");
      }
    }
    const auto p = supervision::patch_probabilities(mask, k);
    // block-enumeration oracle, padding excluded
    const int ph = (h + k - 1) / k, pw = (w + k - 1) / k;
    for (int gr = 0; gr < k; ++gr) {
      for (int gc = 0; gc < k; ++gc) {
        double sum = 0.0;
        long cnt = 0;
        for (int y = gr * ph; y < std::min((gr + 1) * ph, h); ++y)
          for (int x = gc * pw; x < std::min((gc + 1) * pw, w); ++x) {
            sum += mask.at(0, y, x);
            ++cnt;
          }
        worst = std::max(worst, std::fabs(p[static_cast<size_t>(gr) * k + gc] - sum / cnt));
      }
    }
    const auto s = supervision::target_similarity(p);
    for (size_t i = 0; i < p.size(); ++i)
      for (size_t j = 0; j < p.size(); ++j) {
        const double want = 1.0 - (p[i] - p[j]) * (p[i] - p[j]);
        worst = std::max(worst, std::fabs(s[i * p.size() + j] - want));
      }
  }
  c.require(worst < 1e-12, "supervision oracle disagreement");

  {  // all-real mask target is the all-ones matrix
    Image zero(40, 40, 1);
    const auto s = supervision::target_similarity(supervision::patch_probabilities(zero, k));
    for (double v : s) c.require(v == 1.0, "all-real target not all-ones");
  }
  {  // shipped defaults
    const TrainConfig cfg;
    c.require(cfg.alpha == 0.33, "alpha default");
    c.require(cfg.k == 5, "k default");
    c.require(cfg.lambda1 == 10.0, "lambda1 default");
    c.require(cfg.lambda2 == 1.0, "lambda2 default");
    c.require(cfg.mask_threshold == 0.15, "mask threshold default");
    c.require(supervision::kMaskThreshold == 0.15, "mask threshold constant");
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "oracle %.1e over 200 instances; defaults verified", worst);
  c.note(buf);
  return c;
}

// shared state between criteria 5 and 6
struct TrainRuns {
  trainer::TrainResult full;
  double full_seconds = 0.0;
  bool full_done = false;
  std::string corpus;
};
TrainRuns g_runs;

void ensure_default_corpus() {
  if (!g_runs.corpus.empty()) return;
  g_runs.corpus = scratch_root() + "/corpus_default";
  if (!std::filesystem::exists(g_runs.corpus + "/manifest.csv")) {
    const double t0 = omp_get_wtime();
    datagen::generate_corpus(g_runs.corpus, 2000, 64, 42);
    std::printf("        (corpus: 2000 samples at 64x64, %.1f s)\n", omp_get_wtime() - t0);
  }
}

// ---------------------------------------------------------------------------
// 5. end-to-end learning under the default configuration
// ---------------------------------------------------------------------------
Criterion criterion5() {
  Criterion c;
  ensure_default_corpus();
  const TrainConfig cfg;  // defaults: seed 42, 64x64, 20 epochs, batch 16
  const double t0 = omp_get_wtime();
  g_runs.full = trainer::train(cfg, g_runs.corpus, scratch_root() + "/train_full");
  g_runs.full_seconds = omp_get_wtime() - t0;
  g_runs.full_done = true;

  const auto& log = g_runs.full.log;
  const auto& best = log[static_cast<size_t>(g_runs.full.best_epoch)];
  const double first_loss = log.front().train_loss;
  const double last_loss = log.back().train_loss;

  c.require(best.val_acc >= 0.95, "held-out ACC below 0.95");
  c.require(best.val_auc >= 0.98, "held-out AUC below 0.98");
  c.require(last_loss < 0.25 * first_loss, "final loss not under 25% of epoch-1 loss");
  c.require(g_runs.full_seconds <= 900.0, "training runtime over 15 min");
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "acc %.4f, auc %.4f, loss %.3f -> %.3f (%.1f%%), %.0f s, best epoch %d",
                best.val_acc, best.val_auc, first_loss, last_loss, 100.0 * last_loss / first_loss,
                g_runs.full_seconds, g_runs.full.best_epoch);
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------------------
// 6. ablation direction: full model vs RGB-only baseline without MPSM
// ---------------------------------------------------------------------------
Criterion criterion6() {
  Criterion c;
  ensure_default_corpus();
  if (!g_runs.full_done) {
    const double t0 = omp_get_wtime();
    g_runs.full = trainer::train(TrainConfig{}, g_runs.corpus, scratch_root() + "/train_full");
    g_runs.full_seconds = omp_get_wtime() - t0;
    g_runs.full_done = true;
  }
  TrainConfig base_cfg;
  base_cfg.rgb_baseline = true;
  const auto baseline =
      trainer::train(base_cfg, g_runs.corpus, scratch_root() + "/train_baseline");

  const double auc_full = g_runs.full.best_auc;
  const double auc_base = baseline.best_auc;
  c.require(auc_full >= auc_base - 0.01, "full model AUC more than 0.01 below the baseline");
  char buf[200];
  std::snprintf(buf, sizeof(buf), "full auc %.4f vs baseline auc %.4f (logs: %s, %s)", auc_full,
                auc_base, g_runs.full.metrics_path.c_str(), baseline.metrics_path.c_str());
  c.note(buf);
  return c;
}

// ---------------------------------------------------------------------------
// 7. determinism: identical config -> bit-identical logs and checkpoints
// ---------------------------------------------------------------------------
Criterion criterion7() {
  Criterion c;
  const std::string corpus = scratch_root() + "/corpus_small";
  if (!std::filesystem::exists(corpus + "/manifest.csv")) {
    datagen::generate_corpus(corpus, 120, 32, 7);
  }
  TrainConfig cfg;
  cfg.image_size = 32;
  cfg.k = 4;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.seed = 123;

  const auto r1 = trainer::train(cfg, corpus, scratch_root() + "/det_run1");
  const auto r2 = trainer::train(cfg, corpus, scratch_root() + "/det_run2");
  c.require(file_bytes(r1.metrics_path) == file_bytes(r2.metrics_path),
            "metrics logs differ between identical runs");
  c.require(file_bytes(r1.checkpoint_path) == file_bytes(r2.checkpoint_path),
            "checkpoints differ between identical runs");
  c.note("3-epoch runs on a 120-sample 32x32 corpus compared byte for byte");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> enabled;
  for (int i = 1; i < argc; ++i) enabled.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return enabled.empty() || enabled.count(n) > 0; };

  struct Entry {
    int num;
    const char* name;
    Criterion (*fn)();
  };
  const Entry entries[] = {
      {1, "DCT correctness", criterion1},
      {2, "gradient suite", criterion2},
      {3, "similarity-pattern properties", criterion3},
      {4, "supervision properties and shipped constants", criterion4},
      {5, "end-to-end learning", criterion5},
      {6, "ablation direction", criterion6},
      {7, "determinism", criterion7},
  };

  bool all_ok = true;
  for (const Entry& e : entries) {
    if (!want(e.num)) continue;
    Criterion c;
    try {
      c = e.fn();
    } catch (const std::exception& ex) {
      c.ok = false;
      c.note(std::string("exception: ") + ex.what());
    }
    std::printf("[%s] criterion %d: %s (%s)\n", c.ok ? "PASS" : "FAIL", e.num, e.name,
                c.detail.str().c_str());
    std::fflush(stdout);
    all_ok = all_ok && c.ok;
  }
  return all_ok ? 0 : 1;
}
