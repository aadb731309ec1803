#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locrel/error.hpp"
#include "locrel/objective.hpp"
#include "locrel/rng.hpp"
#include "support/fd_check.hpp"
#include "support/test_util.hpp"

using namespace locrel;
using diff::Tape;
using diff::Tensor;
using namespace locrel::objective;

TEST_CASE("loss_sim closed forms") {
  Tape tape(false);
  SUBCASE("identical patterns give ~0") {
    Rng rng(1);
    Tensor s = testutil::random_tensor(rng, {2, 25, 25}, false, 0.0, 1.0);
    CHECK(loss_sim(tape, s, s).scalar() < 1e-7);
  }
  SUBCASE("ones vs zeros at k=5 gives 25") {
    Tensor ones = Tensor::full({1, 25, 25}, 1.0);
    Tensor zeros = Tensor::zeros({1, 25, 25});
    CHECK(loss_sim(tape, zeros, ones).scalar() == doctest::Approx(25.0).epsilon(1e-12));
  }
  SUBCASE("random pair matches the scalar oracle") {
    Rng rng(2);
    Tensor a = testutil::random_tensor(rng, {3, 9, 9}, false, 0.0, 1.0);
    Tensor b = testutil::random_tensor(rng, {3, 9, 9}, false, 0.0, 1.0);
    double want = 0.0;
    for (int n = 0; n < 3; ++n) {
      double ss = 0.0;
      for (int i = 0; i < 81; ++i) {
        const double d = a.data()[n * 81 + i] - b.data()[n * 81 + i];
        ss += d * d;
      }
      want += std::sqrt(ss + kSimEps * kSimEps);
    }
    want /= 3.0;
    CHECK(std::fabs(loss_sim(tape, a, b).scalar() - want) < 1e-12);
  }
  SUBCASE("symmetric in its arguments") {
    Rng rng(3);
    Tensor a = testutil::random_tensor(rng, {2, 4, 4}, false, 0.0, 1.0);
    Tensor b = testutil::random_tensor(rng, {2, 4, 4}, false, 0.0, 1.0);
    CHECK(loss_sim(tape, a, b).scalar() == loss_sim(tape, b, a).scalar());
  }
  SUBCASE("shape mismatch") {
    Tensor a = Tensor::zeros({1, 4, 4});
    Tensor b = Tensor::zeros({1, 9, 9});
    CHECK_THROWS_AS(loss_sim(tape, a, b), DimensionError);
  }
}

TEST_CASE("loss_ce closed forms") {
  Tape tape(false);
  SUBCASE("near-perfect prediction") {
    Tensor y_hat = Tensor::from_data({1, 1}, {1.0 - 1e-7});
    Tensor y = Tensor::from_data({1, 1}, {1.0});
    CHECK(loss_ce(tape, y_hat, y).scalar() == doctest::Approx(1e-7).epsilon(0.01));
  }
  SUBCASE("uninformative prediction gives log 2") {
    Tensor y_hat = Tensor::from_data({1, 1}, {0.5});
    Tensor y = Tensor::from_data({1, 1}, {0.0});
    CHECK(loss_ce(tape, y_hat, y).scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("batch mean matches the scalar oracle") {
    Rng rng(4);
    Tensor y_hat = testutil::random_tensor(rng, {8, 1}, false, 0.02, 0.98);
    Tensor y = Tensor::zeros({8, 1});
    for (int i = 0; i < 8; ++i) y.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    double want = 0.0;
    for (int i = 0; i < 8; ++i) {
      const double p = y_hat.data()[i];
      want += y.data()[i] == 1.0 ? -std::log(p) : -std::log(1.0 - p);
    }
    want /= 8.0;
    CHECK(std::fabs(loss_ce(tape, y_hat, y).scalar() - want) < 1e-12);
  }
}

TEST_CASE("loss_seg closed forms") {
  Tape tape(false);
  SUBCASE("matching masks give ~0") {
    Tensor m = Tensor::zeros({1, 8, 8, 1});
    for (int i = 0; i < 64; i += 3) m.data()[i] = 1.0;
    Tensor mh = Tensor::zeros({1, 8, 8, 1});
    for (int i = 0; i < 64; ++i) mh.data()[i] = m.data()[i] == 1.0 ? 1.0 - 1e-7 : 1e-7;
    CHECK(loss_seg(tape, mh, m).scalar() < 1e-6);
  }
  SUBCASE("uniform 0.5 prediction gives log 2 after normalization") {
    Tensor m = Tensor::zeros({2, 8, 8, 1});
    Tensor mh = Tensor::full({2, 8, 8, 1}, 0.5);
    CHECK(loss_seg(tape, mh, m).scalar() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // raw sum variant
    CHECK(loss_seg(tape, mh, m, /*normalize=*/false).scalar() ==
          doctest::Approx(64.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("random pair matches the loop oracle") {
    Rng rng(5);
    Tensor m = Tensor::zeros({2, 4, 4, 1});
    for (long i = 0; i < m.numel(); ++i) m.data()[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    Tensor mh = testutil::random_tensor(rng, {2, 4, 4, 1}, false, 0.01, 0.99);
    double want = 0.0;
    for (int n = 0; n < 2; ++n) {
      double s = 0.0;
      for (int i = 0; i < 16; ++i) {
        const double p = mh.data()[n * 16 + i];
        s += m.data()[n * 16 + i] == 1.0 ? -std::log(p) : -std::log(1.0 - p);
      }
      want += s / 16.0;
    }
    want /= 2.0;
    CHECK(std::fabs(loss_seg(tape, mh, m).scalar() - want) < 1e-12);
  }
}

TEST_CASE("loss_total weighting") {
  Tape tape(false);
  Tensor ce = Tensor::from_data({1}, {1.0});
  Tensor sim = Tensor::from_data({1}, {0.2});
  Tensor seg = Tensor::from_data({1}, {0.5});
  SUBCASE("spec arithmetic") {
    auto breakdown = loss_total(tape, ce, sim, seg, 10.0, 1.0);
    CHECK(breakdown.l_total == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(breakdown.l_ce == 1.0);
    CHECK(breakdown.l_sim == 0.2);
    CHECK(breakdown.l_seg == 0.5);
  }
  SUBCASE("zero components give zero") {
    Tensor z = Tensor::zeros({1});
    CHECK(loss_total(tape, z, z, z).l_total == 0.0);
  }
  SUBCASE("random weights match plain arithmetic") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
      const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
      const double l1 = rng.uniform(0.0, 20.0), l2 = rng.uniform(0.0, 5.0);
      auto breakdown = loss_total(tape, Tensor::from_data({1}, {a}), Tensor::from_data({1}, {b}),
                                  Tensor::from_data({1}, {c}), l1, l2);
      CHECK(std::fabs(breakdown.l_total - (a + l1 * b + l2 * c)) < 1e-12);
    }
  }
  SUBCASE("negative weights rejected") {
    CHECK_THROWS_AS(loss_total(tape, ce, sim, seg, -1.0, 1.0), ConfigError);
  }
}

TEST_CASE("loss gradients pass finite differences") {
  Rng rng(7);
  Tensor s_hat = testutil::random_tensor(rng, {2, 9, 9}, true, 0.1, 0.9);
  Tensor s = testutil::random_tensor(rng, {2, 9, 9}, false, 0.0, 1.0);
  Tensor y_hat = testutil::random_tensor(rng, {4, 1}, true, 0.1, 0.9);
  Tensor y = Tensor::from_data({4, 1}, {1.0, 0.0, 1.0, 0.0});
  Tensor mh = testutil::random_tensor(rng, {2, 4, 4, 1}, true, 0.1, 0.9);
  Tensor m = Tensor::zeros({2, 4, 4, 1});
  for (long i = 0; i < m.numel(); ++i) m.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;

  auto fwd = [&](Tape& t) {
    return loss_total(t, loss_ce(t, y_hat, y), loss_sim(t, s_hat, s), loss_seg(t, mh, m), 10.0,
                      1.0)
        .total;
  };
  auto failures =
      testutil::fd_check(fwd, {{"s_hat", s_hat}, {"y_hat", y_hat}, {"mask_hat", mh}}, rng);
  for (const auto& f : failures) {
    CAPTURE(f.param);
    CAPTURE(f.rel);
    CHECK(f.rel < 1e-4);
  }
  CHECK(failures.empty());
}

TEST_CASE("metrics: perfectly separated scores") {
  std::vector<std::pair<double, int>> scores;
  for (int i = 0; i < 10; ++i) scores.emplace_back(0.9 + 0.005 * i, 1);
  for (int i = 0; i < 10; ++i) scores.emplace_back(0.1 + 0.005 * i, 0);
  const EvalReport r = metrics(scores);
  CHECK(r.acc == 1.0);
  CHECK(r.auc == 1.0);
  CHECK(r.eer == 0.0);
}

TEST_CASE("metrics: random scores on balanced labels give AUC ~ 0.5") {
  Rng rng(8);
  std::vector<std::pair<double, int>> scores;
  for (int i = 0; i < 4000; ++i) scores.emplace_back(rng.uniform(), i % 2);
  const double a = auc(scores);
  CHECK(a > 0.45);
  CHECK(a < 0.55);
}

TEST_CASE("AUC equals the concordant-pair counting oracle with half ties") {
  const std::vector<std::pair<double, int>> scores = {
      {0.9, 1}, {0.8, 0}, {0.8, 1}, {0.7, 0}, {0.6, 1},
      {0.5, 1}, {0.5, 0}, {0.3, 0}, {0.2, 1}, {0.1, 0},
  };
  double concordant = 0.0;
  long pairs = 0;
  for (const auto& [sp, yp] : scores) {
    if (yp != 1) continue;
    for (const auto& [sn, yn] : scores) {
      if (yn != 0) continue;
      ++pairs;
      if (sp > sn) concordant += 1.0;
      if (sp == sn) concordant += 0.5;
    }
  }
  CHECK(auc(scores) == doctest::Approx(concordant / pairs).epsilon(1e-12));
}

TEST_CASE("AUC is invariant under strictly monotone score transforms") {
  Rng rng(9);
  std::vector<std::pair<double, int>> scores;
  for (int i = 0; i < 200; ++i) {
    const int y = i % 2;
    scores.emplace_back(rng.uniform() * 0.6 + 0.3 * y, y);
  }
  const double base = auc(scores);
  auto transformed = scores;
  for (auto& [s, y] : transformed) s = std::exp(3.0 * s) - 7.0;
  CHECK(auc(transformed) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("EER sits where FPR crosses FNR") {
  // scores: pos {0.9, 0.7, 0.4}, neg {0.6, 0.3, 0.1}
  const std::vector<std::pair<double, int>> scores = {
      {0.9, 1}, {0.7, 1}, {0.4, 1}, {0.6, 0}, {0.3, 0}, {0.1, 0},
  };
  // threshold sweep: at t=0.6: FPR=1/3, FNR=1/3 -> EER exactly 1/3
  CHECK(eer(scores) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("single-class input: AUC/EER raise, accuracy still works") {
  std::vector<std::pair<double, int>> scores = {{0.8, 1}, {0.6, 1}, {0.3, 1}};
  CHECK_THROWS_AS(auc(scores), ConfigError);
  CHECK_THROWS_AS(eer(scores), ConfigError);
  CHECK_THROWS_AS(metrics(scores), ConfigError);
  CHECK(accuracy(scores) == doctest::Approx(2.0 / 3.0));
}
