#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "locrel/error.hpp"
#include "locrel/net.hpp"
#include "locrel/objective.hpp"
#include "locrel/rng.hpp"
#include "support/fd_check.hpp"
#include "support/test_util.hpp"

using namespace locrel;
using diff::Tape;
using diff::Tensor;

namespace {

net::NetConfig small_cfg() {
  net::NetConfig cfg;
  cfg.image_size = 32;
  cfg.k = 4;
  cfg.seed = 7;
  return cfg;
}

Tensor find_param(net::TwoStreamNet& network, const std::string& name) {
  for (const auto& [n, t] : network.store().params()) {
    if (n == name) return t;
  }
  throw std::runtime_error("no such param: " + name);
}

}  // namespace

TEST_CASE("rfam with zeroed attention conv gives 0.5 everywhere") {
  net::TwoStreamNet network(small_cfg());
  Tensor aw = find_param(network, "rfam1.attn.w");
  Tensor ab = find_param(network, "rfam1.attn.b");
  std::fill(aw.values().begin(), aw.values().end(), 0.0);
  std::fill(ab.values().begin(), ab.values().end(), 0.0);

  Rng rng(1);
  Tensor u1 = testutil::random_tensor(rng, {2, 6, 6, 16});
  Tensor u2 = testutil::random_tensor(rng, {2, 6, 6, 16});
  Tape tape(false);
  auto out = network.rfam(tape, 0, u1, u2, /*training=*/true);
  for (double v : out.a1.values()) CHECK(v == 0.5);
  for (double v : out.a2.values()) CHECK(v == 0.5);
  for (long i = 0; i < out.fused.numel(); ++i) {
    CHECK(out.fused.data()[i] ==
          doctest::Approx(0.5 * (u1.data()[i] + u2.data()[i])).epsilon(1e-14));
  }
}

TEST_CASE("rfam fused map matches the elementwise oracle and keeps shape") {
  net::TwoStreamNet network(small_cfg());
  Rng rng(2);
  for (auto [h, w] : {std::pair{6, 6}, {4, 10}}) {
    Tensor u1 = testutil::random_tensor(rng, {2, h, w, 16});
    Tensor u2 = testutil::random_tensor(rng, {2, h, w, 16});
    Tape tape(false);
    auto out = network.rfam(tape, 0, u1, u2, true);
    CHECK(out.fused.shape() == u1.shape());
    CHECK(out.a1.shape() == std::vector<int>{2, h, w, 1});
    double maxdiff = 0.0;
    const long rows = u1.numel() / 16;
    for (long r = 0; r < rows; ++r) {
      for (int c = 0; c < 16; ++c) {
        const double want =
            out.a1.data()[r] * u1.data()[r * 16 + c] + out.a2.data()[r] * u2.data()[r * 16 + c];
        maxdiff = std::max(maxdiff, std::fabs(out.fused.data()[r * 16 + c] - want));
      }
    }
    CHECK(maxdiff < 1e-10);
  }
}

TEST_CASE("rfam attention values stay strictly inside (0,1)") {
  net::TwoStreamNet network(small_cfg());
  Rng rng(3);
  Tensor u1 = testutil::random_tensor(rng, {2, 8, 8, 16}, false, -30.0, 30.0);
  Tensor u2 = testutil::random_tensor(rng, {2, 8, 8, 16}, false, -30.0, 30.0);
  Tape tape(false);
  auto out = network.rfam(tape, 0, u1, u2, true);
  for (double v : out.a1.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("rfam rejects mismatched stream shapes") {
  net::TwoStreamNet network(small_cfg());
  Tape tape(false);
  Tensor u1 = Tensor::zeros({1, 6, 6, 16});
  Tensor u2 = Tensor::zeros({1, 6, 5, 16});
  CHECK_THROWS_AS(network.rfam(tape, 0, u1, u2, true), DimensionError);
}

TEST_CASE("forward output shapes at 64x64 with k=5") {
  net::NetConfig cfg;
  cfg.image_size = 64;
  cfg.k = 5;
  cfg.seed = 11;
  net::TwoStreamNet network(cfg);
  Rng rng(4);
  Tensor x1 = testutil::random_tensor(rng, {2, 64, 64, 3}, false, 0.0, 1.0);
  Tensor x2 = testutil::random_tensor(rng, {2, 64, 64, 1}, false, -0.2, 0.2);
  Tape tape(false);
  auto out = network.forward(tape, x1, x2, /*training=*/false);
  CHECK(out.y_hat.shape() == std::vector<int>{2, 1});
  CHECK(out.mask_hat.shape() == std::vector<int>{2, 64, 64, 1});
  CHECK(out.s_hat.shape() == std::vector<int>{2, 25, 25});
  CHECK(out.fused[0].shape() == std::vector<int>{2, 32, 32, 16});
  CHECK(out.fused[1].shape() == std::vector<int>{2, 16, 16, 32});
  CHECK(out.fused[2].shape() == std::vector<int>{2, 8, 8, 64});
  for (double v : out.y_hat.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  for (double v : out.mask_hat.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  for (double v : out.s_hat.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("duplicated samples in an eval batch produce identical outputs") {
  net::TwoStreamNet network(small_cfg());
  Rng rng(5);
  Tensor x1 = Tensor::zeros({2, 32, 32, 3});
  Tensor x2 = Tensor::zeros({2, 32, 32, 1});
  for (long i = 0; i < x1.numel() / 2; ++i) {
    x1.data()[i] = rng.uniform();
    x1.data()[x1.numel() / 2 + i] = x1.data()[i];
  }
  for (long i = 0; i < x2.numel() / 2; ++i) {
    x2.data()[i] = rng.uniform(-0.2, 0.2);
    x2.data()[x2.numel() / 2 + i] = x2.data()[i];
  }
  Tape tape(false);
  auto out = network.forward(tape, x1, x2, false);
  CHECK(out.y_hat.data()[0] == out.y_hat.data()[1]);
  const long half = out.mask_hat.numel() / 2;
  CHECK(std::memcmp(out.mask_hat.data(), out.mask_hat.data() + half, half * sizeof(double)) == 0);
}

TEST_CASE("permuting an eval batch leaves per-sample outputs unchanged") {
  net::TwoStreamNet network(small_cfg());
  Rng rng(6);
  Tensor a1 = testutil::random_tensor(rng, {1, 32, 32, 3}, false, 0.0, 1.0);
  Tensor a2 = testutil::random_tensor(rng, {1, 32, 32, 1}, false, -0.2, 0.2);
  Tensor b1 = testutil::random_tensor(rng, {1, 32, 32, 3}, false, 0.0, 1.0);
  Tensor b2 = testutil::random_tensor(rng, {1, 32, 32, 1}, false, -0.2, 0.2);

  auto batch = [&](const Tensor& f1, const Tensor& f2, const Tensor& g1, const Tensor& g2) {
    Tensor x1 = Tensor::zeros({2, 32, 32, 3});
    Tensor x2 = Tensor::zeros({2, 32, 32, 1});
    std::copy(f1.data(), f1.data() + f1.numel(), x1.data());
    std::copy(g1.data(), g1.data() + g1.numel(), x1.data() + f1.numel());
    std::copy(f2.data(), f2.data() + f2.numel(), x2.data());
    std::copy(g2.data(), g2.data() + g2.numel(), x2.data() + f2.numel());
    Tape tape(false);
    return network.forward(tape, x1, x2, false);
  };
  auto ab = batch(a1, a2, b1, b2);
  auto ba = batch(b1, b2, a1, a2);
  CHECK(ab.y_hat.data()[0] == ba.y_hat.data()[1]);
  CHECK(ab.y_hat.data()[1] == ba.y_hat.data()[0]);
  const long n = ab.s_hat.numel() / 2;
  CHECK(std::memcmp(ab.s_hat.data(), ba.s_hat.data() + n, n * sizeof(double)) == 0);
}

TEST_CASE("forward rejects mismatched x1/x2 extents") {
  net::TwoStreamNet network(small_cfg());
  Tape tape(false);
  Tensor x1 = Tensor::zeros({1, 32, 32, 3});
  Tensor x2 = Tensor::zeros({1, 16, 16, 1});
  CHECK_THROWS_AS(network.forward(tape, x1, x2, false), DimensionError);
}

TEST_CASE("config validation") {
  net::NetConfig cfg;
  cfg.image_size = 33;
  CHECK_THROWS_AS(net::TwoStreamNet{cfg}, ConfigError);
  cfg.image_size = 32;
  cfg.k = 5;  // high stage is 4x4
  CHECK_THROWS_AS(net::TwoStreamNet{cfg}, ConfigError);
}

TEST_CASE("end-to-end loss is differentiable through the first conv") {
  net::TwoStreamNet network(small_cfg());
  Rng rng(8);
  const int k2 = 16;
  Tensor x1 = testutil::random_tensor(rng, {2, 32, 32, 3}, false, 0.0, 1.0);
  Tensor x2 = testutil::random_tensor(rng, {2, 32, 32, 1}, false, -0.2, 0.2);
  Tensor y = Tensor::from_data({2, 1}, {1.0, 0.0});
  Tensor starget = Tensor::full({2, k2, k2}, 1.0);
  Tensor mask = Tensor::zeros({2, 32, 32, 1});
  for (long i = 0; i < mask.numel(); ++i) mask.data()[i] = rng.uniform() < 0.2 ? 1.0 : 0.0;

  auto fwd = [&](Tape& t) {
    auto out = network.forward(t, x1, x2, /*training=*/true);
    return objective::loss_total(t, objective::loss_ce(t, out.y_hat, y),
                                 objective::loss_sim(t, out.s_hat, starget),
                                 objective::loss_seg(t, out.mask_hat, mask))
        .total;
  };

  // analytic gradient of the first conv kernel is nonzero
  Tensor w0 = find_param(network, "rgb.s1.conv1.w");
  for (const auto& [name, p] : network.store().params()) {
    Tensor handle = p;
    handle.zero_grad();
  }
  Tape tape;
  tape.backward(fwd(tape));
  double gnorm = 0.0;
  for (double g : w0.grad()) gnorm += g * g;
  CHECK(gnorm > 0.0);

  // spot finite-difference check on a few parameters incl. that kernel
  testutil::FdOptions opt;
  opt.probes_per_param = 6;
  auto failures = testutil::fd_check(
      fwd,
      {{"rgb.s1.conv1.w", w0},
       {"freq.s1.conv1.w", find_param(network, "freq.s1.conv1.w")},
       {"rfam1.attn.w", find_param(network, "rfam1.attn.w")},
       {"head.fc2.w", find_param(network, "head.fc2.w")},
       {"dec_out.w", find_param(network, "dec_out.w")}},
      rng, opt);
  for (const auto& f : failures) {
    CAPTURE(f.param);
    CAPTURE(f.analytic);
    CAPTURE(f.numeric);
    CHECK(f.rel < 1e-4);
  }
  CHECK(failures.empty());
}

TEST_CASE("forward rejects an undefined RGB input") {
  net::NetConfig cfg = small_cfg();
  cfg.rgb_baseline = true;
  net::TwoStreamNet network(cfg);
  Tape tape(false);
  CHECK_THROWS_AS(network.forward(tape, Tensor(), Tensor(), false), DimensionError);
}

TEST_CASE("rgb baseline forward works without a frequency cue") {
  net::NetConfig cfg = small_cfg();
  cfg.rgb_baseline = true;
  net::TwoStreamNet network(cfg);
  Rng rng(10);
  Tensor x1 = testutil::random_tensor(rng, {2, 32, 32, 3}, false, 0.0, 1.0);
  Tape tape(false);
  auto out = network.forward(tape, x1, Tensor(), false);
  CHECK(out.y_hat.shape() == std::vector<int>{2, 1});
  CHECK(out.mask_hat.shape() == std::vector<int>{2, 32, 32, 1});
  CHECK(!out.s_hat.defined());
}
