// Timing comparison between the OpenMP/vector kernels and the serial
// reference implementations on training-shaped inputs.
#include <omp.h>

#include <cstdio>
#include <vector>

#include "locrel/dct.hpp"
#include "locrel/kernels.hpp"
#include "locrel/rng.hpp"
#include "ref/ref_kernels.hpp"

using locrel::Rng;
namespace kernels = locrel::kernels;
namespace ref = locrel::ref;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    const double t0 = omp_get_wtime();
    f();
    best = std::min(best, omp_get_wtime() - t0);
  }
  return best;
}

void bench_conv(Rng& rng, int n, int h, int ci, int co) {
  kernels::ConvDims d{n, h, h, ci, 3, 3, co, 1, 1, h, h};
  std::vector<double> x(static_cast<size_t>(n) * h * h * ci);
  std::vector<double> w(static_cast<size_t>(9) * ci * co);
  std::vector<double> b(co);
  std::vector<double> out_fast(static_cast<size_t>(n) * h * h * co);
  std::vector<double> out_ref(out_fast.size());
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (auto& v : w) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);

  const double flops = 2.0 * n * h * h * co * 9.0 * ci;
  const double t_ref =
      time_best_of(2, [&] { ref::conv2d_naive(x.data(), w.data(), b.data(), out_ref.data(), d); });
  const double t_fast = time_best_of(
      5, [&] { kernels::conv2d_forward(x.data(), w.data(), b.data(), out_fast.data(), d); });
  std::printf("conv3x3 %dx%dx%d->%d   ref %8.2f ms  kernel %8.2f ms  %6.1fx  %6.2f GF/s  maxdiff %.1e\n",
              h, h, ci, co, t_ref * 1e3, t_fast * 1e3, t_ref / t_fast, flops / t_fast / 1e9,
              max_abs_diff(out_fast, out_ref));
}

void bench_dct(Rng& rng, int n) {
  locrel::Image img(n, n, 1);
  for (auto& v : img.data) v = rng.uniform();
  locrel::DctCoefficients fast, naive;
  const double t_ref = time_best_of(1, [&] { naive = ref::dct2d_naive(img); });
  const double t_fast = time_best_of(5, [&] { fast = locrel::dct2d(img); });
  std::printf("dct2d   %dx%d            ref %8.2f ms  kernel %8.2f ms  %6.1fx  maxdiff %.1e\n", n,
              n, t_ref * 1e3, t_fast * 1e3, t_ref / t_fast, max_abs_diff(fast.data, naive.data));
}

void bench_resize(Rng& rng, int n, int h, int c, int ho) {
  std::vector<double> x(static_cast<size_t>(n) * h * h * c);
  std::vector<double> fast(static_cast<size_t>(n) * ho * ho * c), naive(fast.size());
  for (auto& v : x) v = rng.uniform(-1, 1);
  const double t_ref = time_best_of(
      3, [&] { ref::resize_bilinear_naive(x.data(), n, h, h, c, ho, ho, naive.data()); });
  const double t_fast = time_best_of(
      5, [&] { kernels::resize_bilinear_forward(x.data(), n, h, h, c, ho, ho, fast.data()); });
  std::printf("resize  %d->%d (c=%d)      ref %8.2f ms  kernel %8.2f ms  %6.1fx  maxdiff %.1e\n", h,
              ho, c, t_ref * 1e3, t_fast * 1e3, t_ref / t_fast, max_abs_diff(fast, naive));
}

void bench_similarity(Rng& rng, int k2, int l) {
  std::vector<double> a(static_cast<size_t>(k2) * l);
  for (auto& v : a) v = rng.uniform(-1, 1);
  std::vector<double> fast(static_cast<size_t>(k2) * k2), naive(fast.size());
  const double t_ref =
      time_best_of(3, [&] { ref::matmul_nt_naive(a.data(), a.data(), k2, k2, l, naive.data()); });
  const double t_fast =
      time_best_of(5, [&] { kernels::bmm_nt(a.data(), a.data(), 1, k2, k2, l, fast.data()); });
  std::printf("patchdot %dx%d (L=%d)    ref %8.2f ms  kernel %8.2f ms  %6.1fx  maxdiff %.1e\n", k2,
              k2, l, t_ref * 1e3, t_fast * 1e3, t_ref / t_fast, max_abs_diff(fast, naive));
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(7);
  bench_conv(rng, 16, 64, 16, 16);
  bench_conv(rng, 16, 32, 32, 32);
  bench_conv(rng, 16, 16, 64, 64);
  bench_dct(rng, 64);
  bench_resize(rng, 16, 32, 16, 8);
  bench_similarity(rng, 25, 448);
  return 0;
}
