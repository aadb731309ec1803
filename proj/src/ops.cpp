#include "locrel/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "locrel/kernels.hpp"

namespace locrel::diff {

namespace {

bool want_grad(const Tape& tape, std::initializer_list<const Tensor*> ins) {
  if (!tape.enabled()) return false;
  for (const Tensor* t : ins) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad) {
  if (x.ndim() != 4) throw DimensionError("conv2d: input must be [N,H,W,Cin]");
  if (w.ndim() != 4) throw DimensionError("conv2d: kernel must be [kh,kw,Cin,Cout]");
  if (w.dim(2) != x.dim(3)) {
    throw DimensionError("conv2d: kernel Cin " + std::to_string(w.dim(2)) +
                         " does not match input Cin " + std::to_string(x.dim(3)));
  }
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (pad < 0) throw ConfigError("conv2d: pad must be >= 0");
  kernels::ConvDims d;
  d.n = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.cin = x.dim(3);
  d.kh = w.dim(0);
  d.kw = w.dim(1);
  d.cout = w.dim(3);
  d.stride = stride;
  d.pad = pad;
  if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad) {
    throw DimensionError("conv2d: kernel exceeds padded input extents");
  }
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != d.cout)) {
    throw DimensionError("conv2d: bias must be [Cout]");
  }

  Tensor out = Tensor::uninitialized({d.n, d.ho, d.wo, d.cout});
  kernels::conv2d_forward(x.data(), w.data(), bias.defined() ? bias.data() : nullptr,
                          out.data(), d);

  if (want_grad(tape, {&x, &w, &bias})) {
    out.set_requires_grad(true);
    Tensor xc = x, wc = w, bc = bias, oc = out;
    tape.record([xc, wc, bc, oc, d]() mutable {
      if (!oc.has_grad()) return;
      const double* dout = oc.grad_view().data();
      if (xc.requires_grad()) {
        kernels::conv2d_backward_input(dout, wc.data(), xc.grad().data(), d);
      }
      if (wc.requires_grad() || (bc.defined() && bc.requires_grad())) {
        double* dw = wc.requires_grad() ? wc.grad().data() : nullptr;
        double* db = (bc.defined() && bc.requires_grad()) ? bc.grad().data() : nullptr;
        if (dw) {
          kernels::conv2d_backward_weights(xc.data(), dout, dw, db, d);
        } else if (db) {
          // bias-only gradient
          const long m = static_cast<long>(d.n) * d.ho * d.wo;
          for (long i = 0; i < m; ++i) {
            const double* dp = dout + static_cast<size_t>(i) * d.cout;
            for (int co = 0; co < d.cout; ++co) db[co] += dp[co];
          }
        }
      }
    });
  }
  return out;
}

namespace {

Tensor batchnorm_impl(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      BnStats& running, bool training, double momentum, double eps,
                      bool with_relu) {
  const int c = x.dim(x.ndim() - 1);
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("batchnorm: gamma/beta must have one entry per channel");
  }
  const long rows = x.numel() / c;
  // a degenerate single-row batch in training yields var = 0; the eps guard
  // below keeps the normalization finite
  if (running.mean.empty()) running.mean.assign(c, 0.0);
  if (running.var.empty()) running.var.assign(c, 1.0);

  std::vector<double> mean(c), var(c);
  if (training) {
    kernels::batch_mean_var(x.data(), rows, c, mean.data(), var.data());
    for (int ch = 0; ch < c; ++ch) {
      running.mean[ch] = (1.0 - momentum) * running.mean[ch] + momentum * mean[ch];
      running.var[ch] = (1.0 - momentum) * running.var[ch] + momentum * var[ch];
    }
  } else {
    mean = running.mean;
    var = running.var;
  }
  std::vector<double> invstd(c);
  for (int ch = 0; ch < c; ++ch) invstd[ch] = 1.0 / std::sqrt(var[ch] + eps);

  Tensor out = Tensor::uninitialized(x.shape());
  {
    const double* xp = x.data();
    const double* g = gamma.data();
    const double* b = beta.data();
    double* op = out.data();
    // fold gamma/invstd once; keep the relu branch out of the hot loop
    std::vector<double> scale(c), shift(c);
    for (int ch = 0; ch < c; ++ch) {
      scale[ch] = g[ch] * invstd[ch];
      shift[ch] = b[ch] - scale[ch] * mean[ch];
    }
    if (with_relu) {
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r) {
        const double* xr = xp + static_cast<size_t>(r) * c;
        double* orow = op + static_cast<size_t>(r) * c;
        for (int ch = 0; ch < c; ++ch) {
          const double v = scale[ch] * xr[ch] + shift[ch];
          orow[ch] = v > 0.0 ? v : 0.0;
        }
      }
    } else {
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r) {
        const double* xr = xp + static_cast<size_t>(r) * c;
        double* orow = op + static_cast<size_t>(r) * c;
        for (int ch = 0; ch < c; ++ch) {
          orow[ch] = scale[ch] * xr[ch] + shift[ch];
        }
      }
    }
  }

  if (want_grad(tape, {&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    Tensor xc = x, gc = gamma, bc = beta, oc = out;
    tape.record([xc, gc, bc, oc, mean, invstd, rows, c, training, with_relu]() mutable {
      if (!oc.has_grad()) return;
      kernels::bn_backward(xc.data(), oc.data(), oc.grad_view().data(), rows, c, mean.data(),
                           invstd.data(), gc.data(), training, with_relu,
                           gc.requires_grad() ? gc.grad().data() : nullptr,
                           bc.requires_grad() ? bc.grad().data() : nullptr,
                           xc.requires_grad() ? xc.grad().data() : nullptr);
    });
  }
  return out;
}

}  // namespace

Tensor batchnorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BnStats& running, bool training, double momentum, double eps) {
  return batchnorm_impl(tape, x, gamma, beta, running, training, momentum, eps, false);
}

Tensor batchnorm_relu(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      BnStats& running, bool training, double momentum, double eps) {
  return batchnorm_impl(tape, x, gamma, beta, running, training, momentum, eps, true);
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(Tape& tape, const Tensor& x, Fwd fwd, Bwd bwd_factor_from_xy) {
  Tensor out = Tensor::uninitialized(x.shape());
  const double* xp = x.data();
  double* op = out.data();
  const long n = x.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) op[i] = fwd(xp[i]);
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, bwd_factor_from_xy]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      const double* xp = xc.data();
      const double* yp = oc.data();
      double* dx = xc.grad().data();
      const long n = xc.numel();
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) dx[i] += dy[i] * bwd_factor_from_xy(xp[i], yp[i]);
    });
  }
  return out;
}

}  // namespace

Tensor relu(Tape& tape, const Tensor& x) {
  return unary_elementwise(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary_elementwise(
      tape, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor affine(Tape& tape, const Tensor& x, double scale, double shift) {
  return unary_elementwise(
      tape, x, [scale, shift](double v) { return scale * v + shift; },
      [scale](double, double) { return scale; });
}

Tensor clamp(Tape& tape, const Tensor& x, double lo, double hi) {
  return unary_elementwise(
      tape, x, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor log_op(Tape& tape, const Tensor& x) {
  return unary_elementwise(
      tape, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt_op(Tape& tape, const Tensor& x) {
  return unary_elementwise(
      tape, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::uninitialized(a.shape());
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  const long n = a.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      const long n = oc.numel();
      if (ac.requires_grad()) {
        double* da = ac.grad().data();
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) da[i] += dy[i];
      }
      if (bc.requires_grad()) {
        double* db = bc.grad().data();
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) db[i] += dy[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::uninitialized(a.shape());
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  const long n = a.numel();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) op[i] = ap[i] - bp[i];
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      const long n = oc.numel();
      if (ac.requires_grad()) {
        double* da = ac.grad().data();
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) da[i] += dy[i];
      }
      if (bc.requires_grad()) {
        double* db = bc.grad().data();
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) db[i] -= dy[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  // Either identical shapes, or one side broadcast from trailing extent 1.
  const bool same = a.shape() == b.shape();
  auto bcast_ok = [](const Tensor& full, const Tensor& thin) {
    if (full.ndim() != thin.ndim() || thin.dim(thin.ndim() - 1) != 1) return false;
    for (int i = 0; i + 1 < full.ndim(); ++i) {
      if (full.dim(i) != thin.dim(i)) return false;
    }
    return true;
  };
  const bool b_thin = !same && bcast_ok(a, b);
  const bool a_thin = !same && !b_thin && bcast_ok(b, a);
  if (!same && !b_thin && !a_thin) {
    throw DimensionError("mul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const Tensor& full = a_thin ? b : a;
  const Tensor& thin = a_thin ? a : (b_thin ? b : b);
  const int c = full.dim(full.ndim() - 1);
  const long rows = full.numel() / c;

  Tensor out = Tensor::uninitialized(full.shape());
  {
    const double* fp = full.data();
    const double* tp = thin.data();
    double* op = out.data();
    if (same) {
#pragma omp parallel for schedule(static)
      for (long i = 0; i < full.numel(); ++i) op[i] = fp[i] * tp[i];
    } else {
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r) {
        const double s = tp[r];
        const double* fr = fp + static_cast<size_t>(r) * c;
        double* orow = op + static_cast<size_t>(r) * c;
        for (int ch = 0; ch < c; ++ch) orow[ch] = fr[ch] * s;
      }
    }
  }

  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor fc = full, tc = thin, oc = out;
    const bool is_same = same;
    tape.record([fc, tc, oc, is_same, rows, c]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      if (is_same) {
        const long n = oc.numel();
        if (fc.requires_grad()) {
          double* df = fc.grad().data();
          const double* tp = tc.data();
#pragma omp parallel for schedule(static)
          for (long i = 0; i < n; ++i) df[i] += dy[i] * tp[i];
        }
        if (tc.requires_grad()) {
          double* dt = tc.grad().data();
          const double* fp = fc.data();
#pragma omp parallel for schedule(static)
          for (long i = 0; i < n; ++i) dt[i] += dy[i] * fp[i];
        }
      } else {
        if (fc.requires_grad()) {
          double* df = fc.grad().data();
          const double* tp = tc.data();
#pragma omp parallel for schedule(static)
          for (long r = 0; r < rows; ++r) {
            const double s = tp[r];
            const double* dyr = dy + static_cast<size_t>(r) * c;
            double* dfr = df + static_cast<size_t>(r) * c;
            for (int ch = 0; ch < c; ++ch) dfr[ch] += dyr[ch] * s;
          }
        }
        if (tc.requires_grad()) {
          double* dt = tc.grad().data();
          const double* fp = fc.data();
#pragma omp parallel for schedule(static)
          for (long r = 0; r < rows; ++r) {
            const double* dyr = dy + static_cast<size_t>(r) * c;
            const double* fr = fp + static_cast<size_t>(r) * c;
            double acc = 0.0;
            for (int ch = 0; ch < c; ++ch) acc += dyr[ch] * fr[ch];
            dt[r] += acc;
          }
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("concat_channels: no inputs");
  const int nd = xs[0].ndim();
  int ctotal = 0;
  for (const Tensor& t : xs) {
    if (t.ndim() != nd) throw DimensionError("concat_channels: rank mismatch");
    for (int i = 0; i + 1 < nd; ++i) {
      if (t.dim(i) != xs[0].dim(i)) throw DimensionError("concat_channels: leading dim mismatch");
    }
    ctotal += t.dim(nd - 1);
  }
  std::vector<int> oshape = xs[0].shape();
  oshape[nd - 1] = ctotal;
  Tensor out = Tensor::uninitialized(oshape);
  const long rows = out.numel() / ctotal;
  {
    double* op = out.data();
    long off = 0;
    for (const Tensor& t : xs) {
      const int c = t.dim(nd - 1);
      const double* tp = t.data();
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r) {
        std::memcpy(op + static_cast<size_t>(r) * ctotal + off, tp + static_cast<size_t>(r) * c,
                    sizeof(double) * c);
      }
      off += c;
    }
  }
  bool any = false;
  for (const Tensor& t : xs) any = any || t.requires_grad();
  if (tape.enabled() && any) {
    out.set_requires_grad(true);
    std::vector<Tensor> xc = xs;
    Tensor oc = out;
    tape.record([xc, oc, rows, ctotal]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      long off = 0;
      for (Tensor& t : xc) {
        const int c = t.dim(t.ndim() - 1);
        if (t.requires_grad()) {
          double* dt = t.grad().data();
#pragma omp parallel for schedule(static)
          for (long r = 0; r < rows; ++r) {
            const double* src = dy + static_cast<size_t>(r) * ctotal + off;
            double* dst = dt + static_cast<size_t>(r) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
        off += c;
      }
    });
  }
  return out;
}

std::vector<Tensor> split_channels(Tape& tape, const Tensor& x, const std::vector<int>& widths) {
  const int nd = x.ndim();
  const int c = x.dim(nd - 1);
  int sum = 0;
  for (int w : widths) sum += w;
  if (sum != c) throw DimensionError("split_channels: widths must sum to the channel extent");
  const long rows = x.numel() / c;

  std::vector<Tensor> outs;
  long off = 0;
  for (int w : widths) {
    std::vector<int> oshape = x.shape();
    oshape[nd - 1] = w;
    Tensor out = Tensor::uninitialized(oshape);
    double* op = out.data();
    const double* xp = x.data();
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
      std::memcpy(op + static_cast<size_t>(r) * w, xp + static_cast<size_t>(r) * c + off,
                  sizeof(double) * w);
    }
    outs.push_back(out);
    off += w;
  }
  if (want_grad(tape, {&x})) {
    for (Tensor& o : outs) o.set_requires_grad(true);
    Tensor xc = x;
    std::vector<Tensor> oc = outs;
    tape.record([xc, oc, rows, c]() mutable {
      double* dx = xc.grad().data();
      long off = 0;
      for (Tensor& o : oc) {
        const int w = o.dim(o.ndim() - 1);
        if (o.has_grad()) {
          const double* dy = o.grad_view().data();
#pragma omp parallel for schedule(static)
          for (long r = 0; r < rows; ++r) {
            double* dst = dx + static_cast<size_t>(r) * c + off;
            const double* src = dy + static_cast<size_t>(r) * w;
            for (int ch = 0; ch < w; ++ch) dst[ch] += src[ch];
          }
        }
        off += w;
      }
    });
  }
  return outs;
}

Tensor reshape(Tape& tape, const Tensor& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: numel mismatch " + shape_str(x.shape()) + " -> " +
                         shape_str(shape));
  }
  Tensor out = Tensor::uninitialized(std::move(shape));
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      double* dx = xc.grad().data();
      const long n = xc.numel();
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) dx[i] += dy[i];
    });
  }
  return out;
}

Tensor flatten(Tape& tape, const Tensor& x) {
  return reshape(tape, x, {x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
}

Tensor dense(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(0)) {
    throw DimensionError("dense: need x [N,D] and w [D,M] with matching D");
  }
  const int n = x.dim(0), d = x.dim(1), m = w.dim(1);
  if (b.defined() && b.numel() != m) throw DimensionError("dense: bias must be [M]");
  Tensor out = Tensor::uninitialized({n, m});
  kernels::dense_forward(x.data(), w.data(), b.defined() ? b.data() : nullptr, n, d, m,
                         out.data());
  if (want_grad(tape, {&x, &w, &b})) {
    out.set_requires_grad(true);
    Tensor xc = x, wc = w, bc = b, oc = out;
    tape.record([xc, wc, bc, oc, n, d, m]() mutable {
      if (!oc.has_grad()) return;
      const double* dout = oc.grad_view().data();
      kernels::dense_backward(xc.data(), wc.data(), dout, n, d, m,
                              xc.requires_grad() ? xc.grad().data() : nullptr,
                              wc.requires_grad() ? wc.grad().data() : nullptr,
                              (bc.defined() && bc.requires_grad()) ? bc.grad().data() : nullptr);
    });
  }
  return out;
}

Tensor resize_bilinear(Tape& tape, const Tensor& x, int ho, int wo) {
  if (x.ndim() != 4) throw DimensionError("resize_bilinear: input must be [N,H,W,C]");
  if (ho < 1 || wo < 1 || x.dim(1) < 1 || x.dim(2) < 1) {
    throw DimensionError("resize_bilinear: empty extent");
  }
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor out = Tensor::uninitialized({n, ho, wo, c});
  kernels::resize_bilinear_forward(x.data(), n, h, w, c, ho, wo, out.data());
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n, h, w, c, ho, wo]() mutable {
      if (!oc.has_grad()) return;
      kernels::resize_bilinear_backward(oc.grad_view().data(), n, h, w, c, ho, wo,
                                        xc.grad().data());
    });
  }
  return out;
}

Tensor avgpool2x2(Tape& tape, const Tensor& x) {
  if (x.ndim() != 4 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw DimensionError("avgpool2x2: input must be [N,H,W,C] with even H and W");
  }
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor out = Tensor::uninitialized({n, h / 2, w / 2, c});
  kernels::avgpool2x2_forward(x.data(), n, h, w, c, out.data());
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n, h, w, c]() mutable {
      if (!oc.has_grad()) return;
      kernels::avgpool2x2_backward(oc.grad_view().data(), n, h, w, c, xc.grad().data());
    });
  }
  return out;
}

Tensor global_avgpool(Tape& tape, const Tensor& x) {
  if (x.ndim() != 4) throw DimensionError("global_avgpool: input must be [N,H,W,C]");
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const long hw = static_cast<long>(h) * w;
  Tensor out = Tensor::zeros({n, c});
  {
    const double* xp = x.data();
    double* op = out.data();
#pragma omp parallel for schedule(static)
    for (int b = 0; b < n; ++b) {
      double* orow = op + static_cast<size_t>(b) * c;
      for (long p = 0; p < hw; ++p) {
        const double* xr = xp + (static_cast<size_t>(b) * hw + p) * c;
        for (int ch = 0; ch < c; ++ch) orow[ch] += xr[ch];
      }
      for (int ch = 0; ch < c; ++ch) orow[ch] /= static_cast<double>(hw);
    }
  }
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n, hw, c]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      double* dx = xc.grad().data();
      const double inv = 1.0 / static_cast<double>(hw);
#pragma omp parallel for schedule(static)
      for (int b = 0; b < n; ++b) {
        const double* dyr = dy + static_cast<size_t>(b) * c;
        for (long p = 0; p < hw; ++p) {
          double* dxr = dx + (static_cast<size_t>(b) * hw + p) * c;
          for (int ch = 0; ch < c; ++ch) dxr[ch] += dyr[ch] * inv;
        }
      }
    });
  }
  return out;
}

Tensor reduce_sum_lastdim(Tape& tape, const Tensor& x) {
  if (x.ndim() < 1) throw DimensionError("reduce_sum_lastdim: rank must be >= 1");
  const int l = x.dim(x.ndim() - 1);
  const long rows = x.numel() / l;
  std::vector<int> oshape(x.shape().begin(), x.shape().end() - 1);
  if (oshape.empty()) oshape = {1};
  Tensor out = Tensor::uninitialized(oshape);
  {
    const double* xp = x.data();
    double* op = out.data();
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
      const double* xr = xp + static_cast<size_t>(r) * l;
      double acc = 0.0;
      for (int i = 0; i < l; ++i) acc += xr[i];
      op[r] = acc;
    }
  }
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, rows, l]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      double* dx = xc.grad().data();
#pragma omp parallel for schedule(static)
      for (long r = 0; r < rows; ++r) {
        double* dxr = dx + static_cast<size_t>(r) * l;
        for (int i = 0; i < l; ++i) dxr[i] += dy[r];
      }
    });
  }
  return out;
}

Tensor reduce_mean_all(Tape& tape, const Tensor& x) {
  const long n = x.numel();
  double acc = 0.0;
  const double* xp = x.data();
  for (long i = 0; i < n; ++i) acc += xp[i];
  Tensor out = Tensor::from_data({1}, {acc / static_cast<double>(n)});
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n]() mutable {
      if (!oc.has_grad()) return;
      const double g = oc.grad_view()[0] / static_cast<double>(n);
      double* dx = xc.grad().data();
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) dx[i] += g;
    });
  }
  return out;
}

Tensor div_rows(Tape& tape, const Tensor& x, const Tensor& n) {
  if (x.ndim() < 1) throw DimensionError("div_rows: rank must be >= 1");
  const int l = x.dim(x.ndim() - 1);
  const long rows = x.numel() / l;
  if (n.numel() != rows) {
    throw DimensionError("div_rows: divisor count must equal the number of rows");
  }
  Tensor out = Tensor::uninitialized(x.shape());
  {
    const double* xp = x.data();
    const double* np = n.data();
    double* op = out.data();
#pragma omp parallel for schedule(static)
    for (long r = 0; r < rows; ++r) {
      const double inv = 1.0 / np[r];
      const double* xr = xp + static_cast<size_t>(r) * l;
      double* orow = op + static_cast<size_t>(r) * l;
      for (int i = 0; i < l; ++i) orow[i] = xr[i] * inv;
    }
  }
  if (want_grad(tape, {&x, &n})) {
    out.set_requires_grad(true);
    Tensor xc = x, nc = n, oc = out;
    tape.record([xc, nc, oc, rows, l]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      const double* np = nc.data();
      const double* yp = oc.data();
      if (xc.requires_grad()) {
        double* dx = xc.grad().data();
#pragma omp parallel for schedule(static)
        for (long r = 0; r < rows; ++r) {
          const double inv = 1.0 / np[r];
          const double* dyr = dy + static_cast<size_t>(r) * l;
          double* dxr = dx + static_cast<size_t>(r) * l;
          for (int i = 0; i < l; ++i) dxr[i] += dyr[i] * inv;
        }
      }
      if (nc.requires_grad()) {
        double* dn = nc.grad().data();
#pragma omp parallel for schedule(static)
        for (long r = 0; r < rows; ++r) {
          const double inv = 1.0 / np[r];
          const double* dyr = dy + static_cast<size_t>(r) * l;
          const double* yr = yp + static_cast<size_t>(r) * l;
          double acc = 0.0;
          for (int i = 0; i < l; ++i) acc += dyr[i] * yr[i];
          dn[r] -= acc * inv;
        }
      }
    });
  }
  return out;
}

Tensor bmm_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    throw DimensionError("bmm_nt: need [B,R,L] and [B,S,L] with matching B and L");
  }
  const int batch = a.dim(0), ra = a.dim(1), rb = b.dim(1), l = a.dim(2);
  Tensor out = Tensor::uninitialized({batch, ra, rb});
  kernels::bmm_nt(a.data(), b.data(), batch, ra, rb, l, out.data());
  if (want_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, batch, ra, rb, l]() mutable {
      if (!oc.has_grad()) return;
      const double* ds = oc.grad_view().data();
      if (ac.requires_grad()) {
        double* da = ac.grad().data();
        const double* bp = bc.data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int bt = 0; bt < batch; ++bt) {
          for (int i = 0; i < ra; ++i) {
            double* dar = da + (static_cast<size_t>(bt) * ra + i) * l;
            const double* dsr = ds + (static_cast<size_t>(bt) * ra + i) * rb;
            for (int j = 0; j < rb; ++j) {
              const double g = dsr[j];
              const double* br = bp + (static_cast<size_t>(bt) * rb + j) * l;
              for (int t = 0; t < l; ++t) dar[t] += g * br[t];
            }
          }
        }
      }
      if (bc.requires_grad()) {
        double* db = bc.grad().data();
        const double* ap = ac.data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int bt = 0; bt < batch; ++bt) {
          for (int j = 0; j < rb; ++j) {
            double* dbr = db + (static_cast<size_t>(bt) * rb + j) * l;
            for (int i = 0; i < ra; ++i) {
              const double g = ds[(static_cast<size_t>(bt) * ra + i) * rb + j];
              const double* ar = ap + (static_cast<size_t>(bt) * ra + i) * l;
              for (int t = 0; t < l; ++t) dbr[t] += g * ar[t];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor extract_patches(Tape& tape, const Tensor& x, int k) {
  if (x.ndim() != 4) throw DimensionError("extract_patches: input must be [N,H,W,C]");
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  if (k < 1) throw ConfigError("extract_patches: k must be >= 1");
  if (k > h || k > w) {
    throw ConfigError("extract_patches: k " + std::to_string(k) +
                      " exceeds spatial extents " + std::to_string(h) + "x" + std::to_string(w));
  }
  const int ph = (h + k - 1) / k;  // Ceil(H/k)
  const int pw = (w + k - 1) / k;
  const int l = ph * pw * c;
  Tensor out = Tensor::zeros({n, k * k, l});
  {
    const double* xp = x.data();
    double* op = out.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < n; ++b) {
      for (int p = 0; p < k * k; ++p) {
        const int gr = p / k, gc = p % k;
        double* dst = op + (static_cast<size_t>(b) * k * k + p) * l;
        for (int py = 0; py < ph; ++py) {
          const int y = gr * ph + py;
          for (int px = 0; px < pw; ++px) {
            const int xcol = gc * pw + px;
            double* cell = dst + (static_cast<size_t>(py) * pw + px) * c;
            if (y < h && xcol < w) {
              std::memcpy(cell, xp + ((static_cast<size_t>(b) * h + y) * w + xcol) * c,
                          sizeof(double) * c);
            }
            // out-of-range cells stay zero-padded
          }
        }
      }
    }
  }
  if (want_grad(tape, {&x})) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n, h, w, c, k, ph, pw, l]() mutable {
      if (!oc.has_grad()) return;
      const double* dy = oc.grad_view().data();
      double* dx = xc.grad().data();
#pragma omp parallel for collapse(2) schedule(static)
      for (int b = 0; b < n; ++b) {
        for (int y = 0; y < h; ++y) {
          const int gr = y / ph, py = y % ph;
          for (int xcol = 0; xcol < w; ++xcol) {
            const int gc = xcol / pw, px = xcol % pw;
            const double* src = dy + ((static_cast<size_t>(b) * k * k + gr * k + gc) * l) +
                                (static_cast<size_t>(py) * pw + px) * c;
            double* dst = dx + ((static_cast<size_t>(b) * h + y) * w + xcol) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
      }
    });
  }
  return out;
}

}  // namespace locrel::diff
