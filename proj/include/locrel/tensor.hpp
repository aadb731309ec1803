#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "locrel/error.hpp"

namespace locrel::diff {

namespace detail {

// Recycled buffer storage. Training allocates and frees the same activation
// shapes every step; reusing buffers avoids both allocator churn and, for
// fully-overwritten outputs, the redundant zero-fill pass.
std::vector<double> pool_acquire(size_t n);        // size n, contents unspecified
void pool_release(std::vector<double>&& v) noexcept;

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;

  TensorImpl() = default;
  TensorImpl(const TensorImpl&) = delete;
  ~TensorImpl() {
    pool_release(std::move(value));
    pool_release(std::move(grad));
  }
};

}  // namespace detail

/// Shared-ownership dense tensor of doubles. Shape is a plain extent list;
/// gradient storage is lazily allocated and always matches the shape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  /// Unspecified contents; for op outputs that overwrite every element.
  static Tensor uninitialized(std::vector<int> shape);

  bool defined() const { return static_cast<bool>(impl_); }
  const std::vector<int>& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[i]; }
  long numel() const { return static_cast<long>(impl_->value.size()); }

  std::vector<double>& values() { return impl_->value; }
  const std::vector<double>& values() const { return impl_->value; }
  double* data() { return impl_->value.data(); }
  const double* data() const { return impl_->value.data(); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  /// Allocates zeroed gradient storage if not present.
  void ensure_grad() {
    if (impl_->grad.empty()) {
      impl_->grad = detail::pool_acquire(impl_->value.size());
      std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::vector<double>& grad() {
    ensure_grad();
    return impl_->grad;
  }
  const std::vector<double>& grad_view() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }

  double scalar() const {
    if (numel() != 1) throw UsageError("scalar() on tensor with numel != 1");
    return impl_->value[0];
  }

  bool same_impl(const Tensor& o) const { return impl_ == o.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Records executed operations in order; backward replays them in exact
/// reverse, accumulating (summing) gradients across all consumers of a
/// tensor. A tape is single-threaded; independent tapes are independent.
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }

  void record(std::function<void()> backfn) {
    if (enabled_) nodes_.push_back(std::move(backfn));
  }

  /// Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse, then clears it.
  /// Throws UsageError if loss is not scalar.
  void backward(Tensor loss) {
    if (loss.numel() != 1) throw UsageError("backward requires a scalar loss");
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    clear();
  }

  void clear() { nodes_.clear(); }
  size_t node_count() const { return nodes_.size(); }

 private:
  bool enabled_;
  std::vector<std::function<void()>> nodes_;
};

inline long shape_numel(const std::vector<int>& shape) {
  long n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace locrel::diff
