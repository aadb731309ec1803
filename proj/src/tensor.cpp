#include "locrel/tensor.hpp"

#include <malloc.h>

namespace locrel::diff {

namespace {

// Large activations and gradients are allocated and freed every step. With
// glibc defaults those blocks are mmapped and unmapped each time, which
// page-faults megabytes per tensor. Keeping big blocks on the heap lets the
// allocator reuse them.
[[maybe_unused]] const bool malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();

struct BufferPool {
  std::vector<std::vector<double>> items;
  size_t bytes = 0;
  static constexpr size_t kMaxBytes = size_t(1) << 30;
  static constexpr size_t kMaxItems = 256;
  static constexpr size_t kMinPooledSize = 1024;
};

BufferPool& buffer_pool() {
  static thread_local BufferPool pool;
  return pool;
}

}  // namespace

namespace detail {

std::vector<double> pool_acquire(size_t n) {
  if (n >= BufferPool::kMinPooledSize) {
    BufferPool& pool = buffer_pool();
    for (size_t i = pool.items.size(); i-- > 0;) {
      if (pool.items[i].size() == n) {
        std::vector<double> v = std::move(pool.items[i]);
        pool.items.erase(pool.items.begin() + static_cast<long>(i));
        pool.bytes -= n * sizeof(double);
        return v;
      }
    }
  }
  return std::vector<double>(n);
}

void pool_release(std::vector<double>&& v) noexcept {
  if (v.size() < BufferPool::kMinPooledSize) return;
  BufferPool& pool = buffer_pool();
  const size_t bytes = v.size() * sizeof(double);
  if (pool.items.size() >= BufferPool::kMaxItems || pool.bytes + bytes > BufferPool::kMaxBytes) {
    return;
  }
  pool.bytes += bytes;
  pool.items.push_back(std::move(v));
}

}  // namespace detail

Tensor Tensor::uninitialized(std::vector<int> shape) {
  Tensor t;
  t.impl_ = std::make_shared<detail::TensorImpl>();
  const long n = shape_numel(shape);
  if (n < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
  t.impl_->shape = std::move(shape);
  t.impl_->value = detail::pool_acquire(static_cast<size_t>(n));
  return t;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t = uninitialized(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), 0.0);
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.values().begin(), t.values().end(), v);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  const long n = shape_numel(shape);
  if (static_cast<size_t>(n) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<detail::TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->value = std::move(data);
  t.impl_->requires_grad = requires_grad;
  return t;
}

}  // namespace locrel::diff
