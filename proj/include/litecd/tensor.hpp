#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "litecd/errors.hpp"

namespace litecd {

/// Rank-4 extent in (batch, channels, height, width) order. Every dimension is >= 1.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

// One recorded operation. Holds its parents; the backward rule receives the
// gradient flowing into the op's output and accumulates into the parents.
template <typename T>
struct TapeNode {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(std::span<const T> grad_out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<TapeNode<T>> grad_fn;

  std::span<T> grad_buffer();
};

}  // namespace detail

/// Shared handle to a rank-4 array with optional gradient tracking. Copies
/// alias the same storage; use clone() for a detached deep copy.
template <typename T>
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, value); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  /// Value of a (1,1,1,1) tensor.
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> grad_mut() { return impl_->grad_buffer(); }
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  /// True when the tensor was produced by a recorded operation.
  bool has_grad_fn() const { return impl_->grad_fn != nullptr; }

  Tensor clone() const;

  // Autograd plumbing.
  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl<T>> impl);

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

/// Disables tape recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

// Builds an op result and, when any parent tracks gradients, attaches a tape node.
template <typename T>
Tensor<T> record(Shape shape, std::vector<T> values, std::string op,
                 std::vector<Tensor<T>> inputs,
                 std::function<void(std::span<const T>)> backward);

// Adds g into the parent's gradient if it tracks one.
template <typename T>
void accumulate(const std::shared_ptr<TensorImpl<T>>& parent, std::span<const T> g);

}  // namespace detail

// Elementwise and structural ops.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

/// Sum of all elements as a (1,1,1,1) tensor. Accumulates in double.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);

/// Stacks channels a-then-b.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate (+=);
/// intermediate gradients are rebuilt on each call.
template <typename T>
void backward(const Tensor<T>& loss);

}  // namespace litecd
