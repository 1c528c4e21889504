#include "litecd/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace litecd {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

namespace {
thread_local bool t_grad_enabled = true;

void check_shape(const Shape& s) {
  if (s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0)
    contract_fail("tensor dimensions must be >= 1, got " + s.str());
}
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace detail {

template <typename T>
std::span<T> TensorImpl<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

template <typename T>
void accumulate(const std::shared_ptr<TensorImpl<T>>& parent, std::span<const T> g) {
  if (!parent->requires_grad) return;
  auto dst = parent->grad_buffer();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

template <typename T>
Tensor<T> record(Shape shape, std::vector<T> values, std::string op,
                 std::vector<Tensor<T>> inputs,
                 std::function<void(std::span<const T>)> backward_fn) {
  Tensor<T> out(shape, std::move(values));
  if (!grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<T>& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<TapeNode<T>>();
  node->op = std::move(op);
  for (auto& t : inputs) node->inputs.push_back(t.impl());
  node->backward = std::move(backward_fn);
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(node);
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T>::Tensor() : Tensor(Shape{}) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  check_shape(shape);
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  check_shape(shape);
  if (values.size() != shape.numel())
    contract_fail("tensor of shape " + shape.str() + " needs " + std::to_string(shape.numel()) +
                  " values, got " + std::to_string(values.size()));
  impl_->shape = shape;
  impl_->data = std::move(values);
}

template <typename T>
T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  const Shape& s = impl_->shape;
  return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
}

template <typename T>
T Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const Shape& s = impl_->shape;
  return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) contract_fail("item() needs a (1,1,1,1) tensor, got " + shape().str());
  return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (impl_->grad_fn) contract_fail("requires_grad can only be toggled on leaf tensors");
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor copy(impl_->shape, impl_->data);
  copy.impl_->requires_grad = impl_->requires_grad && !impl_->grad_fn;
  return copy;
}

template <typename T>
Tensor<T> Tensor<T>::wrap(std::shared_ptr<detail::TensorImpl<T>> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    contract_fail("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  std::vector<T> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  auto pa = a.impl();
  auto pb = b.impl();
  return detail::record<T>(a.shape(), std::move(out), "add", {a, b},
                           [pa, pb](std::span<const T> g) {
                             detail::accumulate(pa, g);
                             detail::accumulate(pb, g);
                           });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    contract_fail("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  std::vector<T> out(a.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  auto pa = a.impl();
  auto pb = b.impl();
  return detail::record<T>(a.shape(), std::move(out), "mul", {a, b},
                           [pa, pb](std::span<const T> g) {
                             std::vector<T> ga(g.size());
                             std::vector<T> gb(g.size());
                             for (std::size_t i = 0; i < g.size(); ++i) {
                               ga[i] = g[i] * pb->data[i];
                               gb[i] = g[i] * pa->data[i];
                             }
                             detail::accumulate<T>(pa, ga);
                             detail::accumulate<T>(pb, gb);
                           });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  auto pa = a.impl();
  return detail::record<T>(a.shape(), std::move(out), "scale", {a},
                           [pa, factor](std::span<const T> g) {
                             std::vector<T> ga(g.size());
                             for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * factor;
                             detail::accumulate<T>(pa, ga);
                           });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  auto pa = a.impl();
  return detail::record<T>(Shape{}, {static_cast<T>(acc)}, "sum", {a},
                           [pa](std::span<const T> g) {
                             std::vector<T> ga(pa->data.size(), g[0]);
                             detail::accumulate<T>(pa, ga);
                           });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    contract_fail("concat_channels: batch/spatial mismatch " + sa.str() + " vs " + sb.str());
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::size_t block_a = sa.c * sa.plane();
  const std::size_t block_b = sb.c * sb.plane();
  std::vector<T> out(so.numel());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(x.begin() + n * block_a, block_a, out.begin() + n * (block_a + block_b));
    std::copy_n(y.begin() + n * block_b, block_b, out.begin() + n * (block_a + block_b) + block_a);
  }
  auto pa = a.impl();
  auto pb = b.impl();
  return detail::record<T>(so, std::move(out), "concat_channels", {a, b},
                           [pa, pb, block_a, block_b, batch = sa.n](std::span<const T> g) {
                             std::vector<T> ga(batch * block_a);
                             std::vector<T> gb(batch * block_b);
                             for (std::size_t n = 0; n < batch; ++n) {
                               auto src = g.begin() + n * (block_a + block_b);
                               std::copy_n(src, block_a, ga.begin() + n * block_a);
                               std::copy_n(src + block_a, block_b, gb.begin() + n * block_b);
                             }
                             detail::accumulate<T>(pa, ga);
                             detail::accumulate<T>(pb, gb);
                           });
}

template <typename T>
void backward(const Tensor<T>& loss) {
  using Impl = detail::TensorImpl<T>;
  if (loss.numel() != 1 || !(loss.shape() == Shape{}))
    contract_fail("backward: loss must be (1,1,1,1), got " + loss.shape().str());
  if (!loss.has_grad_fn()) contract_fail("backward: loss was not produced by a recorded operation");

  // Iterative post-order DFS; `order` ends up with parents before children.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->grad_fn && next < node->grad_fn->inputs.size()) {
      Impl* parent = node->grad_fn->inputs[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (Impl* node : order)
    if (node->grad_fn) node->grad.assign(node->data.size(), T(0));
  loss.impl()->grad[0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->grad_fn) node->grad_fn->backward(std::span<const T>(node->grad));
  }
}

#define LITECD_INSTANTIATE(T)                                                   \
  template class Tensor<T>;                                                     \
  template struct detail::TensorImpl<T>;                                        \
  template Tensor<T> detail::record<T>(Shape, std::vector<T>, std::string,      \
                                       std::vector<Tensor<T>>,                  \
                                       std::function<void(std::span<const T>)>); \
  template void detail::accumulate<T>(const std::shared_ptr<detail::TensorImpl<T>>&, \
                                      std::span<const T>);                      \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                             \
  template Tensor<T> sum<T>(const Tensor<T>&);                                  \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);    \
  template void backward<T>(const Tensor<T>&);

LITECD_INSTANTIATE(float)
LITECD_INSTANTIATE(double)

#undef LITECD_INSTANTIATE

}  // namespace litecd
