#include "litecd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace litecd {

namespace {

template <typename T>
void check_loss_shapes(const Tensor<T>& scores, const Tensor<T>& labels) {
  const Shape s = scores.shape(), l = labels.shape();
  if (s.c != 2) contract_fail("loss: scores must have 2 channels, got " + s.str());
  if (l.c != 1 || l.n != s.n || l.h != s.h || l.w != s.w)
    contract_fail("loss: labels " + l.str() + " do not match scores " + s.str());
}

}  // namespace

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& scores, const Tensor<T>& labels) {
  check_loss_shapes(scores, labels);
  const Shape s = scores.shape();
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n * plane);
  const auto sc = scores.data();
  const auto lb = labels.data();
  for (T v : lb)
    if (v != T(0) && v != T(1)) contract_fail("loss: labels must be 0 or 1");

  const double lo = std::log(kProbabilityClamp);
  const double hi = std::log1p(-kProbabilityClamp);
  auto prob1 = std::make_shared<std::vector<double>>(s.n * plane);
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const double s0 = sc[(2 * n) * plane + i];
      const double s1 = sc[(2 * n + 1) * plane + i];
      const double mx = std::max(s0, s1);
      const double lse = mx + std::log(std::exp(s0 - mx) + std::exp(s1 - mx));
      const bool changed = lb[n * plane + i] != T(0);
      const double logp = std::clamp((changed ? s1 : s0) - lse, lo, hi);
      total -= logp;
      (*prob1)[n * plane + i] = std::exp(s1 - lse);
    }

  auto ps = scores.impl();
  auto pl = labels.impl();
  return detail::record<T>(Shape{}, {static_cast<T>(total / count)}, "bce_loss", {scores, labels},
                           [ps, pl, prob1, s, plane, count](std::span<const T> g) {
                             if (!ps->requires_grad) return;
                             std::vector<T> ds(s.numel());
                             const double scale = static_cast<double>(g[0]) / count;
                             for (std::size_t n = 0; n < s.n; ++n)
                               for (std::size_t i = 0; i < plane; ++i) {
                                 const double p1 = (*prob1)[n * plane + i];
                                 const double y = pl->data[n * plane + i] != T(0) ? 1.0 : 0.0;
                                 ds[(2 * n) * plane + i] = static_cast<T>(scale * ((1.0 - p1) - (1.0 - y)));
                                 ds[(2 * n + 1) * plane + i] = static_cast<T>(scale * (p1 - y));
                               }
                             detail::accumulate<T>(ps, ds);
                           });
}

template <typename T>
double pixel_accuracy(const Tensor<T>& scores, const Tensor<T>& labels) {
  check_loss_shapes(scores, labels);
  const Shape s = scores.shape();
  const std::size_t plane = s.plane();
  const auto sc = scores.data();
  const auto lb = labels.data();
  std::size_t correct = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < plane; ++i) {
      const bool predicted = sc[(2 * n + 1) * plane + i] > sc[(2 * n) * plane + i];
      const bool truth = lb[n * plane + i] != T(0);
      correct += predicted == truth ? 1 : 0;
    }
  return static_cast<double>(correct) / static_cast<double>(s.n * plane);
}

template <typename T>
Adam<T>::Adam(ParamList<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  require(cfg_.lr > 0.0, "adam: learning rate must be positive");
  for (const auto& p : params_) {
    require(p.trainable, "adam: " + p.name + " is not trainable");
    m_.emplace_back(p.tensor.numel(), T(0));
    v_.emplace_back(p.tensor.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& p : params_)
    if (!p.tensor.has_grad()) contract_fail("adam: parameter " + p.name + " has no gradient");
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<T> tensor = params_[k].tensor;
    auto w = tensor.data();
    const auto g = tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = cfg_.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
      w[i] = static_cast<T>(w[i] - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class Adam<float>;
template class Adam<double>;
template Tensor<float> bce_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> bce_loss<double>(const Tensor<double>&, const Tensor<double>&);
template double pixel_accuracy<float>(const Tensor<float>&, const Tensor<float>&);
template double pixel_accuracy<double>(const Tensor<double>&, const Tensor<double>&);

void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
  os << "epoch,loss,accuracy\n";
  char buf[96];
  for (const auto& e : trace.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", e.epoch, e.loss, e.accuracy);
    os << buf;
  }
}

std::pair<Tensor<float>, Tensor<float>> make_batch(const PatchSet& set, const std::vector<std::size_t>& order,
                                                   std::size_t first, std::size_t count) {
  constexpr std::size_t P = kPatchSize * kPatchSize;
  Tensor<float> x(Shape{count, 1, kPatchSize, kPatchSize});
  Tensor<float> y(Shape{count, 1, kPatchSize, kPatchSize});
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t b = 0; b < count; ++b) {
    const Patch& p = set.patches[order[first + b]];
    std::copy(p.di.begin(), p.di.end(), xd.begin() + b * P);
    for (std::size_t i = 0; i < P; ++i) yd[b * P + i] = p.labels[i] ? 1.0f : 0.0f;
  }
  return {x, y};
}

TrainTrace train(LiteCnn<float>& net, const PatchSet& set, const TrainConfig& cfg, Rng& rng,
                 const EpochCallback& on_epoch) {
  require(!set.patches.empty(), "train: patch set is empty");
  require(cfg.batch_size >= 1, "train: batch size must be >= 1");
  require(cfg.epochs >= 1, "train: epochs must be >= 1");

  Adam<float> opt(net.trainable_parameters(), AdamConfig{cfg.lr});
  std::vector<std::size_t> order(set.patches.size());
  std::iota(order.begin(), order.end(), 0);
  TrainTrace trace;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle)
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double loss_sum = 0.0;
    double correct = 0.0;
    double pixels = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      auto [x, y] = make_batch(set, order, first, count);
      opt.zero_grad();
      Tensor<float> scores = net.forward(x, Mode::Train, &rng);
      Tensor<float> loss = bce_loss(scores, y);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw NumericDivergence("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      backward(loss);
      opt.step();
      const double px = static_cast<double>(count * kPatchSize * kPatchSize);
      loss_sum += value * px;
      correct += pixel_accuracy(scores, y) * px;
      pixels += px;
    }
    EpochStats stats{epoch, loss_sum / pixels, correct / pixels};
    trace.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return trace;
}

}  // namespace litecd
