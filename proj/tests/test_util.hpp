#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "litecd/rng.hpp"
#include "litecd/tensor.hpp"

namespace litecd::testing {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// sum(y * r) for a fixed random r, so every output element gets a distinct weight.
inline Tensor<double> weighted_sum(const Tensor<double>& y, Rng& rng) {
  return sum(mul(y, random_tensor<double>(y.shape(), rng)));
}

struct GradCheck {
  double max_rel_error = 0.0;  // over all inputs, norm-based
};

/// Central finite differences against reverse mode for every element of every
/// input. `f` must rebuild the graph from the inputs on each call and return a
/// scalar tensor.
inline GradCheck check_gradients(std::vector<Tensor<double>> inputs,
                                 const std::function<Tensor<double>(std::vector<Tensor<double>>&)>& f,
                                 double h = 1e-5) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(f(inputs));
  GradCheck res;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(analytic.size());
    NoGradGuard guard;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double up = f(inputs).item();
      t.data()[i] = saved - h;
      const double down = f(inputs).item();
      t.data()[i] = saved;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max(std::sqrt(na), std::sqrt(nn));
    const double rel = denom > 0.0 ? std::sqrt(diff) / denom : std::sqrt(diff);
    res.max_rel_error = std::max(res.max_rel_error, rel);
  }
  return res;
}

}  // namespace litecd::testing
