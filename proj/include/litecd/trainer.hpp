#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "litecd/di.hpp"
#include "litecd/model.hpp"

namespace litecd {

inline constexpr double kProbabilityClamp = 1e-7;

/// Two-way softmax over the channel pair, then cross-entropy against binary
/// labels, averaged over every pixel of the batch. Probabilities are clamped
/// to [1e-7, 1 - 1e-7] in the loss value; the gradient is the unclamped
/// softmax cross-entropy gradient (p - y) / N.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& scores, const Tensor<T>& labels);

/// Fraction of pixels whose argmax class equals the label.
template <typename T>
double pixel_accuracy(const Tensor<T>& scores, const Tensor<T>& labels);

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed, ordered parameter list.
template <typename T>
class Adam {
 public:
  Adam(ParamList<T> params, AdamConfig cfg = {});

  /// Applies one update. Throws ContractViolation naming the first parameter
  /// without a gradient.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  ParamList<T> params_;
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 15;
  std::uint64_t seed = 0;
  double lr = 0.005;
  bool shuffle = true;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over pixels of the epoch
  double accuracy = 0.0;  // pixel accuracy of the training-mode predictions
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
};

/// Writes `epoch,loss,accuracy` with 6 decimals, header first.
void write_trace_csv(std::ostream& os, const TrainTrace& trace);

/// Stacks patches [first, first+count) of `order` into (count,1,32,32) inputs and labels.
std::pair<Tensor<float>, Tensor<float>> make_batch(const PatchSet& set, const std::vector<std::size_t>& order,
                                                   std::size_t first, std::size_t count);

using EpochCallback = std::function<void(const EpochStats&)>;

/// Shuffled mini-batch training. `rng` drives shuffling and dropout; pass the
/// generator that initialized the network for a single-seed run. Throws
/// NumericDivergence when the loss turns non-finite.
TrainTrace train(LiteCnn<float>& net, const PatchSet& set, const TrainConfig& cfg, Rng& rng,
                 const EpochCallback& on_epoch = {});

}  // namespace litecd
