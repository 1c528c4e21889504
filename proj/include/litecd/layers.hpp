#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "litecd/rng.hpp"
#include "litecd/tensor.hpp"

namespace litecd {

/// Geometry of a (possibly strided/dilated) cross-correlation.
struct ConvConfig {
  std::size_t kh = 1, kw = 1;
  std::size_t sh = 1, sw = 1;
  std::size_t dh = 1, dw = 1;
  std::size_t ph = 0, pw = 0;

  static ConvConfig square(std::size_t k, std::size_t stride = 1, std::size_t pad = 0,
                           std::size_t dilation = 1) {
    return {k, k, stride, stride, dilation, dilation, pad, pad};
  }
};

/// Geometry of a transposed convolution. Output size per axis is
/// (in - 1) * stride - 2 * pad + kernel + output_pad.
struct TransposeConvConfig {
  std::size_t kh = 1, kw = 1;
  std::size_t sh = 1, sw = 1;
  std::size_t ph = 0, pw = 0;
  std::size_t oph = 0, opw = 0;

  static TransposeConvConfig square(std::size_t k, std::size_t stride, std::size_t pad,
                                    std::size_t output_pad) {
    return {k, k, stride, stride, pad, pad, output_pad, output_pad};
  }
  /// 3x3, stride 2, pad 1, output pad 1: exact 2x spatial upsampling.
  static TransposeConvConfig doubling() { return square(3, 2, 1, 1); }
};

/// floor((in + 2*pad - dilation*(k-1) - 1) / stride) + 1; throws when the result would be < 1.
std::size_t conv_output_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                             std::size_t dilation);

/// (in - 1) * stride - 2 * pad + k + output_pad; throws when not positive or output_pad >= stride.
std::size_t transpose_conv_output_size(std::size_t in, std::size_t k, std::size_t stride,
                                       std::size_t pad, std::size_t output_pad);

// Functional ops. Weights are (out, in, kh, kw) for conv2d and (in, out, kh, kw)
// for transpose_conv2d, matching the adjoint relationship; bias is (1, out, 1, 1).

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias,
                 const ConvConfig& cfg);

/// 3x3-class dilated convolution with size-preserving padding d*(k-1)/2.
template <typename T>
Tensor<T> dilated_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                         const std::optional<Tensor<T>>& bias, std::size_t rate);

template <typename T>
Tensor<T> transpose_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const std::optional<Tensor<T>>& bias, const TransposeConvConfig& cfg);

/// 2x2 window, stride 2. Ties resolve to the first element in row-major order.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x);

/// Appends zero channels up to out_channels.
template <typename T>
Tensor<T> channel_zero_pad(const Tensor<T>& x, std::size_t out_channels);

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t factor = 2);

/// y = x for x > 0, slope[c] * x otherwise. slope is (1, C, 1, 1).
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope);

struct BatchNormConfig {
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization. In training mode uses batch statistics and
/// updates the running buffers in place; in eval mode uses the buffers.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     const BatchNormConfig& cfg = {});

/// Inverted dropout. Identity when not training, when rate == 0, or without a generator.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng* rng);

/// Softmax across channels at every pixel. Not recorded on the tape.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x);

// Parameter-holding layers.

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;  // false for running statistics
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

/// Kaiming-uniform with bound sqrt(6 / fan_in).
template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, ConvConfig cfg, bool with_bias,
         Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;

  std::size_t in_channels() const { return weight_.shape().c; }
  std::size_t out_channels() const { return weight_.shape().n; }
  const ConvConfig& config() const { return cfg_; }
  Tensor<T>& weight() { return weight_; }
  std::optional<Tensor<T>>& bias() { return bias_; }

 private:
  ConvConfig cfg_;
  Tensor<T> weight_;
  std::optional<Tensor<T>> bias_;
};

template <typename T>
class TransposeConv2d {
 public:
  TransposeConv2d() = default;
  TransposeConv2d(std::size_t in_channels, std::size_t out_channels, TransposeConvConfig cfg,
                  bool with_bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;

  std::size_t in_channels() const { return weight_.shape().n; }
  std::size_t out_channels() const { return weight_.shape().c; }
  Tensor<T>& weight() { return weight_; }
  std::optional<Tensor<T>>& bias() { return bias_; }

 private:
  TransposeConvConfig cfg_;
  Tensor<T> weight_;
  std::optional<Tensor<T>> bias_;
};

/// k x 1 convolution followed by 1 x k, channel preserving and size preserving.
template <typename T>
class AsymmetricConv2d {
 public:
  AsymmetricConv2d() = default;
  AsymmetricConv2d(std::size_t channels, std::size_t k, bool with_bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;

  Conv2d<T>& vertical() { return vertical_; }
  Conv2d<T>& horizontal() { return horizontal_; }

 private:
  Conv2d<T> vertical_;
  Conv2d<T> horizontal_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels, BatchNormConfig cfg = {});

  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(ParamList<T>& out, const std::string& prefix) const;

  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

 private:
  BatchNormConfig cfg_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

template <typename T>
class PReLU {
 public:
  static constexpr double kInitialSlope = 0.25;

  PReLU() = default;
  explicit PReLU(std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x) const { return prelu(x, slope_); }
  void collect(ParamList<T>& out, const std::string& prefix) const;

  Tensor<T>& slope() { return slope_; }

 private:
  Tensor<T> slope_;
};

}  // namespace litecd
