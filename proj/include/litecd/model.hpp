#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "litecd/layers.hpp"

namespace litecd {

enum class BottleneckKind { Normal, Downsample, Dilated, Asymmetric, Upsample };

std::string to_string(BottleneckKind kind);

struct BottleneckSpec {
  std::string name;  // e.g. "BottleNeck 2.3"
  BottleneckKind kind = BottleneckKind::Normal;
  std::size_t dilation = 1;  // only for Dilated
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t internal_channels = 16;
  double dropout_rate = 0.0;
  bool decoder = false;
};

struct GroupSpec {
  std::string name;
  bool decoder = false;
  std::vector<BottleneckSpec> bottlenecks;
};

/// Declarative description of the whole network. Structural fields feed the
/// checkpoint fingerprint; dropout rates do not (they do not change weights).
struct NetworkSpec {
  std::size_t input_size = 32;
  std::size_t input_channels = 1;
  std::size_t initial_conv_channels = 13;
  std::vector<GroupSpec> groups;
  std::size_t classes = 2;
  std::size_t asymmetric_kernel = 5;
  bool use_batch_norm = true;
  bool use_prelu = true;

  /// Throws ContractViolation when the channel/spatial plan is inconsistent.
  void validate() const;
  std::string canonical() const;
  std::uint64_t fingerprint() const;
};

/// Initial block, Groups 1-5 ([5, 9, 8, 3, 2] bottlenecks), transposed 2x2 classifier.
NetworkSpec build_default(double dropout_rate = 0.1);

enum class Mode { Train, Eval };

/// Ordered log of named activation shapes captured during a forward pass.
struct ShapeTrace {
  std::vector<std::pair<std::string, Shape>> entries;

  void record(const std::string& name, const Shape& shape) { entries.emplace_back(name, shape); }
  std::optional<Shape> find(const std::string& name) const;
};

template <typename T>
class EncoderBottleneck {
 public:
  EncoderBottleneck(const BottleneckSpec& spec, const NetworkSpec& net, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng* rng, ShapeTrace* trace);
  void collect(ParamList<T>& out, const std::string& prefix) const;
  const BottleneckSpec& spec() const { return spec_; }

  Conv2d<T>& projection() { return proj_; }
  Conv2d<T>& expansion() { return expand_; }

 private:
  Tensor<T> norm_act(const Tensor<T>& x, std::optional<BatchNorm2d<T>>& bn,
                     const std::optional<PReLU<T>>& act, bool training);

  BottleneckSpec spec_;
  Conv2d<T> proj_;
  std::optional<BatchNorm2d<T>> bn1_, bn2_, bn3_;
  std::optional<PReLU<T>> act1_, act2_, act_out_;
  std::variant<Conv2d<T>, AsymmetricConv2d<T>> main_;
  Conv2d<T> expand_;
};

template <typename T>
class DecoderBottleneck {
 public:
  DecoderBottleneck(const BottleneckSpec& spec, const NetworkSpec& net, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode, ShapeTrace* trace);
  void collect(ParamList<T>& out, const std::string& prefix) const;
  const BottleneckSpec& spec() const { return spec_; }

 private:
  BottleneckSpec spec_;
  Conv2d<T> proj_;
  std::optional<BatchNorm2d<T>> bn1_, bn2_, bn3_, bn_skip_;
  std::optional<PReLU<T>> act1_, act2_, act_out_;
  std::variant<Conv2d<T>, TransposeConv2d<T>> main_;
  Conv2d<T> expand_;
  std::optional<Conv2d<T>> skip_;
};

/// The assembled change-detection network: (b,1,32,32) difference-image
/// patches in, (b,2,32,32) per-pixel class scores out.
template <typename T>
class LiteCnn {
 public:
  LiteCnn(NetworkSpec spec, Rng& rng);

  /// dropout_rng may be null (no dropout). Every named stage is checked
  /// against the shape implied by the spec; mismatches throw.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng* dropout_rng = nullptr,
                    ShapeTrace* trace = nullptr);

  /// Trainable parameters followed by running statistics, in a fixed order.
  ParamList<T> parameters() const;
  ParamList<T> trainable_parameters() const;
  std::size_t count_parameters() const;

  const NetworkSpec& spec() const { return spec_; }
  std::vector<EncoderBottleneck<T>>& encoders() { return encoders_; }
  std::vector<DecoderBottleneck<T>>& decoders() { return decoders_; }

 private:
  NetworkSpec spec_;
  Conv2d<T> initial_conv_;
  std::optional<BatchNorm2d<T>> initial_bn_;
  std::optional<PReLU<T>> initial_act_;
  std::vector<EncoderBottleneck<T>> encoders_;
  std::vector<DecoderBottleneck<T>> decoders_;
  TransposeConv2d<T> classifier_;
};

// Analytic cost accounting, per sample.

struct LayerCost {
  std::string group;
  std::string layer;
  std::size_t params = 0;
  std::size_t macs = 0;
};

struct CostSummary {
  std::string name;
  std::size_t params = 0;
  std::size_t macs = 0;
};

struct Profile {
  std::vector<LayerCost> layers;
  std::vector<CostSummary> groups;  // in network order, including Initial and Output
  std::size_t total_params = 0;
  std::size_t total_macs = 0;
};

/// Costs of the network described by spec. MACs: out_elems*kh*kw*in_channels
/// for convolutions, in_elems*kh*kw*out_channels for transposed convolutions;
/// normalization, activation and pooling are not counted as MACs.
Profile profile_lite(const NetworkSpec& spec);

/// Baseline with identical depth where every bottleneck is a single full 3x3
/// convolution (strided for downsampling, transposed for upsampling) at the
/// group width, followed by the same normalization and activation.
Profile profile_plain(const NetworkSpec& spec);

std::size_t count_macs(const NetworkSpec& spec);

}  // namespace litecd
