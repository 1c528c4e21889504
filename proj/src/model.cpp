#include "litecd/model.hpp"

#include <algorithm>
#include <sstream>

namespace litecd {

std::string to_string(BottleneckKind kind) {
  switch (kind) {
    case BottleneckKind::Normal: return "normal";
    case BottleneckKind::Downsample: return "downsample";
    case BottleneckKind::Dilated: return "dilated";
    case BottleneckKind::Asymmetric: return "asymmetric";
    case BottleneckKind::Upsample: return "upsample";
  }
  return "unknown";
}

std::optional<Shape> ShapeTrace::find(const std::string& name) const {
  for (const auto& [n, s] : entries)
    if (n == name) return s;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// NetworkSpec

namespace {

BottleneckSpec make(const std::string& name, BottleneckKind kind, std::size_t in, std::size_t out,
                    double dropout, bool decoder, std::size_t dilation = 1) {
  BottleneckSpec b;
  b.name = name;
  b.kind = kind;
  b.dilation = dilation;
  b.in_channels = in;
  b.out_channels = out;
  b.internal_channels = 16;
  b.dropout_rate = decoder ? 0.0 : dropout;
  b.decoder = decoder;
  return b;
}

// Context pattern shared by Groups 2 and 3.
struct PatternSlot {
  BottleneckKind kind;
  std::size_t dilation;
};
constexpr PatternSlot kContextPattern[] = {
    {BottleneckKind::Normal, 1},     {BottleneckKind::Dilated, 2}, {BottleneckKind::Asymmetric, 1},
    {BottleneckKind::Dilated, 4},    {BottleneckKind::Normal, 1},  {BottleneckKind::Dilated, 8},
    {BottleneckKind::Asymmetric, 1}, {BottleneckKind::Dilated, 16},
};

std::string bottleneck_name(int group, int index) {
  return "BottleNeck " + std::to_string(group) + "." + std::to_string(index);
}

}  // namespace

NetworkSpec build_default(double dropout_rate) {
  NetworkSpec net;
  using K = BottleneckKind;

  GroupSpec g1{"Group 1", false, {}};
  g1.bottlenecks.push_back(make(bottleneck_name(1, 0), K::Downsample, 14, 64, dropout_rate, false));
  for (int i = 1; i <= 4; ++i)
    g1.bottlenecks.push_back(make(bottleneck_name(1, i), K::Normal, 64, 64, dropout_rate, false));

  GroupSpec g2{"Group 2", false, {}};
  g2.bottlenecks.push_back(make(bottleneck_name(2, 0), K::Downsample, 64, 128, dropout_rate, false));
  int idx = 1;
  for (const auto& slot : kContextPattern)
    g2.bottlenecks.push_back(
        make(bottleneck_name(2, idx++), slot.kind, 128, 128, dropout_rate, false, slot.dilation));

  GroupSpec g3{"Group 3", false, {}};
  idx = 0;
  for (const auto& slot : kContextPattern)
    g3.bottlenecks.push_back(
        make(bottleneck_name(3, idx++), slot.kind, 128, 128, dropout_rate, false, slot.dilation));

  GroupSpec g4{"Group 4", true, {}};
  g4.bottlenecks.push_back(make(bottleneck_name(4, 0), K::Upsample, 128, 64, 0.0, true));
  for (int i = 1; i <= 2; ++i)
    g4.bottlenecks.push_back(make(bottleneck_name(4, i), K::Normal, 64, 64, 0.0, true));

  GroupSpec g5{"Group 5", true, {}};
  g5.bottlenecks.push_back(make(bottleneck_name(5, 0), K::Upsample, 64, 16, 0.0, true));
  g5.bottlenecks.push_back(make(bottleneck_name(5, 1), K::Normal, 16, 16, 0.0, true));

  net.groups = {g1, g2, g3, g4, g5};
  net.validate();
  return net;
}

void NetworkSpec::validate() const {
  require(input_size >= 4 && input_size % 4 == 0, "network: input size must be a positive multiple of 4");
  require(asymmetric_kernel % 2 == 1, "network: asymmetric kernel length must be odd");
  std::size_t channels = initial_conv_channels + input_channels;
  std::size_t size = input_size / 2;
  for (const auto& g : groups) {
    for (const auto& b : g.bottlenecks) {
      require(b.in_channels == channels,
              b.name + ": expects " + std::to_string(b.in_channels) + " input channels, plan has " +
                  std::to_string(channels));
      // BottleNeck 1.0 widens 14 -> 16 in Conv1, so only the wider side bounds it.
      require(b.internal_channels >= 1 && b.internal_channels <= std::max(b.in_channels, b.out_channels),
              b.name + ": internal width must not exceed the wider of input and output");
      require(b.decoder == g.decoder, b.name + ": encoder/decoder flag disagrees with its group");
      switch (b.kind) {
        case BottleneckKind::Downsample:
          require(!b.decoder && size % 2 == 0, b.name + ": downsampling needs an even encoder map");
          require(b.out_channels >= b.in_channels, b.name + ": encoder cannot reduce channels");
          size /= 2;
          break;
        case BottleneckKind::Upsample:
          require(b.decoder, b.name + ": upsampling bottlenecks belong to the decoder");
          size *= 2;
          break;
        case BottleneckKind::Dilated:
          require(b.dilation >= 1, b.name + ": dilation must be >= 1");
          [[fallthrough]];
        default:
          require(b.decoder ? b.out_channels == b.in_channels : b.out_channels >= b.in_channels,
                  b.name + ": size-preserving bottleneck has an invalid channel plan");
          require(!(b.decoder && b.kind != BottleneckKind::Normal),
                  b.name + ": decoder bottlenecks are normal or upsampling");
      }
      channels = b.out_channels;
    }
  }
  require(size * 2 == input_size, "network: decoder does not restore half the input resolution");
}

std::string NetworkSpec::canonical() const {
  std::ostringstream os;
  os << "litecd-net;input=" << input_size << 'x' << input_size << 'x' << input_channels
     << ";init=" << initial_conv_channels << ";classes=" << classes << ";asym=" << asymmetric_kernel
     << ";bn=" << use_batch_norm << ";prelu=" << use_prelu << ';';
  for (const auto& g : groups) {
    os << '[' << g.name << (g.decoder ? ":dec" : ":enc") << ']';
    for (const auto& b : g.bottlenecks)
      os << b.name << '|' << to_string(b.kind) << '|' << b.dilation << '|' << b.in_channels << '|'
         << b.out_channels << '|' << b.internal_channels << ';';
  }
  return os.str();
}

std::uint64_t NetworkSpec::fingerprint() const {
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Bottlenecks

namespace {

template <typename T>
Tensor<T> apply_norm_act(const Tensor<T>& x, std::optional<BatchNorm2d<T>>& bn,
                         const std::optional<PReLU<T>>& act, bool training) {
  Tensor<T> y = bn ? bn->forward(x, training) : x;
  return act ? act->forward(y) : y;
}

void trace_row(ShapeTrace* trace, const std::string& prefix, const char* row, const Shape& s) {
  if (trace) trace->record(prefix + "/" + row, s);
}

}  // namespace

template <typename T>
EncoderBottleneck<T>::EncoderBottleneck(const BottleneckSpec& spec, const NetworkSpec& net, Rng& rng)
    : spec_(spec) {
  const std::size_t in = spec.in_channels, mid = spec.internal_channels, out = spec.out_channels;
  const bool bias = !net.use_batch_norm;
  const bool down = spec.kind == BottleneckKind::Downsample;
  proj_ = Conv2d<T>(in, mid, down ? ConvConfig::square(2, 2, 0) : ConvConfig::square(1), bias, rng);
  switch (spec.kind) {
    case BottleneckKind::Asymmetric:
      main_ = AsymmetricConv2d<T>(mid, net.asymmetric_kernel, bias, rng);
      break;
    case BottleneckKind::Dilated:
      main_ = Conv2d<T>(mid, mid, ConvConfig::square(3, 1, spec.dilation, spec.dilation), bias, rng);
      break;
    case BottleneckKind::Normal:
    case BottleneckKind::Downsample:
      main_ = Conv2d<T>(mid, mid, ConvConfig::square(3, 1, 1), bias, rng);
      break;
    case BottleneckKind::Upsample:
      contract_fail(spec.name + ": upsampling is a decoder bottleneck");
  }
  expand_ = Conv2d<T>(mid, out, ConvConfig::square(1), bias, rng);
  if (net.use_batch_norm) {
    bn1_.emplace(mid);
    bn2_.emplace(mid);
    bn3_.emplace(out);
  }
  if (net.use_prelu) {
    act1_.emplace(mid);
    act2_.emplace(mid);
    act_out_.emplace(out);
  }
}

template <typename T>
Tensor<T> EncoderBottleneck<T>::norm_act(const Tensor<T>& x, std::optional<BatchNorm2d<T>>& bn,
                                         const std::optional<PReLU<T>>& act, bool training) {
  return apply_norm_act(x, bn, act, training);
}

template <typename T>
Tensor<T> EncoderBottleneck<T>::forward(const Tensor<T>& x, Mode mode, Rng* rng, ShapeTrace* trace) {
  if (x.shape().c != spec_.in_channels)
    contract_fail(spec_.name + ": expected " + std::to_string(spec_.in_channels) +
                  " input channels, got " + x.shape().str());
  const bool training = mode == Mode::Train;
  const std::string& p = spec_.name;

  Tensor<T> b1 = proj_.forward(x);
  trace_row(trace, p, "Conv1", b1.shape());
  b1 = norm_act(b1, bn1_, act1_, training);
  b1 = std::visit([&](const auto& layer) { return layer.forward(b1); }, main_);
  trace_row(trace, p, "Conv2", b1.shape());
  b1 = norm_act(b1, bn2_, act2_, training);
  b1 = expand_.forward(b1);
  trace_row(trace, p, "Conv3", b1.shape());
  if (bn3_) b1 = bn3_->forward(b1, training);
  b1 = dropout(b1, spec_.dropout_rate, training, rng);
  trace_row(trace, p, "Dropout", b1.shape());

  Tensor<T> b2 = x;
  if (spec_.kind == BottleneckKind::Downsample) {
    b2 = maxpool2d(x);
    trace_row(trace, p, "Max-pooling", b2.shape());
  }
  b2 = channel_zero_pad(b2, spec_.out_channels);
  trace_row(trace, p, "Padding", b2.shape());

  Tensor<T> y = add(b1, b2);
  trace_row(trace, p, "Addition", y.shape());
  return act_out_ ? act_out_->forward(y) : y;
}

template <typename T>
void EncoderBottleneck<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  proj_.collect(out, prefix + ".conv1");
  if (bn1_) bn1_->collect(out, prefix + ".bn1");
  if (act1_) act1_->collect(out, prefix + ".act1");
  std::visit([&](const auto& layer) { layer.collect(out, prefix + ".conv2"); }, main_);
  if (bn2_) bn2_->collect(out, prefix + ".bn2");
  if (act2_) act2_->collect(out, prefix + ".act2");
  expand_.collect(out, prefix + ".conv3");
  if (bn3_) bn3_->collect(out, prefix + ".bn3");
  if (act_out_) act_out_->collect(out, prefix + ".act_out");
}

template <typename T>
DecoderBottleneck<T>::DecoderBottleneck(const BottleneckSpec& spec, const NetworkSpec& net, Rng& rng)
    : spec_(spec) {
  const std::size_t in = spec.in_channels, mid = spec.internal_channels, out = spec.out_channels;
  const bool bias = !net.use_batch_norm;
  const bool up = spec.kind == BottleneckKind::Upsample;
  if (!up && spec.kind != BottleneckKind::Normal)
    contract_fail(spec.name + ": decoder bottlenecks are normal or upsampling");
  proj_ = Conv2d<T>(in, mid, ConvConfig::square(1), bias, rng);
  if (up)
    main_ = TransposeConv2d<T>(mid, mid, TransposeConvConfig::doubling(), bias, rng);
  else
    main_ = Conv2d<T>(mid, mid, ConvConfig::square(3, 1, 1), bias, rng);
  expand_ = Conv2d<T>(mid, out, ConvConfig::square(1), bias, rng);
  if (up) skip_.emplace(in, out, ConvConfig::square(1), bias, rng);
  if (net.use_batch_norm) {
    bn1_.emplace(mid);
    bn2_.emplace(mid);
    bn3_.emplace(out);
    if (up) bn_skip_.emplace(out);
  }
  if (net.use_prelu) {
    act1_.emplace(mid);
    act2_.emplace(mid);
    act_out_.emplace(out);
  }
}

template <typename T>
Tensor<T> DecoderBottleneck<T>::forward(const Tensor<T>& x, Mode mode, ShapeTrace* trace) {
  if (x.shape().c != spec_.in_channels)
    contract_fail(spec_.name + ": expected " + std::to_string(spec_.in_channels) +
                  " input channels, got " + x.shape().str());
  const bool training = mode == Mode::Train;
  const std::string& p = spec_.name;

  Tensor<T> b1 = proj_.forward(x);
  trace_row(trace, p, "Conv1", b1.shape());
  b1 = apply_norm_act(b1, bn1_, act1_, training);
  b1 = std::visit([&](const auto& layer) { return layer.forward(b1); }, main_);
  trace_row(trace, p, "Conv2", b1.shape());
  b1 = apply_norm_act(b1, bn2_, act2_, training);
  b1 = expand_.forward(b1);
  trace_row(trace, p, "Conv3", b1.shape());
  if (bn3_) b1 = bn3_->forward(b1, training);

  Tensor<T> b2 = x;
  if (skip_) {
    b2 = skip_->forward(x);
    trace_row(trace, p, "Conv", b2.shape());
    if (bn_skip_) b2 = bn_skip_->forward(b2, training);
    b2 = upsample_nearest(b2, 2);
    trace_row(trace, p, "Up-Sampling", b2.shape());
  }

  Tensor<T> y = add(b1, b2);
  trace_row(trace, p, "Addition", y.shape());
  return act_out_ ? act_out_->forward(y) : y;
}

template <typename T>
void DecoderBottleneck<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  proj_.collect(out, prefix + ".conv1");
  if (bn1_) bn1_->collect(out, prefix + ".bn1");
  if (act1_) act1_->collect(out, prefix + ".act1");
  std::visit([&](const auto& layer) { layer.collect(out, prefix + ".conv2"); }, main_);
  if (bn2_) bn2_->collect(out, prefix + ".bn2");
  if (act2_) act2_->collect(out, prefix + ".act2");
  expand_.collect(out, prefix + ".conv3");
  if (bn3_) bn3_->collect(out, prefix + ".bn3");
  if (skip_) skip_->collect(out, prefix + ".skip");
  if (bn_skip_) bn_skip_->collect(out, prefix + ".bn_skip");
  if (act_out_) act_out_->collect(out, prefix + ".act_out");
}

// ---------------------------------------------------------------------------
// LiteCnn

template <typename T>
LiteCnn<T>::LiteCnn(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
  spec_.validate();
  const bool bias = !spec_.use_batch_norm;
  const std::size_t concat = spec_.initial_conv_channels + spec_.input_channels;
  initial_conv_ = Conv2d<T>(spec_.input_channels, spec_.initial_conv_channels,
                            ConvConfig::square(3, 2, 1), bias, rng);
  if (spec_.use_batch_norm) initial_bn_.emplace(concat);
  if (spec_.use_prelu) initial_act_.emplace(concat);
  std::size_t last = concat;
  for (const auto& g : spec_.groups)
    for (const auto& b : g.bottlenecks) {
      if (b.decoder)
        decoders_.emplace_back(b, spec_, rng);
      else
        encoders_.emplace_back(b, spec_, rng);
      last = b.out_channels;
    }
  classifier_ = TransposeConv2d<T>(last, spec_.classes, TransposeConvConfig::square(2, 2, 0, 0), true, rng);
}

template <typename T>
Tensor<T> LiteCnn<T>::forward(const Tensor<T>& x, Mode mode, Rng* dropout_rng, ShapeTrace* trace) {
  const Shape in = x.shape();
  const std::size_t S = spec_.input_size;
  if (in.c != spec_.input_channels || in.h != S || in.w != S)
    contract_fail("network input must be (" + std::to_string(S) + "," + std::to_string(S) + "," +
                  std::to_string(spec_.input_channels) + ") per sample, got " + in.str());
  const bool training = mode == Mode::Train;
  const std::size_t n = in.n;

  auto expect = [&](const std::string& name, const Tensor<T>& t, Shape want) {
    if (!(t.shape() == want))
      contract_fail("shape contract violated at " + name + ": expected " + want.str() + ", got " +
                    t.shape().str());
    if (trace) trace->record(name, t.shape());
  };

  expect("Input", x, in);
  std::size_t size = S / 2;
  std::size_t channels = spec_.initial_conv_channels + spec_.input_channels;
  Tensor<T> conv = initial_conv_.forward(x);
  expect("Initial/Conv", conv, Shape{n, spec_.initial_conv_channels, size, size});
  Tensor<T> pool = maxpool2d(x);
  expect("Initial/Max-pooling", pool, Shape{n, spec_.input_channels, size, size});
  Tensor<T> y = concat_channels(conv, pool);
  expect("Initial/Concatenation", y, Shape{n, channels, size, size});
  y = apply_norm_act(y, initial_bn_, initial_act_, training);

  std::size_t enc = 0, dec = 0;
  for (const auto& g : spec_.groups)
    for (const auto& b : g.bottlenecks) {
      if (b.kind == BottleneckKind::Downsample) size /= 2;
      if (b.kind == BottleneckKind::Upsample) size *= 2;
      channels = b.out_channels;
      y = b.decoder ? decoders_[dec++].forward(y, mode, trace)
                    : encoders_[enc++].forward(y, mode, dropout_rng, trace);
      expect(b.name, y, Shape{n, channels, size, size});
    }

  Tensor<T> out = classifier_.forward(y);
  expect("Output/Conv", out, Shape{n, spec_.classes, S, S});
  return out;
}

template <typename T>
ParamList<T> LiteCnn<T>::parameters() const {
  ParamList<T> all;
  initial_conv_.collect(all, "initial.conv");
  if (initial_bn_) initial_bn_->collect(all, "initial.bn");
  if (initial_act_) initial_act_->collect(all, "initial.act");
  std::size_t enc = 0, dec = 0;
  for (const auto& g : spec_.groups)
    for (const auto& b : g.bottlenecks) {
      // "BottleNeck 2.3" -> "bottleneck2.3"
      const std::string prefix = "bottleneck" + b.name.substr(b.name.find(' ') + 1);
      if (b.decoder)
        decoders_[dec++].collect(all, prefix);
      else
        encoders_[enc++].collect(all, prefix);
    }
  classifier_.collect(all, "output.conv");
  ParamList<T> ordered;
  for (auto& p : all)
    if (p.trainable) ordered.push_back(p);
  for (auto& p : all)
    if (!p.trainable) ordered.push_back(p);
  return ordered;
}

template <typename T>
ParamList<T> LiteCnn<T>::trainable_parameters() const {
  ParamList<T> out;
  for (auto& p : parameters())
    if (p.trainable) out.push_back(p);
  return out;
}

template <typename T>
std::size_t LiteCnn<T>::count_parameters() const {
  std::size_t total = 0;
  for (const auto& p : trainable_parameters()) total += p.tensor.numel();
  return total;
}

template class EncoderBottleneck<float>;
template class EncoderBottleneck<double>;
template class DecoderBottleneck<float>;
template class DecoderBottleneck<double>;
template class LiteCnn<float>;
template class LiteCnn<double>;

// ---------------------------------------------------------------------------
// Cost accounting

namespace {

class CostBuilder {
 public:
  explicit CostBuilder(const NetworkSpec& spec) : bn_(spec.use_batch_norm), prelu_(spec.use_prelu) {}

  void group(const std::string& name) {
    profile_.groups.push_back({name, 0, 0});
    group_ = name;
  }

  // Cross-correlation producing (out, oh, ow); bias only when no batch norm follows.
  void conv(const std::string& layer, std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
            std::size_t oh, std::size_t ow, bool force_bias = false) {
    const bool bias = force_bias || !bn_;
    add(layer, in * out * kh * kw + (bias ? out : 0), oh * ow * out * kh * kw * in);
  }

  // Transposed convolution reading an (in, ih, iw) map.
  void tconv(const std::string& layer, std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
             std::size_t ih, std::size_t iw, bool force_bias = false) {
    const bool bias = force_bias || !bn_;
    add(layer, in * out * kh * kw + (bias ? out : 0), ih * iw * in * kh * kw * out);
  }

  void norm(const std::string& layer, std::size_t channels) {
    if (bn_) add(layer + ".bn", 2 * channels, 0);
  }
  void act(const std::string& layer, std::size_t channels) {
    if (prelu_) add(layer + ".prelu", channels, 0);
  }

  Profile finish() { return std::move(profile_); }

 private:
  void add(const std::string& layer, std::size_t params, std::size_t macs) {
    profile_.layers.push_back({group_, layer, params, macs});
    profile_.groups.back().params += params;
    profile_.groups.back().macs += macs;
    profile_.total_params += params;
    profile_.total_macs += macs;
  }

  bool bn_, prelu_;
  std::string group_;
  Profile profile_;
};

void initial_block(CostBuilder& cb, const NetworkSpec& spec) {
  const std::size_t half = spec.input_size / 2;
  const std::size_t concat = spec.initial_conv_channels + spec.input_channels;
  cb.group("Initial");
  cb.conv("Initial/Conv 3x3/2", spec.input_channels, spec.initial_conv_channels, 3, 3, half, half);
  cb.norm("Initial/Concatenation", concat);
  cb.act("Initial/Concatenation", concat);
}

void output_block(CostBuilder& cb, const NetworkSpec& spec, std::size_t in) {
  const std::size_t half = spec.input_size / 2;
  cb.group("Output");
  cb.tconv("Output/TConv 2x2/2", in, spec.classes, 2, 2, half, half, true);
}

}  // namespace

Profile profile_lite(const NetworkSpec& spec) {
  spec.validate();
  CostBuilder cb(spec);
  initial_block(cb, spec);
  std::size_t size = spec.input_size / 2;
  std::size_t last = spec.initial_conv_channels + spec.input_channels;
  const std::size_t k = spec.asymmetric_kernel;
  for (const auto& g : spec.groups) {
    cb.group(g.name);
    for (const auto& b : g.bottlenecks) {
      const std::size_t in = b.in_channels, mid = b.internal_channels, out = b.out_channels;
      const std::string& n = b.name;
      if (!b.decoder) {
        const bool down = b.kind == BottleneckKind::Downsample;
        const std::size_t os = down ? size / 2 : size;
        cb.conv(n + "/Conv1", in, mid, down ? 2 : 1, down ? 2 : 1, os, os);
        cb.norm(n + "/Conv1", mid);
        cb.act(n + "/Conv1", mid);
        if (b.kind == BottleneckKind::Asymmetric) {
          cb.conv(n + "/Conv2 " + std::to_string(k) + "x1", mid, mid, k, 1, os, os);
          cb.conv(n + "/Conv2 1x" + std::to_string(k), mid, mid, 1, k, os, os);
        } else {
          cb.conv(n + "/Conv2 3x3", mid, mid, 3, 3, os, os);
        }
        cb.norm(n + "/Conv2", mid);
        cb.act(n + "/Conv2", mid);
        cb.conv(n + "/Conv3", mid, out, 1, 1, os, os);
        cb.norm(n + "/Conv3", out);
        cb.act(n + "/Addition", out);
        size = os;
      } else {
        const bool up = b.kind == BottleneckKind::Upsample;
        const std::size_t os = up ? size * 2 : size;
        cb.conv(n + "/Conv1", in, mid, 1, 1, size, size);
        cb.norm(n + "/Conv1", mid);
        cb.act(n + "/Conv1", mid);
        if (up)
          cb.tconv(n + "/Conv2 TConv 3x3/2", mid, mid, 3, 3, size, size);
        else
          cb.conv(n + "/Conv2 3x3", mid, mid, 3, 3, os, os);
        cb.norm(n + "/Conv2", mid);
        cb.act(n + "/Conv2", mid);
        cb.conv(n + "/Conv3", mid, out, 1, 1, os, os);
        cb.norm(n + "/Conv3", out);
        if (up) {
          cb.conv(n + "/Conv (skip)", in, out, 1, 1, size, size);
          cb.norm(n + "/Conv (skip)", out);
        }
        cb.act(n + "/Addition", out);
        size = os;
      }
      last = out;
    }
  }
  output_block(cb, spec, last);
  return cb.finish();
}

Profile profile_plain(const NetworkSpec& spec) {
  spec.validate();
  CostBuilder cb(spec);
  initial_block(cb, spec);
  std::size_t size = spec.input_size / 2;
  std::size_t last = spec.initial_conv_channels + spec.input_channels;
  for (const auto& g : spec.groups) {
    cb.group(g.name);
    for (const auto& b : g.bottlenecks) {
      const std::size_t in = b.in_channels, out = b.out_channels;
      const std::string& n = b.name;
      if (b.kind == BottleneckKind::Upsample) {
        cb.tconv(n + "/TConv 3x3/2", in, out, 3, 3, size, size);
        size *= 2;
      } else {
        if (b.kind == BottleneckKind::Downsample) size /= 2;
        cb.conv(n + (b.kind == BottleneckKind::Downsample ? "/Conv 3x3/2" : "/Conv 3x3"), in, out, 3, 3,
                size, size);
      }
      cb.norm(n, out);
      cb.act(n, out);
      last = out;
    }
  }
  output_block(cb, spec, last);
  return cb.finish();
}

std::size_t count_macs(const NetworkSpec& spec) { return profile_lite(spec).total_macs; }

}  // namespace litecd
