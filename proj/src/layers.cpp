#include "litecd/layers.hpp"

#include <cmath>
#include <memory>

#include "conv_kernels.hpp"
#include "litecd/parallel.hpp"

namespace litecd {

using kernels::Geometry;

std::size_t conv_output_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                             std::size_t dilation) {
  if (stride < 1 || dilation < 1 || k < 1)
    contract_fail("conv: kernel, stride and dilation must be >= 1");
  const long span = static_cast<long>(dilation * (k - 1) + 1);
  const long avail = static_cast<long>(in + 2 * pad) - span;
  if (avail < 0)
    contract_fail("conv: non-positive output size (input " + std::to_string(in) + ", kernel " +
                  std::to_string(k) + ", dilation " + std::to_string(dilation) + ", pad " +
                  std::to_string(pad) + ")");
  return static_cast<std::size_t>(avail) / stride + 1;
}

std::size_t transpose_conv_output_size(std::size_t in, std::size_t k, std::size_t stride,
                                       std::size_t pad, std::size_t output_pad) {
  if (stride < 1 || k < 1) contract_fail("transpose_conv: kernel and stride must be >= 1");
  if (output_pad >= stride)
    contract_fail("transpose_conv: output padding must be smaller than the stride");
  const long out = static_cast<long>((in - 1) * stride + k + output_pad) - 2 * static_cast<long>(pad);
  if (out < 1) contract_fail("transpose_conv: configuration yields non-positive output size");
  return static_cast<std::size_t>(out);
}

namespace {

template <typename T>
void check_bias(const std::optional<Tensor<T>>& bias, std::size_t out_channels, const char* op) {
  if (bias && !(bias->shape() == Shape{1, out_channels, 1, 1}))
    contract_fail(std::string(op) + ": bias must be (1," + std::to_string(out_channels) +
                  ",1,1), got " + bias->shape().str());
}

template <typename T>
std::vector<Tensor<T>> parents(const Tensor<T>& x, const Tensor<T>& w,
                               const std::optional<Tensor<T>>& b) {
  std::vector<Tensor<T>> p{x, w};
  if (b) p.push_back(*b);
  return p;
}

template <typename T>
void accumulate_channel_sums(std::span<const T> g, std::size_t batch, std::size_t channels,
                             std::size_t plane, const std::shared_ptr<detail::TensorImpl<T>>& bias) {
  std::vector<T> db(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      const T* src = g.data() + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(src[i]);
    }
    db[c] = static_cast<T>(acc);
  }
  detail::accumulate<T>(bias, db);
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const std::optional<Tensor<T>>& bias,
                 const ConvConfig& cfg) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c)
    contract_fail("conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                  " channels, weight " + ws.str() + " expects " + std::to_string(ws.c));
  if (ws.h != cfg.kh || ws.w != cfg.kw)
    contract_fail("conv2d: weight " + ws.str() + " does not match kernel " +
                  std::to_string(cfg.kh) + "x" + std::to_string(cfg.kw));
  check_bias(bias, ws.n, "conv2d");

  const Geometry g{xs.c,   xs.h,   xs.w,   cfg.kh, cfg.kw, cfg.sh, cfg.sw, cfg.dh, cfg.dw,
                   cfg.ph, cfg.pw, conv_output_size(xs.h, cfg.kh, cfg.sh, cfg.ph, cfg.dh),
                   conv_output_size(xs.w, cfg.kw, cfg.sw, cfg.pw, cfg.dw)};
  const std::size_t N = xs.n, C = xs.c, Cout = ws.n, K = g.taps(), P = g.positions();
  const std::size_t in_plane = C * xs.h * xs.w;

  auto rows = std::make_shared<std::vector<T>>(N * P * K);
  const T* xdata = x.data().data();
  parallel_for(N, [&](std::size_t b) { kernels::im2row(xdata + b * in_plane, g, rows->data() + b * P * K); });

  std::vector<T> out(N * Cout * P);
  const T* wdata = weight.data().data();
  const T* bdata = bias ? bias->data().data() : nullptr;
  parallel_for(N * Cout, [&](std::size_t task) {
    const std::size_t b = task / Cout, co = task % Cout;
    const T* wrow = wdata + co * K;
    const T* r = rows->data() + b * P * K;
    T* dst = out.data() + task * P;
    const double b0 = bdata ? static_cast<double>(bdata[co]) : 0.0;
    for (std::size_t p = 0; p < P; ++p) dst[p] = static_cast<T>(b0 + kernels::dot(wrow, r + p * K, K));
  });

  auto px = x.impl();
  auto pw = weight.impl();
  auto pb = bias ? bias->impl() : nullptr;
  return detail::record<T>(
      Shape{N, Cout, g.out_h, g.out_w}, std::move(out), "conv2d", parents(x, weight, bias),
      [px, pw, pb, rows, g, N, Cout, K, P, in_plane](std::span<const T> grad) {
        if (pw->requires_grad) {
          std::vector<T> dw(Cout * K);
          parallel_for(Cout, [&](std::size_t co) {
            std::vector<double> acc(K, 0.0);
            for (std::size_t b = 0; b < N; ++b) {
              const T* gsrc = grad.data() + (b * Cout + co) * P;
              const T* r = rows->data() + b * P * K;
              for (std::size_t p = 0; p < P; ++p)
                if (gsrc[p] != T(0)) kernels::axpy(static_cast<double>(gsrc[p]), r + p * K, acc.data(), K);
            }
            for (std::size_t k = 0; k < K; ++k) dw[co * K + k] = static_cast<T>(acc[k]);
          });
          detail::accumulate<T>(pw, dw);
        }
        if (pb && pb->requires_grad) accumulate_channel_sums(grad, N, Cout, P, pb);
        if (px->requires_grad) {
          std::vector<T> dx(N * in_plane);
          const T* wdata = pw->data.data();
          parallel_for(N, [&](std::size_t b) {
            std::vector<double> drows(P * K, 0.0);
            for (std::size_t p = 0; p < P; ++p) {
              double* acc = drows.data() + p * K;
              for (std::size_t co = 0; co < Cout; ++co) {
                const T gv = grad[(b * Cout + co) * P + p];
                if (gv != T(0)) kernels::axpy(static_cast<double>(gv), wdata + co * K, acc, K);
              }
            }
            std::vector<double> image(in_plane, 0.0);
            kernels::row2im_add(drows.data(), g, image.data());
            for (std::size_t i = 0; i < in_plane; ++i) dx[b * in_plane + i] = static_cast<T>(image[i]);
          });
          detail::accumulate<T>(px, dx);
        }
      });
}

template <typename T>
Tensor<T> dilated_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                         const std::optional<Tensor<T>>& bias, std::size_t rate) {
  const Shape ws = weight.shape();
  if (rate < 1) contract_fail("dilated_conv2d: dilation must be >= 1");
  if (ws.h % 2 == 0 || ws.w % 2 == 0)
    contract_fail("dilated_conv2d: size-preserving padding needs odd kernels, got " + ws.str());
  ConvConfig cfg{ws.h, ws.w, 1, 1, rate, rate, rate * (ws.h - 1) / 2, rate * (ws.w - 1) / 2};
  return conv2d(x, weight, bias, cfg);
}

template <typename T>
Tensor<T> transpose_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const std::optional<Tensor<T>>& bias, const TransposeConvConfig& cfg) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != xs.c)
    contract_fail("transpose_conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                  " channels, weight " + ws.str() + " expects " + std::to_string(ws.n));
  if (ws.h != cfg.kh || ws.w != cfg.kw)
    contract_fail("transpose_conv2d: weight " + ws.str() + " does not match kernel " +
                  std::to_string(cfg.kh) + "x" + std::to_string(cfg.kw));
  check_bias(bias, ws.c, "transpose_conv2d");

  const std::size_t Ho = transpose_conv_output_size(xs.h, cfg.kh, cfg.sh, cfg.ph, cfg.oph);
  const std::size_t Wo = transpose_conv_output_size(xs.w, cfg.kw, cfg.sw, cfg.pw, cfg.opw);
  // The forward map is the input-gradient of a conv from (Cout, Ho, Wo) to (Cin, H, W).
  const Geometry g{ws.c, Ho, Wo, cfg.kh, cfg.kw, cfg.sh, cfg.sw, 1, 1, cfg.ph, cfg.pw, xs.h, xs.w};
  if (conv_output_size(Ho, cfg.kh, cfg.sh, cfg.ph, 1) != xs.h ||
      conv_output_size(Wo, cfg.kw, cfg.sw, cfg.pw, 1) != xs.w)
    contract_fail("transpose_conv2d: configuration is not the adjoint of an integer-size conv");

  const std::size_t N = xs.n, Cin = xs.c, Cout = ws.c, K = g.taps(), P = g.positions();
  const std::size_t out_plane = Cout * Ho * Wo;
  const T* xdata = x.data().data();
  const T* wdata = weight.data().data();
  const T* bdata = bias ? bias->data().data() : nullptr;

  std::vector<T> out(N * out_plane);
  parallel_for(N, [&](std::size_t b) {
    std::vector<double> yrows(P * K, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      double* acc = yrows.data() + p * K;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const T xv = xdata[(b * Cin + ci) * P + p];
        if (xv != T(0)) kernels::axpy(static_cast<double>(xv), wdata + ci * K, acc, K);
      }
    }
    std::vector<double> image(out_plane, 0.0);
    kernels::row2im_add(yrows.data(), g, image.data());
    for (std::size_t co = 0; co < Cout; ++co) {
      const double b0 = bdata ? static_cast<double>(bdata[co]) : 0.0;
      for (std::size_t i = 0; i < Ho * Wo; ++i)
        out[b * out_plane + co * Ho * Wo + i] = static_cast<T>(image[co * Ho * Wo + i] + b0);
    }
  });

  auto px = x.impl();
  auto pw = weight.impl();
  auto pb = bias ? bias->impl() : nullptr;
  return detail::record<T>(
      Shape{N, Cout, Ho, Wo}, std::move(out), "transpose_conv2d", parents(x, weight, bias),
      [px, pw, pb, g, N, Cin, Cout, K, P, out_plane](std::span<const T> grad) {
        std::vector<T> grows(N * P * K);
        parallel_for(N, [&](std::size_t b) {
          kernels::im2row(grad.data() + b * out_plane, g, grows.data() + b * P * K);
        });
        if (pw->requires_grad) {
          std::vector<T> dw(Cin * K);
          const T* xdata = px->data.data();
          parallel_for(Cin, [&](std::size_t ci) {
            std::vector<double> acc(K, 0.0);
            for (std::size_t b = 0; b < N; ++b)
              for (std::size_t p = 0; p < P; ++p) {
                const T xv = xdata[(b * Cin + ci) * P + p];
                if (xv != T(0))
                  kernels::axpy(static_cast<double>(xv), grows.data() + (b * P + p) * K, acc.data(), K);
              }
            for (std::size_t k = 0; k < K; ++k) dw[ci * K + k] = static_cast<T>(acc[k]);
          });
          detail::accumulate<T>(pw, dw);
        }
        if (pb && pb->requires_grad) accumulate_channel_sums(grad, N, Cout, g.height * g.width, pb);
        if (px->requires_grad) {
          std::vector<T> dx(N * Cin * P);
          const T* wdata = pw->data.data();
          parallel_for(N * Cin, [&](std::size_t task) {
            const std::size_t b = task / Cin, ci = task % Cin;
            const T* r = grows.data() + b * P * K;
            for (std::size_t p = 0; p < P; ++p)
              dx[task * P + p] = static_cast<T>(kernels::dot(wdata + ci * K, r + p * K, K));
          });
          detail::accumulate<T>(px, dx);
        }
      });
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0)
    contract_fail("maxpool2d: spatial size must be even, got " + s.str());
  const Shape so{s.n, s.c, s.h / 2, s.w / 2};
  std::vector<T> out(so.numel());
  auto argmax = std::make_shared<std::vector<std::size_t>>(so.numel());
  const auto src = x.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < s.n * s.c; ++plane) {
    const std::size_t base = plane * s.h * s.w;
    for (std::size_t oy = 0; oy < so.h; ++oy)
      for (std::size_t ox = 0; ox < so.w; ++ox, ++o) {
        std::size_t best = base + (2 * oy) * s.w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * s.w + 2 * ox + dx;
            if (src[idx] > src[best]) best = idx;
          }
        out[o] = src[best];
        (*argmax)[o] = best;
      }
  }
  auto px = x.impl();
  return detail::record<T>(so, std::move(out), "maxpool2d", {x},
                           [px, argmax](std::span<const T> g) {
                             std::vector<T> dx(px->data.size(), T(0));
                             for (std::size_t i = 0; i < g.size(); ++i) dx[(*argmax)[i]] += g[i];
                             detail::accumulate<T>(px, dx);
                           });
}

template <typename T>
Tensor<T> channel_zero_pad(const Tensor<T>& x, std::size_t out_channels) {
  const Shape s = x.shape();
  if (out_channels < s.c)
    contract_fail("channel_zero_pad: cannot pad " + std::to_string(s.c) + " channels down to " +
                  std::to_string(out_channels));
  if (out_channels == s.c) return x;
  const Shape so{s.n, out_channels, s.h, s.w};
  const std::size_t in_block = s.c * s.plane();
  const std::size_t out_block = out_channels * s.plane();
  std::vector<T> out(so.numel(), T(0));
  const auto src = x.data();
  for (std::size_t n = 0; n < s.n; ++n)
    std::copy_n(src.begin() + n * in_block, in_block, out.begin() + n * out_block);
  auto px = x.impl();
  return detail::record<T>(so, std::move(out), "channel_zero_pad", {x},
                           [px, in_block, out_block, batch = s.n](std::span<const T> g) {
                             std::vector<T> dx(batch * in_block);
                             for (std::size_t n = 0; n < batch; ++n)
                               std::copy_n(g.begin() + n * out_block, in_block, dx.begin() + n * in_block);
                             detail::accumulate<T>(px, dx);
                           });
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t factor) {
  if (factor != 2) contract_fail("upsample_nearest: only factor 2 is supported");
  const Shape s = x.shape();
  const Shape so{s.n, s.c, s.h * factor, s.w * factor};
  std::vector<T> out(so.numel());
  const auto src = x.data();
  for (std::size_t plane = 0; plane < s.n * s.c; ++plane)
    for (std::size_t y = 0; y < so.h; ++y)
      for (std::size_t xx = 0; xx < so.w; ++xx)
        out[(plane * so.h + y) * so.w + xx] = src[(plane * s.h + y / factor) * s.w + xx / factor];
  auto px = x.impl();
  return detail::record<T>(so, std::move(out), "upsample_nearest", {x},
                           [px, s, so, factor](std::span<const T> g) {
                             std::vector<T> dx(s.numel(), T(0));
                             for (std::size_t plane = 0; plane < s.n * s.c; ++plane)
                               for (std::size_t y = 0; y < so.h; ++y)
                                 for (std::size_t xx = 0; xx < so.w; ++xx)
                                   dx[(plane * s.h + y / factor) * s.w + xx / factor] +=
                                       g[(plane * so.h + y) * so.w + xx];
                             detail::accumulate<T>(px, dx);
                           });
}

template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
  const Shape s = x.shape();
  if (!(slope.shape() == Shape{1, s.c, 1, 1}))
    contract_fail("prelu: slope must be (1," + std::to_string(s.c) + ",1,1), got " + slope.shape().str());
  std::vector<T> out(s.numel());
  const auto src = x.data();
  const auto a = slope.data();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const T v = src[base + i];
        out[base + i] = v > T(0) ? v : a[c] * v;
      }
    }
  auto px = x.impl();
  auto pa = slope.impl();
  return detail::record<T>(s, std::move(out), "prelu", {x, slope}, [px, pa, s](std::span<const T> g) {
    const auto& xv = px->data;
    const auto& a = pa->data;
    if (px->requires_grad) {
      std::vector<T> dx(s.numel());
      for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t c = 0; c < s.c; ++c) {
          const std::size_t base = (n * s.c + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i)
            dx[base + i] = xv[base + i] > T(0) ? g[base + i] : a[c] * g[base + i];
        }
      detail::accumulate<T>(px, dx);
    }
    if (pa->requires_grad) {
      std::vector<T> da(s.c);
      for (std::size_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
          const std::size_t base = (n * s.c + c) * s.plane();
          for (std::size_t i = 0; i < s.plane(); ++i)
            if (!(xv[base + i] > T(0))) acc += static_cast<double>(g[base + i]) * xv[base + i];
        }
        da[c] = static_cast<T>(acc);
      }
      detail::accumulate<T>(pa, da);
    }
  });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     const BatchNormConfig& cfg) {
  const Shape s = x.shape();
  const Shape cs{1, s.c, 1, 1};
  if (!(gamma.shape() == cs) || !(beta.shape() == cs) || !(running_mean.shape() == cs) ||
      !(running_var.shape() == cs))
    contract_fail("batch_norm: per-channel tensors must be " + cs.str() + " for input " + s.str());
  const std::size_t count = s.n * s.plane();
  if (training && count <= 1)
    contract_fail("batch_norm: training mode needs more than one value per channel, got " + s.str());

  const auto src = x.data();
  std::vector<double> mean(s.c), invstd(s.c);
  if (training) {
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::size_t c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = src.data() + (n * s.c + c) * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = src.data() + (n * s.c + c) * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = mu;
      invstd[c] = 1.0 / std::sqrt(var + cfg.eps);
      const double unbiased = sq / static_cast<double>(count - 1);
      rm[c] = static_cast<T>((1.0 - cfg.momentum) * rm[c] + cfg.momentum * mu);
      rv[c] = static_cast<T>((1.0 - cfg.momentum) * rv[c] + cfg.momentum * unbiased);
    }
  } else {
    const auto rm = running_mean.data();
    const auto rv = running_var.data();
    for (std::size_t c = 0; c < s.c; ++c) {
      mean[c] = rm[c];
      invstd[c] = 1.0 / std::sqrt(static_cast<double>(rv[c]) + cfg.eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(s.numel());
  std::vector<T> out(s.numel());
  const auto gm = gamma.data();
  const auto bt = beta.data();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        const double h = (src[base + i] - mean[c]) * invstd[c];
        (*xhat)[base + i] = h;
        out[base + i] = static_cast<T>(gm[c] * h + bt[c]);
      }
    }

  auto px = x.impl();
  auto pg = gamma.impl();
  auto pb = beta.impl();
  return detail::record<T>(
      s, std::move(out), "batch_norm", {x, gamma, beta},
      [px, pg, pb, xhat, invstd, s, training, count](std::span<const T> g) {
        std::vector<double> sum_g(s.c, 0.0), sum_gx(s.c, 0.0);
        for (std::size_t n = 0; n < s.n; ++n)
          for (std::size_t c = 0; c < s.c; ++c) {
            const std::size_t base = (n * s.c + c) * s.plane();
            for (std::size_t i = 0; i < s.plane(); ++i) {
              sum_g[c] += g[base + i];
              sum_gx[c] += g[base + i] * (*xhat)[base + i];
            }
          }
        if (pg->requires_grad) {
          std::vector<T> dg(s.c);
          for (std::size_t c = 0; c < s.c; ++c) dg[c] = static_cast<T>(sum_gx[c]);
          detail::accumulate<T>(pg, dg);
        }
        if (pb->requires_grad) {
          std::vector<T> db(s.c);
          for (std::size_t c = 0; c < s.c; ++c) db[c] = static_cast<T>(sum_g[c]);
          detail::accumulate<T>(pb, db);
        }
        if (px->requires_grad) {
          const auto& gm = pg->data;
          const double m = static_cast<double>(count);
          std::vector<T> dx(s.numel());
          for (std::size_t n = 0; n < s.n; ++n)
            for (std::size_t c = 0; c < s.c; ++c) {
              const std::size_t base = (n * s.c + c) * s.plane();
              const double k = gm[c] * invstd[c];
              for (std::size_t i = 0; i < s.plane(); ++i) {
                const double gi = g[base + i];
                dx[base + i] = static_cast<T>(
                    training ? k * (gi - sum_g[c] / m - (*xhat)[base + i] * sum_gx[c] / m) : k * gi);
              }
            }
          detail::accumulate<T>(px, dx);
        }
      });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) contract_fail("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0 || rng == nullptr) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  for (auto& m : *mask) m = rng->uniform() < rate ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  const auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] * (*mask)[i];
  auto px = x.impl();
  return detail::record<T>(x.shape(), std::move(out), "dropout", {x},
                           [px, mask](std::span<const T> g) {
                             std::vector<T> dx(g.size());
                             for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (*mask)[i];
                             detail::accumulate<T>(px, dx);
                           });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out(s);
  const auto src = x.data();
  auto dst = out.data();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < s.plane(); ++i) {
      double mx = -INFINITY;
      for (std::size_t c = 0; c < s.c; ++c) mx = std::max<double>(mx, src[(n * s.c + c) * s.plane() + i]);
      double z = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) z += std::exp(src[(n * s.c + c) * s.plane() + i] - mx);
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t idx = (n * s.c + c) * s.plane() + i;
        dst[idx] = static_cast<T>(std::exp(src[idx] - mx) / z);
      }
    }
  return out;
}

template <typename T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, ConvConfig cfg, bool with_bias,
                  Rng& rng)
    : cfg_(cfg),
      weight_(kaiming_uniform<T>(Shape{out_channels, in_channels, cfg.kh, cfg.kw},
                                 in_channels * cfg.kh * cfg.kw, rng)) {
  weight_.set_requires_grad(true);
  if (with_bias) {
    bias_ = Tensor<T>(Shape{1, out_channels, 1, 1});
    bias_->set_requires_grad(true);
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  return conv2d(x, weight_, bias_, cfg_);
}

template <typename T>
void Conv2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight_, true});
  if (bias_) out.push_back({prefix + ".bias", *bias_, true});
}

template <typename T>
TransposeConv2d<T>::TransposeConv2d(std::size_t in_channels, std::size_t out_channels,
                                    TransposeConvConfig cfg, bool with_bias, Rng& rng)
    : cfg_(cfg),
      // Each output pixel sees roughly in*kh*kw/(sh*sw) taps.
      weight_(kaiming_uniform<T>(Shape{in_channels, out_channels, cfg.kh, cfg.kw},
                                 std::max<std::size_t>(1, in_channels * cfg.kh * cfg.kw / (cfg.sh * cfg.sw)),
                                 rng)) {
  weight_.set_requires_grad(true);
  if (with_bias) {
    bias_ = Tensor<T>(Shape{1, out_channels, 1, 1});
    bias_->set_requires_grad(true);
  }
}

template <typename T>
Tensor<T> TransposeConv2d<T>::forward(const Tensor<T>& x) const {
  return transpose_conv2d(x, weight_, bias_, cfg_);
}

template <typename T>
void TransposeConv2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight_, true});
  if (bias_) out.push_back({prefix + ".bias", *bias_, true});
}

template <typename T>
AsymmetricConv2d<T>::AsymmetricConv2d(std::size_t channels, std::size_t k, bool with_bias, Rng& rng) {
  if (k % 2 == 0) contract_fail("asymmetric conv: kernel length must be odd, got " + std::to_string(k));
  vertical_ = Conv2d<T>(channels, channels, ConvConfig{k, 1, 1, 1, 1, 1, (k - 1) / 2, 0}, with_bias, rng);
  horizontal_ = Conv2d<T>(channels, channels, ConvConfig{1, k, 1, 1, 1, 1, 0, (k - 1) / 2}, with_bias, rng);
}

template <typename T>
Tensor<T> AsymmetricConv2d<T>::forward(const Tensor<T>& x) const {
  return horizontal_.forward(vertical_.forward(x));
}

template <typename T>
void AsymmetricConv2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  vertical_.collect(out, prefix + ".kx1");
  horizontal_.collect(out, prefix + ".1xk");
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, BatchNormConfig cfg)
    : cfg_(cfg),
      gamma_(Shape{1, channels, 1, 1}, T(1)),
      beta_(Shape{1, channels, 1, 1}, T(0)),
      running_mean_(Shape{1, channels, 1, 1}, T(0)),
      running_var_(Shape{1, channels, 1, 1}, T(1)) {
  gamma_.set_requires_grad(true);
  beta_.set_requires_grad(true);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, bool training) {
  return batch_norm(x, gamma_, beta_, running_mean_, running_var_, training, cfg_);
}

template <typename T>
void BatchNorm2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma_, true});
  out.push_back({prefix + ".beta", beta_, true});
  out.push_back({prefix + ".running_mean", running_mean_, false});
  out.push_back({prefix + ".running_var", running_var_, false});
}

template <typename T>
PReLU<T>::PReLU(std::size_t channels) : slope_(Shape{1, channels, 1, 1}, static_cast<T>(kInitialSlope)) {
  slope_.set_requires_grad(true);
}

template <typename T>
void PReLU<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".slope", slope_, true});
}

#define LITECD_INSTANTIATE(T)                                                                      \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&, \
                               const ConvConfig&);                                                 \
  template Tensor<T> dilated_conv2d<T>(const Tensor<T>&, const Tensor<T>&,                         \
                                       const std::optional<Tensor<T>>&, std::size_t);              \
  template Tensor<T> transpose_conv2d<T>(const Tensor<T>&, const Tensor<T>&,                       \
                                         const std::optional<Tensor<T>>&, const TransposeConvConfig&); \
  template Tensor<T> maxpool2d<T>(const Tensor<T>&);                                               \
  template Tensor<T> channel_zero_pad<T>(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> upsample_nearest<T>(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> prelu<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                   Tensor<T>&, Tensor<T>&, bool, const BatchNormConfig&);          \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, bool, Rng*);                             \
  template Tensor<T> softmax_channels<T>(const Tensor<T>&);                                        \
  template Tensor<T> kaiming_uniform<T>(Shape, std::size_t, Rng&);                                 \
  template class Conv2d<T>;                                                                        \
  template class TransposeConv2d<T>;                                                               \
  template class AsymmetricConv2d<T>;                                                              \
  template class BatchNorm2d<T>;                                                                   \
  template class PReLU<T>;

LITECD_INSTANTIATE(float)
LITECD_INSTANTIATE(double)

#undef LITECD_INSTANTIATE

}  // namespace litecd
