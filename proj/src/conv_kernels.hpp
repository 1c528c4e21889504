#pragma once

// im2row / row2im kernels shared by conv2d and transpose_conv2d.
//
// The "image side" is a C x H x W plane stack; the "patch side" is the grid of
// Ho x Wo window positions. rows[p * K + k] holds the image sample that tap k
// (ci, ky, kx) of window p reads, or zero when the tap falls in the padding.

#include <cstddef>
#include <vector>

namespace litecd::kernels {

struct Geometry {
  std::size_t channels, height, width;  // image side
  std::size_t kh, kw, sh, sw, dh, dw, ph, pw;
  std::size_t out_h, out_w;  // patch side

  std::size_t taps() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

template <typename T>
void im2row(const T* image, const Geometry& g, T* rows) {
  const std::size_t K = g.taps();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      T* row = rows + (oy * g.out_w + ox) * K;
      std::size_t k = 0;
      for (std::size_t c = 0; c < g.channels; ++c) {
        const T* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = static_cast<long>(oy * g.sh + ky * g.dh) - static_cast<long>(g.ph);
          const bool row_ok = iy >= 0 && iy < static_cast<long>(g.height);
          for (std::size_t kx = 0; kx < g.kw; ++kx, ++k) {
            const long ix = static_cast<long>(ox * g.sw + kx * g.dw) - static_cast<long>(g.pw);
            row[k] = (row_ok && ix >= 0 && ix < static_cast<long>(g.width))
                         ? plane[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)]
                         : T(0);
          }
        }
      }
    }
  }
}

// image[...] += rows scattered back through the same tap mapping.
inline void row2im_add(const double* rows, const Geometry& g, double* image) {
  const std::size_t K = g.taps();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const double* row = rows + (oy * g.out_w + ox) * K;
      std::size_t k = 0;
      for (std::size_t c = 0; c < g.channels; ++c) {
        double* plane = image + c * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = static_cast<long>(oy * g.sh + ky * g.dh) - static_cast<long>(g.ph);
          const bool row_ok = iy >= 0 && iy < static_cast<long>(g.height);
          for (std::size_t kx = 0; kx < g.kw; ++kx, ++k) {
            const long ix = static_cast<long>(ox * g.sw + kx * g.dw) - static_cast<long>(g.pw);
            if (row_ok && ix >= 0 && ix < static_cast<long>(g.width))
              plane[static_cast<std::size_t>(iy) * g.width + static_cast<std::size_t>(ix)] += row[k];
          }
        }
      }
    }
  }
}

// Fixed-order dot product with four double lanes.
template <typename T>
inline double dot(const T* a, const T* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return (s0 + s1) + (s2 + s3);
}

// acc[i] += alpha * x[i]
template <typename T>
inline void axpy(double alpha, const T* x, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += alpha * static_cast<double>(x[i]);
}

}  // namespace litecd::kernels
