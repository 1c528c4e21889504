#include "litecd/di.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "litecd/rng.hpp"

namespace litecd {

// ---------------------------------------------------------------------------
// Difference image

namespace {

std::vector<double> window_means(const IntensityImage& img, std::size_t window) {
  const long H = static_cast<long>(img.height), W = static_cast<long>(img.width);
  const long r = static_cast<long>(window / 2);
  const double area = static_cast<double>(window * window);
  std::vector<double> out(img.size());
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double acc = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        const long yy = std::clamp(y + dy, 0L, H - 1);
        for (long dx = -r; dx <= r; ++dx) {
          const long xx = std::clamp(x + dx, 0L, W - 1);
          acc += static_cast<double>(img.values[static_cast<std::size_t>(yy * W + xx)]) + kIntensityFloor;
        }
      }
      out[static_cast<std::size_t>(y * W + x)] = acc / area;
    }
  return out;
}

void check_intensities(const IntensityImage& img, const char* which) {
  require(img.height >= 1 && img.width >= 1 && img.values.size() == img.height * img.width,
          std::string(which) + ": malformed image");
  for (float v : img.values)
    if (!(v >= 0.0f) || !std::isfinite(v))
      contract_fail(std::string(which) + ": intensities must be finite and non-negative");
}

}  // namespace

std::vector<double> neighborhood_log_ratio_raw(const IntensityImage& i1, const IntensityImage& i2,
                                               std::size_t window) {
  if (i1.height != i2.height || i1.width != i2.width)
    contract_fail("log-ratio: image sizes differ (" + std::to_string(i1.height) + "x" +
                  std::to_string(i1.width) + " vs " + std::to_string(i2.height) + "x" +
                  std::to_string(i2.width) + ")");
  require(window >= 1 && window % 2 == 1, "log-ratio: window must be odd");
  check_intensities(i1, "log-ratio i1");
  check_intensities(i2, "log-ratio i2");
  const auto m1 = window_means(i1, window);
  const auto m2 = window_means(i2, window);
  std::vector<double> d(m1.size());
  // Difference of logs rather than log of a ratio keeps the operator exactly symmetric.
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::fabs(std::log(m2[i]) - std::log(m1[i]));
  return d;
}

LogRatioResult neighborhood_log_ratio(const IntensityImage& i1, const IntensityImage& i2,
                                      std::size_t window) {
  const auto raw = neighborhood_log_ratio_raw(i1, i2, window);
  LogRatioResult res;
  res.image = DifferenceImage(i1.height, i1.width, 0.0f);
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  if (*hi == *lo) {
    res.constant = true;
    return res;
  }
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < raw.size(); ++i)
    res.image.values[i] = static_cast<float>((raw[i] - *lo) / span);
  return res;
}

// ---------------------------------------------------------------------------
// Patches

bool Patch::has_change() const {
  return std::any_of(labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; });
}

Rect top_rows_region(std::size_t height, std::size_t width, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "training region fraction must be in (0, 1]");
  return Rect{0, 0, static_cast<std::size_t>(std::floor(static_cast<double>(height) * fraction)), width};
}

std::vector<std::pair<std::size_t, std::size_t>> grid_origins(const Rect& region, std::size_t stride) {
  require(stride >= 1, "grid stride must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (region.height < kPatchSize || region.width < kPatchSize) return out;
  for (std::size_t y = region.y; y + kPatchSize <= region.y + region.height; y += stride)
    for (std::size_t x = region.x; x + kPatchSize <= region.x + region.width; x += stride)
      out.emplace_back(y, x);
  return out;
}

namespace {

Patch cut_patch(const DifferenceImage& di, const ChangeMask& mask, std::size_t y0, std::size_t x0) {
  Patch p;
  p.origin_y = y0;
  p.origin_x = x0;
  p.di.resize(kPatchSize * kPatchSize);
  p.labels.resize(kPatchSize * kPatchSize);
  for (std::size_t y = 0; y < kPatchSize; ++y)
    for (std::size_t x = 0; x < kPatchSize; ++x) {
      p.di[y * kPatchSize + x] = di.at(y0 + y, x0 + x);
      p.labels[y * kPatchSize + x] = mask.at(y0 + y, x0 + x);
    }
  return p;
}

std::size_t clamp_origin(long v, std::size_t lo, std::size_t extent) {
  const long hi = static_cast<long>(lo + extent - kPatchSize);
  return static_cast<std::size_t>(std::clamp(v, static_cast<long>(lo), hi));
}

}  // namespace

PatchSet extract_training_patches(const DifferenceImage& di, const ChangeMask& mask, const Rect& region,
                                  const SamplingConfig& cfg) {
  require(di.height == mask.height && di.width == mask.width,
          "patch extraction: difference image and mask sizes differ");
  require(region.height >= 1 && region.width >= 1, "patch extraction: empty region");
  require(region.y + region.height <= di.height && region.x + region.width <= di.width,
          "patch extraction: region exceeds the image");
  require(region.height >= kPatchSize && region.width >= kPatchSize,
          "patch extraction: region smaller than one 32x32 patch");
  require(cfg.balance >= 0.0 && cfg.balance < 1.0, "patch extraction: balance must be in [0, 1)");

  PatchSet set;
  for (auto [y, x] : grid_origins(region, cfg.stride)) set.patches.push_back(cut_patch(di, mask, y, x));
  set.grid_patches = set.patches.size();

  std::vector<std::pair<std::size_t, std::size_t>> changed_pixels;
  for (std::size_t y = region.y; y < region.y + region.height; ++y)
    for (std::size_t x = region.x; x < region.x + region.width; ++x)
      if (mask.at(y, x)) changed_pixels.emplace_back(y, x);
  if (changed_pixels.empty()) {
    set.no_changed_pixels = true;
    return set;
  }

  std::vector<std::pair<long, long>> seeds;
  for (const auto& p : set.patches)
    if (p.has_change()) seeds.emplace_back(static_cast<long>(p.origin_y), static_cast<long>(p.origin_x));
  if (seeds.empty())
    for (auto [y, x] : changed_pixels)
      seeds.emplace_back(static_cast<long>(y) - 16, static_cast<long>(x) - 16);

  std::size_t changed = static_cast<std::size_t>(
      std::count_if(set.patches.begin(), set.patches.end(), [](const Patch& p) { return p.has_change(); }));
  Rng rng(cfg.seed);
  const long j = static_cast<long>(cfg.jitter);
  std::size_t attempts = 0;
  const std::size_t max_attempts = 100 * (set.patches.size() + 1);
  while (static_cast<double>(changed) < cfg.balance * static_cast<double>(set.patches.size()) &&
         attempts++ < max_attempts) {
    const auto [sy, sx] = seeds[rng.index(seeds.size())];
    const std::size_t y = clamp_origin(sy + rng.integer(-j, j), region.y, region.height);
    const std::size_t x = clamp_origin(sx + rng.integer(-j, j), region.x, region.width);
    Patch p = cut_patch(di, mask, y, x);
    if (!p.has_change()) continue;
    set.patches.push_back(std::move(p));
    ++changed;
  }
  return set;
}

// ---------------------------------------------------------------------------
// Tiling and stitching

std::vector<std::pair<std::size_t, std::size_t>> tile_origins(std::size_t height, std::size_t width,
                                                              std::size_t stride) {
  require(height >= kPatchSize && width >= kPatchSize, "tiling: frame smaller than one 32x32 patch");
  require(stride >= 1 && stride <= kPatchSize, "tiling: stride must be in [1, 32]");
  auto axis = [stride](std::size_t extent) {
    std::vector<std::size_t> v;
    for (std::size_t o = 0; o + kPatchSize <= extent; o += stride) v.push_back(o);
    if (v.back() + kPatchSize < extent) v.push_back(extent - kPatchSize);
    return v;
  };
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t y : axis(height))
    for (std::size_t x : axis(width)) out.emplace_back(y, x);
  return out;
}

StitchResult stitch_change_map(const std::vector<PatchScores>& patches, std::size_t height,
                               std::size_t width) {
  require(height >= 1 && width >= 1, "stitch: empty frame");
  const std::size_t P = kPatchSize * kPatchSize;
  std::vector<double> prob(height * width, 0.0);
  std::vector<std::uint32_t> hits(height * width, 0);
  for (const auto& p : patches) {
    require(p.scores.size() == 2 * P, "stitch: patch scores must be 2x32x32");
    require(p.origin_y + kPatchSize <= height && p.origin_x + kPatchSize <= width,
            "stitch: patch at (" + std::to_string(p.origin_y) + "," + std::to_string(p.origin_x) +
                ") exceeds the frame");
    for (std::size_t y = 0; y < kPatchSize; ++y)
      for (std::size_t x = 0; x < kPatchSize; ++x) {
        const double s0 = p.scores[y * kPatchSize + x];
        const double s1 = p.scores[P + y * kPatchSize + x];
        const std::size_t idx = (p.origin_y + y) * width + p.origin_x + x;
        prob[idx] += 1.0 / (1.0 + std::exp(s0 - s1));
        ++hits[idx];
      }
  }
  StitchResult res;
  res.mask = ChangeMask(height, width, 0);
  res.probability.resize(height * width);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (hits[i] == 0)
      contract_fail("stitch: pixel (" + std::to_string(i / width) + "," + std::to_string(i % width) +
                    ") is not covered by any patch");
    const double mean = prob[i] / hits[i];
    res.probability[i] = static_cast<float>(mean);
    res.mask.values[i] = mean > 0.5 ? 1 : 0;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

enum class ShapeKind { Rectangle, Ellipse, Line };

// Rasterizes a random shape; calls paint(y, x) for every covered pixel.
template <typename Paint>
void draw_shape(Rng& rng, std::size_t H, std::size_t W, double cy, double cx, double scale, ShapeKind kind,
                Paint&& paint) {
  const double dim = static_cast<double>(std::min(H, W));
  switch (kind) {
    case ShapeKind::Rectangle: {
      const double hh = rng.uniform(0.03, 0.10) * dim * scale;
      const double hw = rng.uniform(0.03, 0.10) * dim * scale;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          if (std::fabs(static_cast<double>(y) - cy) <= hh && std::fabs(static_cast<double>(x) - cx) <= hw)
            paint(y, x);
      break;
    }
    case ShapeKind::Ellipse: {
      const double ry = rng.uniform(0.03, 0.11) * dim * scale;
      const double rx = rng.uniform(0.03, 0.11) * dim * scale;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double u = (static_cast<double>(y) - cy) / ry, v = (static_cast<double>(x) - cx) / rx;
          if (u * u + v * v <= 1.0) paint(y, x);
        }
      break;
    }
    case ShapeKind::Line: {
      const double angle = rng.uniform(0.0, std::numbers::pi);
      const double half_len = rng.uniform(0.15, 0.35) * dim * scale;
      const double half_thick = rng.uniform(1.0, 2.5);
      const double dy = std::sin(angle), dx = std::cos(angle);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double ry = static_cast<double>(y) - cy, rx = static_cast<double>(x) - cx;
          const double along = ry * dy + rx * dx;
          const double across = -ry * dx + rx * dy;
          if (std::fabs(along) <= half_len && std::fabs(across) <= half_thick) paint(y, x);
        }
      break;
    }
  }
}

ShapeKind pick_kind(Rng& rng) {
  const double u = rng.uniform();
  return u < 0.4 ? ShapeKind::Rectangle : (u < 0.8 ? ShapeKind::Ellipse : ShapeKind::Line);
}

}  // namespace

double change_fraction(const ChangeMask& mask) {
  if (mask.values.empty()) return 0.0;
  const auto n = std::count_if(mask.values.begin(), mask.values.end(), [](std::uint8_t v) { return v != 0; });
  return static_cast<double>(n) / static_cast<double>(mask.values.size());
}

Scene synth_scene(const SynthConfig& cfg) {
  require(cfg.height >= kPatchSize && cfg.width >= kPatchSize, "synth: scene must be at least 32x32");
  require(cfg.looks >= 1, "synth: looks must be >= 1");
  require(cfg.contrast > 1.0, "synth: contrast must be > 1");
  require(cfg.min_change_fraction > 0.0 && cfg.min_change_fraction < cfg.max_change_fraction &&
              cfg.max_change_fraction < 1.0,
          "synth: change fraction band must satisfy 0 < min < max < 1");

  const std::size_t H = cfg.height, W = cfg.width;
  Rng rng(cfg.seed);
  Scene scene;
  scene.reflectivity1 = IntensityImage(H, W, static_cast<float>(rng.uniform(0.3, 0.8)));

  auto log_uniform = [&](double lo, double hi) { return std::exp(rng.uniform(std::log(lo), std::log(hi))); };

  const std::size_t background_shapes = 6 + (H * W) / 4096;
  for (std::size_t i = 0; i < background_shapes; ++i) {
    const float level = static_cast<float>(log_uniform(0.05, 1.0));
    const double cy = rng.uniform(0.0, static_cast<double>(H));
    const double cx = rng.uniform(0.0, static_cast<double>(W));
    draw_shape(rng, H, W, cy, cx, 1.5, pick_kind(rng),
               [&](std::size_t y, std::size_t x) { scene.reflectivity1.at(y, x) = level; });
  }

  // Changed regions: placed round-robin across three horizontal bands so every
  // part of the frame (including a top-rows training split) sees change.
  scene.mask = ChangeMask(H, W, 0);
  const double lo = cfg.min_change_fraction, hi = cfg.max_change_fraction;
  const double target = rng.uniform(lo + 0.4 * (hi - lo), hi - 0.3 * (hi - lo));
  const std::size_t total = H * W;
  std::size_t changed = 0;
  std::size_t band = 0;
  double scale = 1.0;
  for (std::size_t attempt = 0; static_cast<double>(changed) < target * static_cast<double>(total); ++attempt) {
    if (attempt > 0 && attempt % 200 == 0) scale *= 0.7;
    if (attempt > 5000) contract_fail("synth: could not reach the requested change fraction");
    const double band_h = static_cast<double>(H) / 3.0;
    const double cy = rng.uniform(band_h * static_cast<double>(band), band_h * static_cast<double>(band + 1));
    const double cx = rng.uniform(0.0, static_cast<double>(W));
    std::vector<std::size_t> fresh;
    draw_shape(rng, H, W, cy, cx, scale, pick_kind(rng), [&](std::size_t y, std::size_t x) {
      if (!scene.mask.at(y, x)) fresh.push_back(y * W + x);
    });
    if (fresh.empty() || static_cast<double>(changed + fresh.size()) > hi * static_cast<double>(total))
      continue;
    for (std::size_t idx : fresh) scene.mask.values[idx] = 1;
    changed += fresh.size();
    band = (band + 1) % 3;
  }

  scene.reflectivity2 = scene.reflectivity1;
  for (std::size_t i = 0; i < total; ++i)
    if (scene.mask.values[i]) scene.reflectivity2.values[i] *= static_cast<float>(cfg.contrast);

  // Mean-one gamma speckle: shape = looks, scale = 1 / looks.
  std::gamma_distribution<double> speckle(static_cast<double>(cfg.looks), 1.0 / static_cast<double>(cfg.looks));
  scene.i1 = IntensityImage(H, W);
  scene.i2 = IntensityImage(H, W);
  for (std::size_t i = 0; i < total; ++i)
    scene.i1.values[i] = static_cast<float>(scene.reflectivity1.values[i] * speckle(rng.engine()));
  for (std::size_t i = 0; i < total; ++i)
    scene.i2.values[i] = static_cast<float>(scene.reflectivity2.values[i] * speckle(rng.engine()));
  return scene;
}

// ---------------------------------------------------------------------------
// Thresholding baseline

double otsu_threshold(const std::vector<float>& values) {
  require(!values.empty(), "otsu: no values");
  constexpr std::size_t kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  for (float v : values) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    hist[std::min(kBins - 1, static_cast<std::size_t>(c * kBins))] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (std::size_t i = 0; i < kBins; ++i) sum_all += static_cast<double>(i) * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  std::size_t best_bin = 0;
  for (std::size_t t = 0; t < kBins; ++t) {
    w0 += hist[t];
    sum0 += static_cast<double>(t) * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  return static_cast<double>(best_bin + 1) / static_cast<double>(kBins);
}

ChangeMask threshold_map(const DifferenceImage& di, double threshold) {
  ChangeMask m(di.height, di.width, 0);
  for (std::size_t i = 0; i < di.values.size(); ++i) m.values[i] = di.values[i] > threshold ? 1 : 0;
  return m;
}

}  // namespace litecd
