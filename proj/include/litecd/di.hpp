#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "litecd/errors.hpp"

namespace litecd {

/// Row-major single-band grid. The tag keeps intensity, difference and mask
/// rasters from being mixed up.
template <typename Tag, typename V>
struct Raster {
  using value_type = V;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<V> values;

  Raster() = default;
  Raster(std::size_t h, std::size_t w, V fill = V{}) : height(h), width(w), values(h * w, fill) {}

  V& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  const V& at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t size() const { return values.size(); }
};

struct IntensityTag {};
struct DifferenceTag {};
struct MaskTag {};

/// Non-negative backscatter intensities.
using IntensityImage = Raster<IntensityTag, float>;
/// Change evidence normalized to [0, 1].
using DifferenceImage = Raster<DifferenceTag, float>;
/// 0 = unchanged, 1 = changed.
using ChangeMask = Raster<MaskTag, std::uint8_t>;

struct Rect {
  std::size_t y = 0, x = 0, height = 0, width = 0;
};

inline constexpr std::size_t kPatchSize = 32;
inline constexpr double kIntensityFloor = 1e-6;

// ---------------------------------------------------------------------------
// Difference image

/// |log mu2 - log mu1| with mu the window mean (edge replicated) of the
/// epsilon-floored intensities. Not normalized.
std::vector<double> neighborhood_log_ratio_raw(const IntensityImage& i1, const IntensityImage& i2,
                                               std::size_t window = 3);

struct LogRatioResult {
  DifferenceImage image;
  bool constant = false;  // max == min; image is all zeros
};

/// Raw log-ratio min-max normalized to [0, 1] over the image.
LogRatioResult neighborhood_log_ratio(const IntensityImage& i1, const IntensityImage& i2,
                                      std::size_t window = 3);

// ---------------------------------------------------------------------------
// Patches

struct Patch {
  std::size_t origin_y = 0;
  std::size_t origin_x = 0;
  std::vector<float> di;              // kPatchSize^2
  std::vector<std::uint8_t> labels;   // kPatchSize^2

  bool has_change() const;
};

struct PatchSet {
  std::vector<Patch> patches;
  std::size_t grid_patches = 0;  // before rebalancing
  bool no_changed_pixels = false;
};

struct SamplingConfig {
  std::size_t stride = 8;
  double balance = 0.3;   // minimum fraction of patches containing a changed pixel
  std::size_t jitter = 8; // max offset of oversampled copies, pixels
  std::uint64_t seed = 0;
};

/// Default training region: the top `fraction` of rows, full width.
Rect top_rows_region(std::size_t height, std::size_t width, double fraction = 0.3);

/// Origins of a stride grid of kPatchSize windows inside region.
std::vector<std::pair<std::size_t, std::size_t>> grid_origins(const Rect& region, std::size_t stride);

/// Stride grid inside region, then changed-patch oversampling (jittered copies
/// that stay inside the region) until `balance` of patches contain change.
PatchSet extract_training_patches(const DifferenceImage& di, const ChangeMask& mask, const Rect& region,
                                  const SamplingConfig& cfg = {});

// ---------------------------------------------------------------------------
// Inference tiling

/// Tile origins covering an H x W frame with kPatchSize windows; the last row
/// and column of tiles are flush with the frame edge.
std::vector<std::pair<std::size_t, std::size_t>> tile_origins(std::size_t height, std::size_t width,
                                                              std::size_t stride);

struct PatchScores {
  std::size_t origin_y = 0;
  std::size_t origin_x = 0;
  std::vector<float> scores;  // 2 x kPatchSize x kPatchSize class scores
};

struct StitchResult {
  ChangeMask mask;
  std::vector<float> probability;  // mean class-1 probability per pixel
};

/// Averages the class-1 softmax probability over covering patches; a pixel
/// is changed iff the mean exceeds 0.5. Throws on uncovered pixels.
StitchResult stitch_change_map(const std::vector<PatchScores>& patches, std::size_t height,
                               std::size_t width);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t height = 256;
  std::size_t width = 256;
  std::size_t looks = 4;
  double contrast = 4.0;
  double min_change_fraction = 0.05;
  double max_change_fraction = 0.20;
};

struct Scene {
  IntensityImage i1, i2;
  ChangeMask mask;
  IntensityImage reflectivity1, reflectivity2;  // noise-free
};

/// Piecewise-constant reflectivity (rectangles, ellipses, lines), changed
/// regions scaled by `contrast` in the second acquisition, independent
/// mean-one gamma speckle with shape `looks` on each image.
Scene synth_scene(const SynthConfig& cfg);

double change_fraction(const ChangeMask& mask);

// ---------------------------------------------------------------------------
// Thresholding baseline

/// Otsu threshold over a 256-bin histogram of values in [0, 1].
double otsu_threshold(const std::vector<float>& values);

ChangeMask threshold_map(const DifferenceImage& di, double threshold);

/// Copies a rectangle out of a raster.
template <typename Tag, typename V>
Raster<Tag, V> crop(const Raster<Tag, V>& src, const Rect& r) {
  require(r.height >= 1 && r.width >= 1 && r.y + r.height <= src.height && r.x + r.width <= src.width,
          "crop: rectangle outside the raster");
  Raster<Tag, V> out(r.height, r.width);
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t x = 0; x < r.width; ++x) out.at(y, x) = src.at(r.y + y, r.x + x);
  return out;
}

}  // namespace litecd
