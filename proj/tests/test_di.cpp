#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "litecd/di.hpp"
#include "litecd/rng.hpp"

using namespace litecd;

namespace {

IntensityImage constant_image(std::size_t h, std::size_t w, float v) { return IntensityImage(h, w, v); }

IntensityImage random_image(std::size_t h, std::size_t w, Rng& rng) {
  IntensityImage img(h, w);
  for (auto& v : img.values) v = static_cast<float>(rng.uniform(0.0, 3.0));
  return img;
}

// Direct window-mean log-ratio with clamped indices.
double oracle_log_ratio(const IntensityImage& a, const IntensityImage& b, long y, long x) {
  double s1 = 0, s2 = 0;
  const long H = static_cast<long>(a.height), W = static_cast<long>(a.width);
  for (long dy = -1; dy <= 1; ++dy)
    for (long dx = -1; dx <= 1; ++dx) {
      const long yy = std::min(std::max(y + dy, 0L), H - 1), xx = std::min(std::max(x + dx, 0L), W - 1);
      s1 += a.at(yy, xx) + 1e-6;
      s2 += b.at(yy, xx) + 1e-6;
    }
  return std::fabs(std::log(s2 / 9.0) - std::log(s1 / 9.0));
}

}  // namespace

TEST(LogRatio, IdenticalImagesGiveZeroAndConstantFlag) {
  Rng rng(1);
  const auto img = random_image(20, 24, rng);
  const auto res = neighborhood_log_ratio(img, img);
  EXPECT_TRUE(res.constant);
  for (float v : res.image.values) EXPECT_EQ(v, 0.0f);
}

TEST(LogRatio, FlatRegionsGiveUnitRawValue) {
  const auto a = constant_image(8, 8, 1.0f);
  const auto b = constant_image(8, 8, static_cast<float>(std::exp(1.0)));
  for (double v : neighborhood_log_ratio_raw(a, b)) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(LogRatio, MatchesDirectOracleAndIsSymmetric) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const auto a = random_image(17, 13, rng);
    const auto b = random_image(17, 13, rng);
    const auto raw = neighborhood_log_ratio_raw(a, b);
    for (long y = 0; y < 17; ++y)
      for (long x = 0; x < 13; ++x) ASSERT_NEAR(raw[y * 13 + x], oracle_log_ratio(a, b, y, x), 1e-9);
    const auto ab = neighborhood_log_ratio(a, b);
    const auto ba = neighborhood_log_ratio(b, a);
    EXPECT_EQ(ab.image.values, ba.image.values);
    const auto [lo, hi] = std::minmax_element(ab.image.values.begin(), ab.image.values.end());
    EXPECT_EQ(*lo, 0.0f);
    EXPECT_EQ(*hi, 1.0f);
  }
}

TEST(LogRatio, Contracts) {
  EXPECT_THROW(neighborhood_log_ratio(constant_image(4, 4, 1), constant_image(4, 5, 1)), ContractViolation);
  auto bad = constant_image(4, 4, 1);
  bad.values[3] = -1.0f;
  EXPECT_THROW(neighborhood_log_ratio(bad, constant_image(4, 4, 1)), ContractViolation);
  bad.values[3] = NAN;
  EXPECT_THROW(neighborhood_log_ratio(bad, constant_image(4, 4, 1)), ContractViolation);
  // Zero intensities are floored rather than rejected.
  EXPECT_NO_THROW(neighborhood_log_ratio(constant_image(4, 4, 0), constant_image(4, 4, 1)));
}

TEST(Patches, GridCountFor64x64Region) {
  const auto origins = grid_origins(Rect{0, 0, 64, 64}, 8);
  EXPECT_EQ(origins.size(), 25u);
  // Enumeration oracle.
  std::size_t count = 0;
  for (std::size_t y = 0; y + 32 <= 64; y += 8)
    for (std::size_t x = 0; x + 32 <= 64; x += 8) ++count;
  EXPECT_EQ(count, 25u);
}

TEST(Patches, AllZeroMaskSetsFlag) {
  const DifferenceImage di(64, 64, 0.5f);
  const ChangeMask mask(64, 64, 0);
  const auto set = extract_training_patches(di, mask, Rect{0, 0, 64, 64});
  EXPECT_TRUE(set.no_changed_pixels);
  EXPECT_EQ(set.patches.size(), 25u);
  for (const auto& p : set.patches) EXPECT_FALSE(p.has_change());
}

TEST(Patches, RebalancedAndInsideRegion) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    sc.height = 128;
    sc.width = 160;
    const Scene s = synth_scene(sc);
    const auto di = neighborhood_log_ratio(s.i1, s.i2).image;
    const Rect region{10, 20, 70, 120};
    SamplingConfig cfg;
    cfg.seed = seed;
    const auto set = extract_training_patches(di, s.mask, region, cfg);
    ASSERT_FALSE(set.patches.empty());
    std::size_t changed = 0;
    for (const auto& p : set.patches) {
      ASSERT_GE(p.origin_y, region.y);
      ASSERT_GE(p.origin_x, region.x);
      ASSERT_LE(p.origin_y + 32, region.y + region.height);
      ASSERT_LE(p.origin_x + 32, region.x + region.width);
      ASSERT_EQ(p.di.size(), 1024u);
      for (std::size_t i = 0; i < 1024; ++i) {
        ASSERT_EQ(p.di[i], di.at(p.origin_y + i / 32, p.origin_x + i % 32));
        ASSERT_EQ(p.labels[i], s.mask.at(p.origin_y + i / 32, p.origin_x + i % 32));
      }
      changed += p.has_change();
    }
    if (!set.no_changed_pixels)
      EXPECT_GE(static_cast<double>(changed), 0.3 * static_cast<double>(set.patches.size()));
    // The first grid_patches entries are exactly the stride-8 grid.
    const auto grid = grid_origins(region, 8);
    ASSERT_EQ(set.grid_patches, grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_EQ(set.patches[i].origin_y, grid[i].first);
      EXPECT_EQ(set.patches[i].origin_x, grid[i].second);
    }
  }
}

TEST(Patches, Contracts) {
  const DifferenceImage di(64, 64, 0.0f);
  const ChangeMask mask(64, 64, 0);
  EXPECT_THROW(extract_training_patches(di, mask, Rect{0, 0, 0, 0}), ContractViolation);
  EXPECT_THROW(extract_training_patches(di, mask, Rect{40, 0, 30, 64}), ContractViolation);
  EXPECT_THROW(extract_training_patches(di, mask, Rect{0, 0, 31, 64}), ContractViolation);
  EXPECT_THROW(extract_training_patches(di, ChangeMask(64, 63, 0), Rect{0, 0, 64, 63}), ContractViolation);
}

TEST(Tiling, CoversFrameWithFlushEdges) {
  for (auto [h, w, stride] : {std::tuple{32u, 32u, 16u}, {100u, 70u, 16u}, {64u, 64u, 32u}, {33u, 90u, 7u}}) {
    const auto origins = tile_origins(h, w, stride);
    std::vector<int> cover(h * w, 0);
    for (auto [y, x] : origins) {
      ASSERT_LE(y + 32, h);
      ASSERT_LE(x + 32, w);
      for (std::size_t dy = 0; dy < 32; ++dy)
        for (std::size_t dx = 0; dx < 32; ++dx) cover[(y + dy) * w + x + dx] = 1;
    }
    for (int c : cover) ASSERT_EQ(c, 1);
  }
  EXPECT_EQ(tile_origins(32, 32, 16).size(), 1u);
  EXPECT_THROW(tile_origins(31, 40, 16), ContractViolation);
  EXPECT_THROW(tile_origins(64, 64, 33), ContractViolation);
}

TEST(Stitch, SinglePatchIsArgmax) {
  Rng rng(3);
  PatchScores p;
  p.scores.resize(2048);
  for (auto& v : p.scores) v = static_cast<float>(rng.uniform(-3, 3));
  const auto res = stitch_change_map({p}, 32, 32);
  for (std::size_t i = 0; i < 1024; ++i) EXPECT_EQ(res.mask.values[i], p.scores[1024 + i] > p.scores[i] ? 1 : 0);
}

TEST(Stitch, OverlappingPatchesAverageProbabilities) {
  // Class-1 probability 0.4 from the first patch and 0.8 from the second.
  auto patch = [](std::size_t x0, double p1) {
    PatchScores p;
    p.origin_x = x0;
    p.scores.assign(2048, 0.0f);
    for (std::size_t i = 0; i < 1024; ++i) p.scores[1024 + i] = static_cast<float>(std::log(p1 / (1 - p1)));
    return p;
  };
  const auto res = stitch_change_map({patch(0, 0.4), patch(16, 0.8)}, 32, 48);
  EXPECT_EQ(res.mask.at(0, 0), 0);
  EXPECT_NEAR(res.probability[20], 0.6, 1e-6);
  EXPECT_EQ(res.mask.at(0, 20), 1);
  EXPECT_EQ(res.mask.at(0, 40), 1);
}

TEST(Stitch, NonOverlappingTilingReproducesPerPatchArgmax) {
  Rng rng(5);
  std::vector<PatchScores> patches;
  for (auto [y, x] : tile_origins(64, 64, 32)) {
    PatchScores p;
    p.origin_y = y;
    p.origin_x = x;
    p.scores.resize(2048);
    for (auto& v : p.scores) v = static_cast<float>(rng.uniform(-3, 3));
    patches.push_back(p);
  }
  const auto res = stitch_change_map(patches, 64, 64);
  for (const auto& p : patches)
    for (std::size_t i = 0; i < 1024; ++i)
      ASSERT_EQ(res.mask.at(p.origin_y + i / 32, p.origin_x + i % 32), p.scores[1024 + i] > p.scores[i] ? 1 : 0);
}

TEST(Stitch, UncoveredPixelNamesCoordinates) {
  PatchScores p;
  p.scores.assign(2048, 0.0f);
  try {
    stitch_change_map({p}, 32, 40);
    FAIL() << "expected a contract violation";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("(0,32)"), std::string::npos) << e.what();
  }
}

TEST(Synth, DeterministicPerSeed) {
  SynthConfig cfg;
  cfg.seed = 7;
  const Scene a = synth_scene(cfg), b = synth_scene(cfg);
  EXPECT_EQ(a.i1.values, b.i1.values);
  EXPECT_EQ(a.i2.values, b.i2.values);
  EXPECT_EQ(a.mask.values, b.mask.values);
  cfg.seed = 8;
  EXPECT_NE(synth_scene(cfg).mask.values, a.mask.values);
}

TEST(Synth, ChangeFractionWithinBand) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Scene s = synth_scene(cfg);
    std::size_t changed = 0;
    for (auto v : s.mask.values) changed += v != 0;  // counting oracle
    const double f = static_cast<double>(changed) / (256.0 * 256.0);
    EXPECT_DOUBLE_EQ(f, change_fraction(s.mask));
    EXPECT_GE(f, 0.05) << seed;
    EXPECT_LE(f, 0.20) << seed;
  }
}

TEST(Synth, ChangedRegionsScaleByContrast) {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.contrast = 3.0;
  const Scene s = synth_scene(cfg);
  for (std::size_t i = 0; i < s.mask.size(); ++i) {
    const double ratio = s.reflectivity2.values[i] / s.reflectivity1.values[i];
    ASSERT_NEAR(ratio, s.mask.values[i] ? 3.0 : 1.0, 1e-5);
  }
}

TEST(Synth, HighLooksSpeckleVanishes) {
  SynthConfig cfg;
  cfg.seed = 2;
  cfg.looks = 10000;
  const Scene s = synth_scene(cfg);
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < s.i1.size(); ++i) {
    const double n = s.i1.values[i] / s.reflectivity1.values[i];
    sum += n;
    sq += n * n;
  }
  const double N = static_cast<double>(s.i1.size());
  const double var = sq / N - (sum / N) * (sum / N);
  EXPECT_LT(var, 1e-3);
  EXPECT_NEAR(sum / N, 1.0, 1e-3);
}

TEST(Synth, SingleLookSpeckleHasUnitVariance) {
  SynthConfig cfg;
  cfg.seed = 2;
  cfg.looks = 1;
  const Scene s = synth_scene(cfg);
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < s.i2.size(); ++i) {
    const double n = s.i2.values[i] / s.reflectivity2.values[i];
    EXPECT_GE(n, 0.0);
    sum += n;
    sq += n * n;
  }
  const double N = static_cast<double>(s.i2.size());
  EXPECT_NEAR(sum / N, 1.0, 0.02);
  EXPECT_NEAR(sq / N - (sum / N) * (sum / N), 1.0, 0.05);
}

TEST(Synth, ChangedPixelsHaveHigherDifference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.contrast = 2.0;
    cfg.looks = 2;
    const Scene s = synth_scene(cfg);
    const auto di = neighborhood_log_ratio(s.i1, s.i2).image;
    double in = 0, out = 0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t i = 0; i < di.size(); ++i) {
      if (s.mask.values[i]) {
        in += di.values[i];
        ++nin;
      } else {
        out += di.values[i];
        ++nout;
      }
    }
    EXPECT_GT(in / nin, out / nout) << seed;
  }
}

TEST(Synth, Contracts) {
  SynthConfig cfg;
  cfg.looks = 0;
  EXPECT_THROW(synth_scene(cfg), ContractViolation);
  cfg = {};
  cfg.contrast = 1.0;
  EXPECT_THROW(synth_scene(cfg), ContractViolation);
  cfg = {};
  cfg.height = 16;
  EXPECT_THROW(synth_scene(cfg), ContractViolation);
}

TEST(Otsu, SeparatesBimodalValues) {
  std::vector<float> v;
  for (int i = 0; i < 500; ++i) v.push_back(0.1f + 0.0001f * i);
  for (int i = 0; i < 100; ++i) v.push_back(0.8f + 0.0001f * i);
  const double t = otsu_threshold(v);
  EXPECT_GT(t, 0.15);
  EXPECT_LT(t, 0.8);
  DifferenceImage di(1, 600);
  di.values = v;
  const auto m = threshold_map(di, t);
  for (std::size_t i = 0; i < 600; ++i) EXPECT_EQ(m.values[i], i >= 500 ? 1 : 0);
}

TEST(Crop, CopiesRectangle) {
  ChangeMask m(4, 5, 0);
  m.at(2, 3) = 1;
  const auto c = crop(m, Rect{1, 2, 2, 3});
  EXPECT_EQ(c.height, 2u);
  EXPECT_EQ(c.width, 3u);
  EXPECT_EQ(c.at(1, 1), 1);
  EXPECT_THROW(crop(m, Rect{3, 0, 2, 5}), ContractViolation);
}
