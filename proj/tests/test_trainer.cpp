#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "litecd/trainer.hpp"
#include "test_util.hpp"

using namespace litecd;
using namespace litecd::testing;

namespace {

// Scalar per-pixel reference for the softmax cross-entropy.
double oracle_loss(const Tensor<double>& scores, const Tensor<double>& labels) {
  const Shape s = scores.shape();
  double total = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        const double a = scores.at(n, 0, y, x), b = scores.at(n, 1, y, x);
        const double p1 = std::exp(b) / (std::exp(a) + std::exp(b));
        const double p = labels.at(n, 0, y, x) != 0 ? p1 : 1 - p1;
        total -= std::log(std::min(std::max(p, 1e-7), 1 - 1e-7));
      }
  return total / static_cast<double>(s.n * s.h * s.w);
}

PatchSet small_patch_set(std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  sc.height = 96;
  sc.width = 96;
  const Scene s = synth_scene(sc);
  const auto di = neighborhood_log_ratio(s.i1, s.i2).image;
  SamplingConfig cfg;
  cfg.seed = seed;
  cfg.stride = 16;
  return extract_training_patches(di, s.mask, Rect{0, 0, 96, 96}, cfg);
}

}  // namespace

TEST(Loss, UniformScoresGiveLn2) {
  Tensor<double> scores(Shape{2, 2, 4, 4}, 0.3);
  Tensor<double> labels(Shape{2, 1, 4, 4});
  for (std::size_t i = 0; i < labels.numel(); i += 3) labels.data()[i] = 1;
  EXPECT_NEAR(bce_loss(scores, labels).item(), std::log(2.0), 1e-12);
}

TEST(Loss, ConfidentCorrectScoresGiveNearZero) {
  Tensor<double> scores(Shape{1, 2, 2, 2});
  Tensor<double> labels(Shape{1, 1, 2, 2}, {0, 1, 1, 0});
  for (std::size_t i = 0; i < 4; ++i) {
    const bool one = labels.data()[i] != 0;
    scores.data()[i] = one ? -50 : 50;
    scores.data()[4 + i] = one ? 50 : -50;
  }
  EXPECT_NEAR(bce_loss(scores, labels).item(), 0.0, 1e-6);
}

TEST(Loss, MatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const auto scores = random_tensor<double>(Shape{3, 2, 5, 5}, rng, -4, 4);
    Tensor<double> labels(Shape{3, 1, 5, 5});
    for (auto& v : labels.data()) v = rng.bernoulli(0.4);
    EXPECT_NEAR(bce_loss(scores, labels).item(), oracle_loss(scores, labels), 1e-6);
  }
}

TEST(Loss, Contracts) {
  Tensor<double> scores(Shape{1, 2, 2, 2});
  EXPECT_THROW(bce_loss(scores, Tensor<double>(Shape{1, 1, 2, 2}, 0.5)), ContractViolation);
  EXPECT_THROW(bce_loss(scores, Tensor<double>(Shape{1, 1, 2, 3})), ContractViolation);
  EXPECT_THROW(bce_loss(Tensor<double>(Shape{1, 3, 2, 2}), Tensor<double>(Shape{1, 1, 2, 2})), ContractViolation);
}

TEST(Accuracy, CountsArgmaxMatches) {
  Tensor<float> scores(Shape{1, 2, 1, 5}, {0, 0, 1, -1, 2, 1, -1, 0, 0, 2});
  Tensor<float> labels(Shape{1, 1, 1, 5}, {1, 0, 1, 1, 1});
  // predicted: 1, 0, 0, 1, 0 (ties go to class 0).
  EXPECT_DOUBLE_EQ(pixel_accuracy(scores, labels), 0.6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor<double> w(Shape{}, 1.0);
  w.set_requires_grad(true);
  Adam<double> opt({{"w", w, true}}, AdamConfig{0.005});
  w.grad_mut()[0] = 0.2;
  opt.step();
  EXPECT_NEAR(w.item() - 1.0, -0.005 * 0.2 / (0.2 + 1e-8), 1e-12);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor<double> w(Shape{1, 1, 1, 3}, {1, 2, 3});
  w.set_requires_grad(true);
  Adam<double> opt({{"w", w, true}});
  w.grad_mut()[0] = 0.0;
  opt.zero_grad();
  opt.step();
  opt.step();
  EXPECT_EQ(std::vector<double>(w.data().begin(), w.data().end()), (std::vector<double>{1, 2, 3}));
}

TEST(Adam, MatchesClosedFormOverSeveralSteps) {
  Tensor<double> w(Shape{}, 0.0);
  w.set_requires_grad(true);
  Adam<double> opt({{"w", w, true}}, AdamConfig{0.01});
  const double grads[] = {0.5, -0.1, 0.3, 0.0};
  double m = 0, v = 0, ref = 0;
  for (int t = 1; t <= 4; ++t) {
    opt.zero_grad();
    w.grad_mut()[0] = grads[t - 1];
    opt.step();
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    ref -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(w.item(), ref, 1e-12);
  }
}

TEST(Adam, MissingGradientNamesParameter) {
  Tensor<double> w(Shape{}, 0.0);
  w.set_requires_grad(true);
  Adam<double> opt({{"block.weight", w, true}});
  try {
    opt.step();
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("block.weight"), std::string::npos);
  }
}

TEST(Adam, SmallStepDecreasesBatchLoss) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    LiteCnn<float> net(build_default(0.0), rng);
    const auto x = random_tensor<float>(Shape{4, 1, 32, 32}, rng, 0.0, 1.0);
    Tensor<float> y(Shape{4, 1, 32, 32});
    for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] = x.data()[i] > 0.6f ? 1.0f : 0.0f;
    Adam<float> opt(net.trainable_parameters(), AdamConfig{1e-4});
    opt.zero_grad();
    // Eval mode keeps normalization fixed so both evaluations see the same function.
    const auto loss = bce_loss(net.forward(x, Mode::Eval), y);
    backward(loss);
    opt.step();
    NoGradGuard guard;
    EXPECT_LT(bce_loss(net.forward(x, Mode::Eval), y).item(), loss.item()) << "seed " << seed;
  }
}

TEST(Train, OneEpochOneEntryAndFiniteTrace) {
  const PatchSet set = small_patch_set(1);
  Rng rng(1);
  LiteCnn<float> net(build_default(), rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  std::size_t callbacks = 0;
  const auto trace = train(net, set, cfg, rng, [&](const EpochStats& e) {
    ++callbacks;
    EXPECT_EQ(e.epoch, 1u);
  });
  ASSERT_EQ(trace.epochs.size(), 1u);
  EXPECT_EQ(callbacks, 1u);
  EXPECT_TRUE(std::isfinite(trace.epochs[0].loss));
  EXPECT_GE(trace.epochs[0].accuracy, 0.0);
  EXPECT_LE(trace.epochs[0].accuracy, 1.0);
}

TEST(Train, Contracts) {
  Rng rng(1);
  LiteCnn<float> net(build_default(), rng);
  TrainConfig cfg;
  EXPECT_THROW(train(net, PatchSet{}, cfg, rng), ContractViolation);
  cfg.epochs = 0;
  EXPECT_THROW(train(net, small_patch_set(1), cfg, rng), ContractViolation);
}

TEST(Train, BitReproducibleUnderSeed) {
  const PatchSet set = small_patch_set(2);
  auto run = [&] {
    Rng rng(5);
    LiteCnn<float> net(build_default(), rng);
    TrainConfig cfg;
    cfg.epochs = 2;
    const auto trace = train(net, set, cfg, rng);
    std::vector<float> weights;
    for (const auto& p : net.parameters()) weights.insert(weights.end(), p.tensor.data().begin(), p.tensor.data().end());
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    return std::pair{csv.str(), weights};
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, DivergenceIsReported) {
  PatchSet set = small_patch_set(3);
  for (auto& p : set.patches) p.di[0] = NAN;
  Rng rng(1);
  LiteCnn<float> net(build_default(), rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train(net, set, cfg, rng), NumericDivergence);
}

TEST(TraceCsv, SixDecimals) {
  TrainTrace t;
  t.epochs.push_back({1, 0.5, 0.25});
  t.epochs.push_back({2, 1.0 / 3.0, 2.0 / 3.0});
  std::ostringstream os;
  write_trace_csv(os, t);
  EXPECT_EQ(os.str(), "epoch,loss,accuracy\n1,0.500000,0.250000\n2,0.333333,0.666667\n");
}

TEST(MakeBatch, StacksPatchesInOrder) {
  const PatchSet set = small_patch_set(1);
  const std::vector<std::size_t> order{2, 0};
  auto [x, y] = make_batch(set, order, 0, 2);
  EXPECT_EQ(x.shape(), (Shape{2, 1, 32, 32}));
  EXPECT_EQ(x.at(0, 0, 3, 4), set.patches[2].di[3 * 32 + 4]);
  EXPECT_EQ(x.at(1, 0, 5, 6), set.patches[0].di[5 * 32 + 6]);
  EXPECT_EQ(y.at(1, 0, 5, 6), set.patches[0].labels[5 * 32 + 6] ? 1.0f : 0.0f);
}
