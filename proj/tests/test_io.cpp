#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "litecd/io.hpp"
#include "litecd/pipeline.hpp"
#include "test_util.hpp"

using namespace litecd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("litecd_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<float> snapshot(const LiteCnn<float>& net) {
  std::vector<float> out;
  for (const auto& p : net.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST(GridFile, ExactBytes) {
  Grid g{1, 2, 1, {1.0f, -2.5f}};
  const std::string bytes = encode_grid(g);
  const std::string want = std::string("LGRID 1 2 1\n") + std::string("\x00\x00\x80\x3f\x00\x00\x20\xc0", 8);
  EXPECT_EQ(bytes, want);
}

TEST(GridFile, RoundTrip) {
  Rng rng(1);
  Grid g{3, 4, 2, {}};
  for (int i = 0; i < 24; ++i) g.values.push_back(static_cast<float>(rng.uniform(-5, 5)));
  const Grid back = decode_grid(encode_grid(g));
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.width, 4u);
  EXPECT_EQ(back.channels, 2u);
  EXPECT_EQ(back.values, g.values);
}

TEST(GridFile, RejectsBadHeadersAndLengths) {
  EXPECT_THROW(decode_grid("GRID 1 1 1\n...."), ContractViolation);
  EXPECT_THROW(decode_grid("LGRID 1 x 1\n...."), ContractViolation);
  EXPECT_THROW(decode_grid("LGRID 1 2 1\n1234"), ContractViolation);
  EXPECT_THROW(decode_grid(std::string("LGRID 1 1 1\n12345", 17)), ContractViolation);
}

TEST(Pgm, RoundTripAndHeader) {
  Gray8 img{2, 3, {0, 1, 2, 128, 254, 255}};
  const std::string bytes = encode_pgm(img);
  EXPECT_EQ(bytes.substr(0, 3), "P5\n");
  const Gray8 back = decode_pgm(bytes);
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.values, img.values);
  // Comments and arbitrary whitespace in the header are accepted.
  const Gray8 c = decode_pgm(std::string("P5 # comment\n3  1\n255\n") + std::string("\x01\x02\x03", 3));
  EXPECT_EQ(c.values, (std::vector<std::uint8_t>{1, 2, 3}));
  EXPECT_THROW(decode_pgm("P2\n1 1\n255\n1"), ContractViolation);
  EXPECT_THROW(decode_pgm("P5\n2 2\n255\n12"), ContractViolation);
  EXPECT_THROW(decode_pgm("P5\n1 1\n65535\n12"), ContractViolation);
}

TEST(Rasters, LoadersAcceptBothFormats) {
  const fs::path dir = scratch_dir("rasters");
  ChangeMask m(2, 2, 0);
  m.values = {0, 1, 1, 0};
  save_grid(dir / "m.grid", m);
  save_mask_pgm(dir / "m.pgm", m);
  EXPECT_EQ(load_mask(dir / "m.grid").values, m.values);
  EXPECT_EQ(load_mask(dir / "m.pgm").values, m.values);
  IntensityImage img(2, 2);
  img.values = {0.5f, 1.5f, 2.0f, 0.0f};
  save_grid(dir / "i.grid", img);
  EXPECT_EQ(load_intensity(dir / "i.grid").values, img.values);
  EXPECT_THROW(load_mask(dir / "missing.grid"), ContractViolation);
}

TEST(Checkpoint, HeaderLayout) {
  Rng rng(1);
  LiteCnn<float> net(build_default(), rng);
  const std::string bytes = encode_checkpoint(net);
  EXPECT_EQ(bytes.substr(0, 5), "LCDN1");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 5, 4);
  EXPECT_EQ(version, kCheckpointVersion);
  std::uint64_t fp = 0;
  std::memcpy(&fp, bytes.data() + 9, 8);
  EXPECT_EQ(fp, net.spec().fingerprint());
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 17, 4);
  EXPECT_EQ(count, net.parameters().size());
  // Payload is every parameter and running statistic as float32.
  std::size_t values = 0;
  for (const auto& p : net.parameters()) values += p.tensor.numel();
  std::uint64_t payload = 0;
  std::memcpy(&payload, bytes.data() + bytes.size() - 4 * values - 8, 8);
  EXPECT_EQ(payload, 4 * values);
}

TEST(Checkpoint, RoundTripIsByteIdenticalAndRestoresOutputs) {
  Rng rng(2);
  LiteCnn<float> trained(build_default(), rng);
  // Perturb running statistics so they are not at their defaults.
  Rng data(3);
  const auto x = litecd::testing::random_tensor<float>(Shape{4, 1, 32, 32}, data, 0, 1);
  trained.forward(x, Mode::Train, &data);
  const std::string first = encode_checkpoint(trained);

  Rng other(99);
  LiteCnn<float> restored(build_default(), other);
  decode_checkpoint(first, restored);
  EXPECT_EQ(snapshot(restored), snapshot(trained));
  EXPECT_EQ(encode_checkpoint(restored), first);

  NoGradGuard guard;
  const auto a = trained.forward(x, Mode::Eval);
  const auto b = restored.forward(x, Mode::Eval);
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]);
}

TEST(Checkpoint, RefusesMismatches) {
  Rng rng(1);
  LiteCnn<float> net(build_default(), rng);
  const std::string good = encode_checkpoint(net);
  const auto before = snapshot(net);

  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad, net), ModelMismatch);
  bad = good;
  bad[5] = 2;
  EXPECT_THROW(decode_checkpoint(bad, net), ModelMismatch);
  bad = good;
  bad[9] ^= 1;  // fingerprint
  EXPECT_THROW(decode_checkpoint(bad, net), ModelMismatch);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 1), net), ModelMismatch);
  EXPECT_THROW(decode_checkpoint(good + "x", net), ModelMismatch);
  EXPECT_EQ(snapshot(net), before);

  NetworkSpec other = build_default();
  other.asymmetric_kernel = 3;
  Rng r2(1);
  LiteCnn<float> different(other, r2);
  EXPECT_THROW(decode_checkpoint(good, different), ModelMismatch);
}

TEST(Pipeline, SinglePatchFrameIsPerPixelArgmax) {
  Rng rng(4);
  LiteCnn<float> net(build_default(), rng);
  DifferenceImage di(32, 32);
  for (auto& v : di.values) v = static_cast<float>(rng.uniform());
  const auto res = infer_change_map(net, di);
  Tensor<float> x(Shape{1, 1, 32, 32}, di.values);
  NoGradGuard guard;
  const auto scores = net.forward(x, Mode::Eval);
  for (std::size_t i = 0; i < 1024; ++i)
    EXPECT_EQ(res.mask.values[i], scores.data()[1024 + i] > scores.data()[i] ? 1 : 0);
}

TEST(Pipeline, OutputMatchesInputSizeForAnyBatch) {
  Rng rng(4);
  LiteCnn<float> net(build_default(), rng);
  DifferenceImage di(50, 70);
  for (auto& v : di.values) v = static_cast<float>(rng.uniform());
  const auto a = infer_change_map(net, di, 16, 16);
  const auto b = infer_change_map(net, di, 16, 3);
  EXPECT_EQ(a.mask.height, 50u);
  EXPECT_EQ(a.mask.width, 70u);
  EXPECT_EQ(a.mask.values, b.mask.values);
}
