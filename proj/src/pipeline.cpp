#include "litecd/pipeline.hpp"

#include <algorithm>

namespace litecd {

StitchResult infer_change_map(LiteCnn<float>& net, const DifferenceImage& di, std::size_t stride,
                              std::size_t batch) {
  require(batch >= 1, "inference: batch must be >= 1");
  const auto origins = tile_origins(di.height, di.width, stride);
  constexpr std::size_t P = kPatchSize * kPatchSize;
  NoGradGuard no_grad;
  std::vector<PatchScores> scored;
  scored.reserve(origins.size());
  for (std::size_t first = 0; first < origins.size(); first += batch) {
    const std::size_t count = std::min(batch, origins.size() - first);
    Tensor<float> x(Shape{count, 1, kPatchSize, kPatchSize});
    auto xd = x.data();
    for (std::size_t b = 0; b < count; ++b) {
      const auto [oy, ox] = origins[first + b];
      for (std::size_t y = 0; y < kPatchSize; ++y)
        for (std::size_t xx = 0; xx < kPatchSize; ++xx) xd[b * P + y * kPatchSize + xx] = di.at(oy + y, ox + xx);
    }
    const Tensor<float> scores = net.forward(x, Mode::Eval);
    const auto sd = scores.data();
    for (std::size_t b = 0; b < count; ++b) {
      PatchScores ps;
      ps.origin_y = origins[first + b].first;
      ps.origin_x = origins[first + b].second;
      ps.scores.assign(sd.begin() + static_cast<long>(b * 2 * P), sd.begin() + static_cast<long>((b + 1) * 2 * P));
      scored.push_back(std::move(ps));
    }
  }
  return stitch_change_map(scored, di.height, di.width);
}

}  // namespace litecd
