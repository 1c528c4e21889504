#pragma once

#include <cstddef>

#include "litecd/di.hpp"
#include "litecd/model.hpp"

namespace litecd {

inline constexpr std::size_t kDefaultInferenceStride = 16;

/// Tiles the difference image, runs the network in eval mode and stitches
/// the class-1 probabilities into a change map.
StitchResult infer_change_map(LiteCnn<float>& net, const DifferenceImage& di,
                              std::size_t stride = kDefaultInferenceStride, std::size_t batch = 16);

}  // namespace litecd
