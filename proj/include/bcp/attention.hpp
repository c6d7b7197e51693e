#pragma once

#include "bcp/image.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace bcp {

inline constexpr double kDefaultGamma = 2.0;

// Spatial attention field in [0,1], derived from the thermal V channel.
// gamma records the exponent the map was built with.
struct AttentionMap {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd values;
    double gamma = kDefaultGamma;
};

// T_att = V(thermal)^gamma. A 1-channel thermal image is taken as V
// directly; a 3-channel one goes through the channel max first.
AttentionMap build_attention(const RasterImage& thermal, double gamma);

// Resamples the map to each requested (width, height). Exact integer
// downscale factors use block means (mass-preserving across pyramid
// levels); everything else is nearest-neighbor. gamma is carried through.
std::vector<AttentionMap> attention_pyramid(const AttentionMap& att,
                                            const std::vector<std::pair<int, int>>& sizes);

} // namespace bcp
