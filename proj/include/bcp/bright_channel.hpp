#pragma once

#include "bcp/image.hpp"

#include <Eigen/Core>

namespace bcp {

inline constexpr double kDefaultTMin = 0.05;
inline constexpr double kAmbientClamp = 1e-3;   // keeps every A component <= 1 - kAmbientClamp
inline constexpr int kDefaultPatchRadius = 7;   // 15x15 window
inline constexpr double kDefaultAmbientFraction = 1e-3;

// Per-channel environment light A, each component in [0, 1).
struct AmbientLight {
    Eigen::Array3d value = Eigen::Array3d::Zero();
};

// Scalar illumination field t over the image grid, row-major values.
struct IlluminationMap {
    int width = 0;
    int height = 0;
    Eigen::ArrayXd values;

    static IlluminationMap constant(int width, int height, double v) {
        return {width, height, Eigen::ArrayXd::Constant(static_cast<Eigen::Index>(width) * height, v)};
    }
};

// Square window of (2*radius+1)^2 pixels, clipped at image borders.
struct PatchSpec {
    int radius = kDefaultPatchRadius;
};

// Patch-wise bright channel: max over the window and over all channels.
RasterImage bright_channel(const RasterImage& img, const PatchSpec& patch);

// Environment light: mean color of the ceil(fraction * N) pixels with the
// smallest pixelwise channel-max, ties broken by row-major order. Each
// component is clamped to at most 1 - kAmbientClamp.
AmbientLight estimate_ambient(const RasterImage& img, double fraction);

// Initial illumination from the bright channel prior. For a scene whose
// every window holds a pixel with some channel at 1, this recovers the
// true illumination of the low-light formation model exactly:
//   t~(p) = max over channels c and window pixels q of
//           (img(q,c) - A^c) / (1 - A^c)
// which equals 1 - min_{c,q} (1 - img(q,c)) / (1 - A^c). The result is
// clamped into [t_min, 1].
IlluminationMap initial_illumination(const RasterImage& img, const AmbientLight& ambient,
                                     const PatchSpec& patch, double t_min);

} // namespace bcp
