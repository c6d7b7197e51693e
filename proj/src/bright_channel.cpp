#include "bcp/bright_channel.hpp"

#include "bcp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace bcp {

namespace {

// Max filter over clipped square windows, separable into a horizontal and a
// vertical pass. Exact: max over a rectangle is the max of per-row maxima.
Eigen::ArrayXd patch_max(const Eigen::ArrayXd& values, int width, int height, int radius) {
    if (radius == 0) return values;
    Eigen::ArrayXd horiz(values.size());
    parallel_for(height, [&](long r0, long r1) {
        for (long r = r0; r < r1; ++r) {
            const Eigen::Index base = static_cast<Eigen::Index>(r) * width;
            for (int c = 0; c < width; ++c) {
                const int lo = std::max(0, c - radius);
                const int hi = std::min(width - 1, c + radius);
                double m = values[base + lo];
                for (int q = lo + 1; q <= hi; ++q) m = std::max(m, values[base + q]);
                horiz[base + c] = m;
            }
        }
    });
    Eigen::ArrayXd out(values.size());
    parallel_for(height, [&](long r0, long r1) {
        for (long r = r0; r < r1; ++r) {
            const int lo = std::max(0, static_cast<int>(r) - radius);
            const int hi = std::min(height - 1, static_cast<int>(r) + radius);
            for (int c = 0; c < width; ++c) {
                double m = horiz[static_cast<Eigen::Index>(lo) * width + c];
                for (int q = lo + 1; q <= hi; ++q)
                    m = std::max(m, horiz[static_cast<Eigen::Index>(q) * width + c]);
                out[static_cast<Eigen::Index>(r) * width + c] = m;
            }
        }
    });
    return out;
}

Eigen::ArrayXd channel_max(const RasterImage& img) {
    Eigen::ArrayXd m = img.plane(0);
    for (int ch = 1; ch < img.channels(); ++ch) m = m.max(img.plane(ch));
    return m;
}

void check_patch(const PatchSpec& patch) {
    if (patch.radius < 0) throw std::invalid_argument("patch radius must be non-negative");
}

} // namespace

RasterImage bright_channel(const RasterImage& img, const PatchSpec& patch) {
    check_patch(patch);
    return {img.width(), img.height(), 1,
            patch_max(channel_max(img), img.width(), img.height(), patch.radius)};
}

AmbientLight estimate_ambient(const RasterImage& img, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("ambient fraction must lie in (0, 1]");

    const Eigen::Index pixels = img.pixel_count();
    const Eigen::ArrayXd value = channel_max(img);
    const Eigen::Index k = std::min<Eigen::Index>(
        pixels, static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(pixels))));

    std::vector<Eigen::Index> order(static_cast<size_t>(pixels));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::nth_element(order.begin(), order.begin() + k, order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                         return value[a] != value[b] ? value[a] < value[b] : a < b;
                     });
    std::sort(order.begin(), order.begin() + k); // accumulate in row-major order

    AmbientLight ambient;
    for (int ch = 0; ch < img.channels(); ++ch) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) sum += img.data()[ch * pixels + order[i]];
        const double mean = sum / static_cast<double>(k);
        ambient.value[ch] = std::min(mean, 1.0 - kAmbientClamp);
    }
    if (img.channels() == 1) {
        ambient.value[1] = ambient.value[0];
        ambient.value[2] = ambient.value[0];
    }
    return ambient;
}

IlluminationMap initial_illumination(const RasterImage& img, const AmbientLight& ambient,
                                     const PatchSpec& patch, double t_min) {
    check_patch(patch);
    if (!(t_min > 0.0 && t_min <= 1.0))
        throw std::invalid_argument("t_min must lie in (0, 1]");
    for (int ch = 0; ch < img.channels(); ++ch)
        if (!(ambient.value[ch] >= 0.0 && ambient.value[ch] < 1.0))
            throw std::invalid_argument("ambient components must lie in [0, 1)");

    // Per-pixel max over channels of (I - A^c) / (1 - A^c), then over the window.
    Eigen::ArrayXd normalized =
        (img.plane(0) - ambient.value[0]) / (1.0 - ambient.value[0]);
    for (int ch = 1; ch < img.channels(); ++ch)
        normalized = normalized.max((img.plane(ch) - ambient.value[ch]) / (1.0 - ambient.value[ch]));

    Eigen::ArrayXd t = patch_max(normalized, img.width(), img.height(), patch.radius);
    t = t.max(t_min).min(1.0);
    return {img.width(), img.height(), std::move(t)};
}

} // namespace bcp
