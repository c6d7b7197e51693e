#include "bcp/attention.hpp"

#include <algorithm>
#include <stdexcept>

namespace bcp {

AttentionMap build_attention(const RasterImage& thermal, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("attention gamma must be positive");

    Eigen::ArrayXd v = thermal.plane(0);
    for (int ch = 1; ch < thermal.channels(); ++ch) v = v.max(thermal.plane(ch));
    return {thermal.width(), thermal.height(), v.pow(gamma), gamma};
}

namespace {

AttentionMap resample(const AttentionMap& att, int nw, int nh) {
    if (nw < 1 || nh < 1) throw std::invalid_argument("pyramid level must be at least 1x1");
    if (nw == att.width && nh == att.height) return att;

    const Eigen::Index np = static_cast<Eigen::Index>(nw) * nh;
    Eigen::ArrayXd out(np);

    const bool block = att.width % nw == 0 && att.height % nh == 0;
    if (block) {
        const int fr = att.height / nh;
        const int fc = att.width / nw;
        const double inv = 1.0 / (static_cast<double>(fr) * fc);
        for (int r = 0; r < nh; ++r)
            for (int c = 0; c < nw; ++c) {
                double sum = 0.0;
                for (int dr = 0; dr < fr; ++dr)
                    for (int dc = 0; dc < fc; ++dc)
                        sum += att.values[static_cast<Eigen::Index>(r * fr + dr) * att.width +
                                          (c * fc + dc)];
                out[static_cast<Eigen::Index>(r) * nw + c] = sum * inv;
            }
    } else {
        const double sr = static_cast<double>(att.height) / nh;
        const double sc = static_cast<double>(att.width) / nw;
        for (int r = 0; r < nh; ++r) {
            const int src_r = std::min(att.height - 1, static_cast<int>((r + 0.5) * sr));
            for (int c = 0; c < nw; ++c) {
                const int src_c = std::min(att.width - 1, static_cast<int>((c + 0.5) * sc));
                out[static_cast<Eigen::Index>(r) * nw + c] =
                    att.values[static_cast<Eigen::Index>(src_r) * att.width + src_c];
            }
        }
    }
    return {nw, nh, std::move(out), att.gamma};
}

} // namespace

std::vector<AttentionMap> attention_pyramid(const AttentionMap& att,
                                            const std::vector<std::pair<int, int>>& sizes) {
    std::vector<AttentionMap> levels;
    levels.reserve(sizes.size());
    for (const auto& [w, h] : sizes) levels.push_back(resample(att, w, h));
    return levels;
}

} // namespace bcp
