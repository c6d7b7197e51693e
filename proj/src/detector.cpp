#include "bcp/detector.hpp"

#include "bcp/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bcp {

TotalLoss total_loss(const LossBreakdown& bcp, double detector_loss, double beta) {
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    if (detector_loss < 0.0) throw std::invalid_argument("detector loss must be non-negative");
    TotalLoss out;
    out.bcp = bcp;
    out.detector = detector_loss;
    out.beta = beta;
    out.total = bcp.total + beta * detector_loss;
    return out;
}

StubDetectorResult stub_detector(const RasterImage& enhanced, const RasterImage& thermal,
                                 const RasterImage* target_mask) {
    const int w = enhanced.width();
    const int h = enhanced.height();
    if (thermal.width() != w || thermal.height() != h)
        throw std::invalid_argument("enhanced and thermal extents differ");
    if (target_mask && (target_mask->width() != w || target_mask->height() != h))
        throw std::invalid_argument("target mask extent does not match the enhanced image");

    const Eigen::Index n = enhanced.pixel_count();
    const int ch = enhanced.channels();

    // V channel plus the argmax channel per pixel (lowest index on ties),
    // which is where the gradient w.r.t. the enhanced image routes.
    Eigen::ArrayXd v = enhanced.plane(0);
    std::vector<int> arg(static_cast<size_t>(n), 0);
    for (int c = 1; c < ch; ++c) {
        const auto pl = enhanced.plane(c);
        for (Eigen::Index p = 0; p < n; ++p)
            if (pl[p] > v[p]) {
                v[p] = pl[p];
                arg[static_cast<size_t>(p)] = c;
            }
    }

    // Foreground: mask > 0.5 when given, else the thermal attention map.
    Eigen::ArrayXd fg(n);
    if (target_mask) {
        Eigen::ArrayXd m = target_mask->plane(0);
        for (int c = 1; c < target_mask->channels(); ++c) m = m.max(target_mask->plane(c));
        fg = m;
    } else {
        fg = build_attention(thermal, kDefaultGamma).values;
    }

    StubDetectorResult res;
    res.gradient = Eigen::ArrayXd::Zero(n * ch);

    std::vector<Eigen::Index> selected;
    for (Eigen::Index p = 0; p < n; ++p)
        if (fg[p] > 0.5) selected.push_back(p);
    if (selected.empty()) return res;

    // Local contrast c_p = min(1, 2*sigma_p) over clipped 3x3 windows of V,
    // sigma the biased standard deviation; loss = mean of (1 - c_p)^2.
    Eigen::ArrayXd vgrad = Eigen::ArrayXd::Zero(n);
    const double inv_count = 1.0 / static_cast<double>(selected.size());
    for (const Eigen::Index p : selected) {
        const int pr = static_cast<int>(p / w);
        const int pc = static_cast<int>(p % w);
        const int r0 = std::max(0, pr - 1), r1 = std::min(h - 1, pr + 1);
        const int c0 = std::max(0, pc - 1), c1 = std::min(w - 1, pc + 1);
        const int m = (r1 - r0 + 1) * (c1 - c0 + 1);

        double sum = 0.0, sumsq = 0.0;
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                const double x = v[static_cast<Eigen::Index>(r) * w + c];
                sum += x;
                sumsq += x * x;
            }
        const double mu = sum / m;
        const double var = std::max(0.0, sumsq / m - mu * mu);
        const double sigma = std::sqrt(var);
        const double contrast = std::min(1.0, 2.0 * sigma);
        res.loss += (1.0 - contrast) * (1.0 - contrast) * inv_count;

        // d(1-c)^2/dV_q = -2(1-c) * 2 * (V_q - mu)/(m*sigma); zero past the
        // cap and at zero variance (flat window), both taken as subgradients.
        if (2.0 * sigma >= 1.0 || sigma < 1e-12) continue;
        const double scale = -2.0 * (1.0 - contrast) * 2.0 * inv_count / (m * sigma);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                const Eigen::Index q = static_cast<Eigen::Index>(r) * w + c;
                vgrad[q] += scale * (v[q] - mu);
            }
    }

    for (Eigen::Index p = 0; p < n; ++p)
        res.gradient[static_cast<Eigen::Index>(arg[static_cast<size_t>(p)]) * n + p] = vgrad[p];
    return res;
}

DetectorLossProvider::Evaluation ContrastStubDetector::evaluate(const RasterImage& enhanced,
                                                                const RasterImage& thermal) const {
    const StubDetectorResult r =
        stub_detector(enhanced, thermal, mask_ ? &*mask_ : nullptr);
    Evaluation out;
    out.loss = r.loss;
    out.gradient = r.gradient;
    return out;
}

} // namespace bcp
