#pragma once

#include "bcp/image.hpp"
#include "bcp/matting.hpp"

#include <Eigen/Core>

#include <optional>

namespace bcp {

inline constexpr double kDefaultBeta = 0.1;

// Pluggable detection-loss hook: a provider scores an (enhanced, thermal)
// pair and may hand back the loss gradient w.r.t. the enhanced input so
// the enhancement can be trained end-to-end against a real detector.
class DetectorLossProvider {
public:
    struct Evaluation {
        double loss = 0.0;
        // Planar layout matching the enhanced image (W*H*C), when provided.
        std::optional<Eigen::ArrayXd> gradient;
    };

    virtual ~DetectorLossProvider() = default;
    virtual Evaluation evaluate(const RasterImage& enhanced, const RasterImage& thermal) const = 0;
};

// Combined enhancement + detection loss: total = bcp.total + beta * detector.
struct TotalLoss {
    LossBreakdown bcp;
    double detector = 0.0;
    double beta = 0.0;
    double total = 0.0;
};

TotalLoss total_loss(const LossBreakdown& bcp, double detector_loss, double beta);

struct StubDetectorResult {
    double loss = 0.0;
    Eigen::ArrayXd gradient; // planar, same extents as the enhanced image
};

// Stand-in detector loss: mean over mask-positive pixels of
// (1 - local contrast)^2, where local contrast is the 3x3 standard
// deviation of the enhanced V channel scaled by 2 (the largest possible
// std of unit-range data is 1/2) and capped at 1. Without a mask, the
// thermal attention map (default gamma) thresholded at 0.5 is used.
// An empty mask gives loss 0 with a zero gradient. The gradient is
// analytic and matches central finite differences.
StubDetectorResult stub_detector(const RasterImage& enhanced, const RasterImage& thermal,
                                 const RasterImage* target_mask = nullptr);

// DetectorLossProvider wrapper around stub_detector.
class ContrastStubDetector final : public DetectorLossProvider {
public:
    ContrastStubDetector() = default;
    explicit ContrastStubDetector(RasterImage mask) : mask_(std::move(mask)) {}

    Evaluation evaluate(const RasterImage& enhanced, const RasterImage& thermal) const override;

private:
    std::optional<RasterImage> mask_;
};

} // namespace bcp
