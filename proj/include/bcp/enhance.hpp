#pragma once

#include "bcp/attention.hpp"
#include "bcp/bright_channel.hpp"
#include "bcp/enhance_net.hpp"
#include "bcp/matting.hpp"
#include "bcp/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bcp {

enum class SolverChoice { DirectQuadratic, LearnedNetwork };

struct PipelineConfig {
    PatchSpec patch = {};
    double ambient_fraction = kDefaultAmbientFraction;
    double lambda = kDefaultLambda;
    double gamma = kDefaultGamma;
    double t_min = kDefaultTMin;
    double matting_epsilon = kDefaultMattingEpsilon;
    SolverChoice solver = SolverChoice::DirectQuadratic;
    SolverConfig solver_cfg = {};
    TrainConfig train_cfg = {};
    // When set, skips estimation and uses this ambient light directly.
    std::optional<AmbientLight> ambient_override;
};

// Enhanced image from the formation model: J = (I - A)/t + A per channel,
// clamped to [0,1]. Requires t >= floor everywhere (the illumination-map
// invariant; guards the division).
RasterImage recover(const RasterImage& visible, const IlluminationMap& t,
                    const AmbientLight& ambient, double floor = kDefaultTMin);

// Forward formation model: I = t*J + (1-t)*A. Convex combination of
// in-range values, so no clamping beyond roundoff protection.
RasterImage resynthesize(const RasterImage& J, const IlluminationMap& t,
                         const AmbientLight& ambient);

struct ClampStats {
    long t_tilde_floored = 0; // raw initial illumination below t_min
    long t_floored = 0;       // refined values pushed up to t_min
    long t_capped = 0;        // refined values pulled down to 1
    long j_clamped_low = 0;
    long j_clamped_high = 0;
};

struct StageTime {
    std::string stage;
    double milliseconds = 0.0;
};

struct EnhanceResult {
    RasterImage enhanced;
    IlluminationMap t;
    IlluminationMap t_tilde;
    AmbientLight ambient;
    AttentionMap attention;
    LossBreakdown loss_initial;  // objective at t~
    LossBreakdown loss_solution; // objective at the solver output, pre-clamp
    LossBreakdown loss_final;    // objective at the clamped map
    ClampStats clamps;
    int solver_iterations = 0;
    double solver_residual = 0.0;
    std::vector<LossBreakdown> train_history; // network path only
    std::vector<StageTime> timings;
};

// Full pipeline: ambient -> initial illumination -> matting Laplacian ->
// attention -> refinement (direct quadratic or learned network) -> recovery.
// All intermediates are returned for inspection.
EnhanceResult enhance_pair(const RasterImage& visible, const RasterImage& thermal,
                           const PipelineConfig& cfg);

} // namespace bcp
