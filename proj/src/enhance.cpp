#include "bcp/enhance.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bcp {

namespace {

void check_extents(const RasterImage& img, const IlluminationMap& t, const char* who) {
    if (t.width != img.width() || t.height != img.height())
        throw std::invalid_argument(std::string(who) + ": illumination extent does not match image");
}

RasterImage recover_impl(const RasterImage& visible, const IlluminationMap& t,
                         const AmbientLight& ambient, double floor, ClampStats* stats) {
    check_extents(visible, t, "recover");
    if (!(floor > 0.0)) throw std::invalid_argument("recover: floor must be positive");
    if ((t.values < floor).any())
        throw std::invalid_argument("recover: illumination below its floor");

    const Eigen::Index n = visible.pixel_count();
    Eigen::ArrayXd out(n * visible.channels());
    for (int ch = 0; ch < visible.channels(); ++ch) {
        const double a = ambient.value[ch];
        Eigen::ArrayXd j = (visible.plane(ch) - a) / t.values + a;
        if (stats) {
            stats->j_clamped_low += (j < 0.0).count();
            stats->j_clamped_high += (j > 1.0).count();
        }
        out.segment(ch * n, n) = j.max(0.0).min(1.0);
    }
    return {visible.width(), visible.height(), visible.channels(), std::move(out)};
}

} // namespace

RasterImage recover(const RasterImage& visible, const IlluminationMap& t,
                    const AmbientLight& ambient, double floor) {
    return recover_impl(visible, t, ambient, floor, nullptr);
}

RasterImage resynthesize(const RasterImage& J, const IlluminationMap& t,
                         const AmbientLight& ambient) {
    check_extents(J, t, "resynthesize");
    if (!((t.values >= 0.0).all() && (t.values <= 1.0).all()))
        throw std::invalid_argument("resynthesize: illumination must lie in [0, 1]");

    const Eigen::Index n = J.pixel_count();
    Eigen::ArrayXd out(n * J.channels());
    for (int ch = 0; ch < J.channels(); ++ch) {
        const double a = ambient.value[ch];
        // Convex combination of in-range values; the clamp only absorbs roundoff.
        out.segment(ch * n, n) = (t.values * J.plane(ch) + (1.0 - t.values) * a).max(0.0).min(1.0);
    }
    return {J.width(), J.height(), J.channels(), std::move(out)};
}

EnhanceResult enhance_pair(const RasterImage& visible, const RasterImage& thermal,
                           const PipelineConfig& cfg) {
    if (visible.width() != thermal.width() || visible.height() != thermal.height())
        throw std::invalid_argument(
            "visible image is " + std::to_string(visible.width()) + "x" +
            std::to_string(visible.height()) + " but thermal image is " +
            std::to_string(thermal.width()) + "x" + std::to_string(thermal.height()));

    using Clock = std::chrono::steady_clock;
    EnhanceResult res;
    auto mark = Clock::now();
    const auto lap_time = [&](const char* stage) {
        const auto now = Clock::now();
        res.timings.push_back(
            {stage, std::chrono::duration<double, std::milli>(now - mark).count()});
        mark = now;
    };

    res.attention = build_attention(thermal, cfg.gamma);
    lap_time("attention");

    res.ambient = cfg.ambient_override ? *cfg.ambient_override
                                       : estimate_ambient(visible, cfg.ambient_fraction);
    lap_time("ambient");

    // Compute the raw map with a vanishing floor first so the flooring can
    // be counted, then apply the real floor.
    const IlluminationMap raw_tilde =
        initial_illumination(visible, res.ambient, cfg.patch, 1e-300);
    res.clamps.t_tilde_floored = (raw_tilde.values < cfg.t_min).count();
    res.t_tilde = {raw_tilde.width, raw_tilde.height, raw_tilde.values.max(cfg.t_min)};
    lap_time("initial-illumination");

    const SparseAffinity lap = build_matting_laplacian(visible, cfg.matting_epsilon);
    lap_time("laplacian");

    res.loss_initial = bcp_loss(res.t_tilde, res.t_tilde, lap, cfg.lambda, &res.attention);

    Eigen::ArrayXd unclamped;
    if (cfg.solver == SolverChoice::DirectQuadratic) {
        SolverConfig sc = cfg.solver_cfg;
        sc.lambda = cfg.lambda;
        sc.t_min = cfg.t_min;
        RefineResult rr = refine_illumination_detailed(res.t_tilde, lap, &res.attention, sc);
        unclamped = std::move(rr.unclamped);
        res.t = std::move(rr.t);
        res.solver_iterations = rr.iterations;
        res.solver_residual = rr.relative_residual;
        lap_time("solve");
    } else {
        TrainConfig tc = cfg.train_cfg;
        tc.lambda = cfg.lambda;
        tc.gamma = cfg.gamma;
        tc.patch = cfg.patch;
        tc.ambient_fraction = cfg.ambient_fraction;
        tc.t_min = cfg.t_min;
        tc.matting_epsilon = cfg.matting_epsilon;
        tc.ambient_override = cfg.ambient_override;
        TrainResult tr = train(visible, thermal, tc);
        unclamped = tr.t.values;
        res.t = {tr.t.width, tr.t.height, unclamped.max(cfg.t_min).min(1.0)};
        res.solver_iterations = tc.steps;
        res.train_history = std::move(tr.history);
        lap_time("train");
    }

    res.clamps.t_floored = (unclamped < cfg.t_min).count();
    res.clamps.t_capped = (unclamped > 1.0).count();
    const IlluminationMap raw_map{res.t.width, res.t.height, std::move(unclamped)};
    res.loss_solution = bcp_loss(raw_map, res.t_tilde, lap, cfg.lambda, &res.attention);
    res.loss_final = bcp_loss(res.t, res.t_tilde, lap, cfg.lambda, &res.attention);

    res.enhanced = recover_impl(visible, res.t, res.ambient, cfg.t_min, &res.clamps);
    lap_time("recover");
    return res;
}

} // namespace bcp
