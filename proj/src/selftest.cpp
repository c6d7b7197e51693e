#include "bcp/selftest.hpp"

#include "bcp/attention.hpp"
#include "bcp/bright_channel.hpp"
#include "bcp/detector.hpp"
#include "bcp/enhance.hpp"
#include "bcp/enhance_net.hpp"
#include "bcp/matting.hpp"
#include "bcp/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace bcp {

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central difference with step refinement: a coarse step that straddles a
// rectifier/cap kink gives a spurious mismatch, so retry closer in. The
// analytic side must agree at some valid step.
template <typename F>
double fd_rel_err(F&& eval, double& slot, double analytic, double coarse_step) {
    const double keep = slot;
    double best = 1.0;
    for (double step = coarse_step; step >= coarse_step * 1e-3; step *= 0.1) {
        slot = keep + step;
        const double up = eval();
        slot = keep - step;
        const double dn = eval();
        slot = keep;
        best = std::min(best, rel_err(analytic, (up - dn) / (2.0 * step)));
        if (best <= 1e-6) break;
    }
    return best;
}

RasterImage random_image(std::mt19937_64& rng, int w, int h, int ch, double lo = 0.0,
                         double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::ArrayXd d(static_cast<Eigen::Index>(w) * h * ch);
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = u(rng);
    return {w, h, ch, std::move(d)};
}

Eigen::ArrayXd random_array(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::ArrayXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = u(rng);
    return d;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

PropertyResult laplacian_row_sums(std::mt19937_64& rng, bool inject_fault) {
    const RasterImage img = random_image(rng, 7, 6, 3);
    Eigen::MatrixXd dense = Eigen::MatrixXd(build_matting_laplacian(img, kDefaultMattingEpsilon).matrix());
    if (inject_fault) dense(0, 0) += 1e-3;
    const double worst = dense.rowwise().sum().cwiseAbs().maxCoeff();
    return {"laplacian-row-sum-zero", worst <= 1e-10, "max |row sum| = " + fmt(worst)};
}

PropertyResult laplacian_symmetric(std::mt19937_64& rng) {
    const RasterImage img = random_image(rng, 6, 6, 3);
    const Eigen::MatrixXd dense =
        Eigen::MatrixXd(build_matting_laplacian(img, kDefaultMattingEpsilon).matrix());
    const double worst = (dense - dense.transpose()).cwiseAbs().maxCoeff();
    return {"laplacian-symmetric", worst <= 1e-12, "max |L - L'| = " + fmt(worst)};
}

PropertyResult laplacian_psd(std::mt19937_64& rng) {
    const RasterImage img = random_image(rng, 6, 7, 3);
    const Eigen::MatrixXd dense =
        Eigen::MatrixXd(build_matting_laplacian(img, kDefaultMattingEpsilon).matrix());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    return {"laplacian-psd", lo >= -1e-8, "min eigenvalue = " + fmt(lo)};
}

PropertyResult multiply_matches_dense(std::mt19937_64& rng) {
    const RasterImage img = random_image(rng, 8, 5, 3);
    const SparseAffinity lap = build_matting_laplacian(img, kDefaultMattingEpsilon);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(lap.matrix());
    const Eigen::VectorXd x = random_array(rng, lap.dimension(), -1.0, 1.0).matrix();
    Eigen::VectorXd y;
    lap.multiply(x, y);
    const double err = (y - dense * x).norm() / std::max(1e-12, (dense * x).norm());
    return {"multiply-matches-dense", err <= 1e-12, "rel error = " + fmt(err)};
}

PropertyResult smoothness_identity(std::mt19937_64& rng) {
    const RasterImage img = random_image(rng, 5, 8, 3);
    const SparseAffinity lap = build_matting_laplacian(img, kDefaultMattingEpsilon);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(lap.matrix());
    const IlluminationMap t{5, 8, random_array(rng, lap.dimension(), 0.0, 1.0)};
    const double a = smoothness_energy(lap, t);
    const double b = t.values.matrix().dot(dense * t.values.matrix());
    const double err = rel_err(a, b);
    return {"smoothness-quadratic-identity", err <= 1e-10, "rel error = " + fmt(err)};
}

PropertyResult bcp_loss_gradient_fd(std::mt19937_64& rng) {
    const int w = 6, h = 6;
    const RasterImage img = random_image(rng, w, h, 3);
    const SparseAffinity lap = build_matting_laplacian(img, kDefaultMattingEpsilon);
    const Eigen::Index n = lap.dimension();
    const IlluminationMap t_tilde{w, h, random_array(rng, n, 0.05, 1.0)};
    IlluminationMap t{w, h, random_array(rng, n, 0.05, 1.0)};
    const AttentionMap att{w, h, random_array(rng, n, 0.0, 1.0), kDefaultGamma};

    const Eigen::ArrayXd grad = bcp_loss_gradient(t, t_tilde, lap, kDefaultLambda, &att);
    const double step = 1e-6;
    double worst = 0.0;
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (int k = 0; k < 8; ++k) {
        const Eigen::Index i = pick(rng);
        const double keep = t.values[i];
        t.values[i] = keep + step;
        const double up = bcp_loss(t, t_tilde, lap, kDefaultLambda, &att).total;
        t.values[i] = keep - step;
        const double dn = bcp_loss(t, t_tilde, lap, kDefaultLambda, &att).total;
        t.values[i] = keep;
        worst = std::max(worst, rel_err(grad[i], (up - dn) / (2.0 * step)));
    }
    return {"bcp-loss-gradient-fd", worst <= 1e-5, "max rel error = " + fmt(worst)};
}

PropertyResult cg_matches_dense(std::mt19937_64& rng) {
    const int n = 40;
    Eigen::MatrixXd b_mat(n, n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b_mat(i, j) = u(rng);
    const Eigen::MatrixXd a_mat =
        Eigen::MatrixXd::Identity(n, n) + (b_mat * b_mat.transpose()) / n;
    const Eigen::VectorXd rhs = random_array(rng, n, -1.0, 1.0).matrix();

    const CgResult cg = cg_solve(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = a_mat * x; }, rhs, 1e-12, 500);
    const Eigen::VectorXd ref = a_mat.ldlt().solve(rhs);
    const double err = (cg.x - ref).norm() / ref.norm();
    return {"cg-matches-dense", err <= 1e-8, "rel error = " + fmt(err)};
}

PropertyResult refine_decreases_objective(std::mt19937_64& rng) {
    const int w = 7, h = 7;
    const RasterImage img = random_image(rng, w, h, 3);
    const SparseAffinity lap = build_matting_laplacian(img, kDefaultMattingEpsilon);
    const IlluminationMap t_tilde{w, h, random_array(rng, lap.dimension(), 0.05, 1.0)};
    const AttentionMap att{w, h, random_array(rng, lap.dimension(), 0.0, 1.0), kDefaultGamma};

    SolverConfig cfg;
    const RefineResult rr = refine_illumination_detailed(t_tilde, lap, &att, cfg);
    const IlluminationMap raw{w, h, rr.unclamped};
    const double before = bcp_loss(t_tilde, t_tilde, lap, cfg.lambda, &att).total;
    const double after = bcp_loss(raw, t_tilde, lap, cfg.lambda, &att).total;
    return {"refine-objective-decrease", after <= before + 1e-12,
            "objective " + fmt(before) + " -> " + fmt(after)};
}

PropertyResult attention_monotone(std::mt19937_64& rng) {
    const RasterImage thermal = random_image(rng, 25, 40, 1);
    const AttentionMap att = build_attention(thermal, kDefaultGamma);
    const Eigen::ArrayXd v = thermal.plane(0);

    bool ok = (att.values >= 0.0).all() && (att.values <= 1.0).all() &&
              (att.values <= v + 1e-15).all();
    double worst = 0.0;
    std::uniform_int_distribution<Eigen::Index> pick(0, v.size() - 1);
    for (int k = 0; k < 1000 && ok; ++k) {
        const Eigen::Index i = pick(rng), j = pick(rng);
        if (v[i] <= v[j] && att.values[i] > att.values[j]) {
            ok = false;
            worst = att.values[i] - att.values[j];
        }
    }
    return {"attention-gamma-monotone", ok,
            ok ? "range, damping and order preserved" : "order violation = " + fmt(worst)};
}

PropertyResult net_gradient_fd(std::mt19937_64& rng) {
    const int w = 6, h = 6;
    const RasterImage visible = random_image(rng, w, h, 3);
    const RasterImage thermal = random_image(rng, w, h, 1, 0.2, 1.0);
    const AttentionMap att = build_attention(thermal, kDefaultGamma);
    const SparseAffinity lap = build_matting_laplacian(visible, kDefaultMattingEpsilon);
    const IlluminationMap t_tilde{w, h, random_array(rng, lap.dimension(), 0.05, 1.0)};

    NetworkParams params = init_network_params(7);
    const BackwardResult back = net_backward(params, visible, att, t_tilde, lap, kDefaultLambda);

    const auto eval = [&]() {
        const IlluminationMap t = net_forward(params, visible, att);
        return bcp_loss(t, t_tilde, lap, kDefaultLambda).total;
    };

    double worst = 0.0;
    std::uniform_int_distribution<size_t> layer_pick(0, params.layers.size() - 1);
    for (int k = 0; k < 6; ++k) {
        const size_t l = layer_pick(rng);
        auto& wm = params.layers[l].weights;
        std::uniform_int_distribution<Eigen::Index> rp(0, wm.rows() - 1), cp(0, wm.cols() - 1);
        const Eigen::Index r = rp(rng), c = cp(rng);
        worst = std::max(
            worst, fd_rel_err(eval, wm(r, c), back.grads.layers[l].weights(r, c), 1e-5));
    }
    for (int k = 0; k < 2; ++k) {
        const size_t l = layer_pick(rng);
        auto& bv = params.layers[l].bias;
        std::uniform_int_distribution<Eigen::Index> bp(0, bv.size() - 1);
        const Eigen::Index i = bp(rng);
        worst = std::max(worst, fd_rel_err(eval, bv[i], back.grads.layers[l].bias[i], 1e-5));
    }
    return {"net-gradient-fd", worst <= 1e-4, "max rel error = " + fmt(worst)};
}

PropertyResult detector_gradient_fd(std::mt19937_64& rng) {
    const int w = 6, h = 6;
    RasterImage enhanced = random_image(rng, w, h, 3, 0.01, 0.99);
    const RasterImage thermal = random_image(rng, w, h, 1, 0.6, 1.0); // mostly-foreground mask

    const StubDetectorResult base = stub_detector(enhanced, thermal);
    Eigen::ArrayXd d = enhanced.data();
    const auto eval = [&]() { return stub_detector({w, h, 3, d}, thermal).loss; };
    double worst = 0.0;
    std::uniform_int_distribution<Eigen::Index> pick(0, d.size() - 1);
    for (int k = 0; k < 8; ++k) {
        const Eigen::Index i = pick(rng);
        worst = std::max(worst, fd_rel_err(eval, d[i], base.gradient[i], 1e-5));
    }
    return {"detector-gradient-fd", worst <= 1e-4, "max rel error = " + fmt(worst)};
}

PropertyResult inverse_pair(std::mt19937_64& rng) {
    const int w = 6, h = 7;
    const RasterImage j = random_image(rng, w, h, 3);
    const IlluminationMap t{w, h, random_array(rng, static_cast<Eigen::Index>(w) * h, 0.2, 1.0)};
    AmbientLight ambient;
    ambient.value = Eigen::Array3d(0.05, 0.12, 0.2);

    const RasterImage low = resynthesize(j, t, ambient);
    const RasterImage back = recover(low, t, ambient, 0.2);
    const double worst = (back.data() - j.data()).abs().maxCoeff();
    return {"recover-resynthesize-inverse", worst <= 1e-9, "max abs error = " + fmt(worst)};
}

PropertyResult exact_recovery(std::mt19937_64& rng) {
    const int w = 20, h = 20;
    std::uniform_real_distribution<double> tstar_dist(0.2, 0.9);
    const double tstar = tstar_dist(rng);

    RasterImage j = random_image(rng, w, h, 3);
    Eigen::ArrayXd d = j.data();
    // Pin a lattice of unit pixels so every clipped window sees one.
    for (int r = std::min(kDefaultPatchRadius, h - 1); r < h; r += kDefaultPatchRadius + 1)
        for (int c = std::min(kDefaultPatchRadius, w - 1); c < w; c += kDefaultPatchRadius + 1)
            d[static_cast<Eigen::Index>(r) * w + c] = 1.0;
    j = {w, h, 3, std::move(d)};

    AmbientLight ambient;
    ambient.value = Eigen::Array3d(0.08, 0.1, 0.15);
    const RasterImage low =
        resynthesize(j, IlluminationMap::constant(w, h, tstar), ambient);
    const IlluminationMap t_tilde =
        initial_illumination(low, ambient, PatchSpec{}, kDefaultTMin);
    const double worst = (t_tilde.values - tstar).abs().maxCoeff();
    return {"illumination-exact-recovery", worst <= 1e-6,
            "t* = " + fmt(tstar) + ", max abs error = " + fmt(worst)};
}

} // namespace

std::vector<PropertyResult> run_selftest(std::uint64_t seed, bool inject_fault) {
    std::mt19937_64 rng(seed);
    std::vector<PropertyResult> results;
    const auto guard = [&](auto&& fn) {
        try {
            results.push_back(fn());
        } catch (const std::exception& e) {
            results.push_back({"unhandled-exception", false, e.what()});
        }
    };

    guard([&] { return laplacian_row_sums(rng, inject_fault); });
    guard([&] { return laplacian_symmetric(rng); });
    guard([&] { return laplacian_psd(rng); });
    guard([&] { return multiply_matches_dense(rng); });
    guard([&] { return smoothness_identity(rng); });
    guard([&] { return bcp_loss_gradient_fd(rng); });
    guard([&] { return cg_matches_dense(rng); });
    guard([&] { return refine_decreases_objective(rng); });
    guard([&] { return attention_monotone(rng); });
    guard([&] { return net_gradient_fd(rng); });
    guard([&] { return detector_gradient_fd(rng); });
    guard([&] { return inverse_pair(rng); });
    guard([&] { return exact_recovery(rng); });
    return results;
}

} // namespace bcp
