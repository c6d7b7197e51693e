#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bcp/errors.hpp"
#include "bcp/solver.hpp"

#include "oracles.hpp"

#include <Eigen/Dense>

using namespace bcp;

namespace {

// Random SPD matrix A = B'B + d*I.
Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double diag = 0.5) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = uni(rng);
    return B.transpose() * B + diag * Eigen::MatrixXd::Identity(n, n);
}

LinearOperator matvec_of(const Eigen::MatrixXd& A) {
    return [&A](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = A * x; };
}

// Dense solve of the refinement system (diag(a) + lambda L) t = a .* t~.
Eigen::VectorXd dense_refine(const IlluminationMap& t_tilde, const Eigen::MatrixXd& L,
                             const Eigen::ArrayXd* attention, double lambda) {
    Eigen::ArrayXd a = attention
                           ? attention->max(kAttentionWeightFloor).eval()
                           : Eigen::ArrayXd::Ones(t_tilde.values.size()).eval();
    Eigen::MatrixXd A = lambda * L;
    A.diagonal() += a.matrix();
    return A.ldlt().solve((a * t_tilde.values).matrix());
}

} // namespace

TEST_CASE("the identity system converges in one iteration") {
    Eigen::VectorXd rhs(4);
    rhs << 1.0, -2.0, 0.5, 3.0;
    CgResult res = cg_solve([](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = x; }, rhs,
                            1e-12, 10);
    CHECK(res.iterations == 1);
    CHECK((res.x - rhs).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("a zero right-hand side returns the zero vector") {
    auto rng = oracles::make_rng(601);
    Eigen::MatrixXd A = random_spd(6, rng);
    CgResult res = cg_solve(matvec_of(A), Eigen::VectorXd::Zero(6), 1e-10, 50);
    CHECK(res.x.isZero(0.0));
    CHECK(res.iterations == 0);
}

TEST_CASE("conjugate gradients agree with a dense factorization") {
    auto rng = oracles::make_rng(602);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd A = random_spd(10, rng);
    Eigen::VectorXd rhs(10);
    for (int i = 0; i < 10; ++i) rhs[i] = uni(rng);
    CgResult res = cg_solve(matvec_of(A), rhs, 1e-12, 200);
    Eigen::VectorXd direct = A.ldlt().solve(rhs);
    CHECK((res.x - direct).norm() / direct.norm() <= 1e-8);
    CHECK(res.relative_residual <= 1e-12);
}

TEST_CASE("iteration counts stay near the exact-arithmetic dimension bound") {
    auto rng = oracles::make_rng(603);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int n : {10, 25, 50}) {
        Eigen::MatrixXd A = random_spd(n, rng, 1.0);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) rhs[i] = uni(rng);
        CgResult res = cg_solve(matvec_of(A), rhs, 1e-10, 4 * n);
        // rounding can push a handful of iterations past the n-step theory
        CHECK(res.iterations <= n + n / 2);
        CHECK(res.relative_residual <= 1e-10);
    }
    // a well-conditioned system converges far below the bound
    Eigen::MatrixXd near_identity = Eigen::MatrixXd::Identity(40, 40);
    near_identity += 0.01 * random_spd(40, rng, 0.0);
    Eigen::VectorXd rhs(40);
    for (int i = 0; i < 40; ++i) rhs[i] = uni(rng);
    CgResult quick = cg_solve(matvec_of(near_identity), rhs, 1e-10, 160);
    CHECK(quick.iterations <= 20);
}

TEST_CASE("indefinite operators and stagnation raise solver errors") {
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(
        cg_solve([](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = -x; }, rhs, 1e-10, 10),
        SolverError);

    auto rng = oracles::make_rng(604);
    Eigen::MatrixXd hard = random_spd(30, rng, 1e-8);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(30);
    try {
        cg_solve(matvec_of(hard), b, 1e-14, 1);
        // 1 iteration cannot reach 1e-14 on a generic 30-dim system
        CHECK(false);
    } catch (const SolverError& e) {
        CHECK(e.iterations() >= 1);
        CHECK(e.residual() > 0.0);
    }
}

TEST_CASE("lambda zero leaves the initial illumination untouched") {
    auto rng = oracles::make_rng(605);
    RasterImage img = oracles::random_image(6, 6, 3, rng);
    SparseAffinity lap = build_matting_laplacian(img, 1e-4);
    IlluminationMap tt = oracles::random_map(6, 6, rng, 0.1, 1.0);
    SolverConfig cfg;
    cfg.lambda = 0.0;
    RefineResult res = refine_illumination_detailed(tt, lap, nullptr, cfg);
    for (Eigen::Index i = 0; i < tt.values.size(); ++i) CHECK(res.t.values[i] == tt.values[i]);
}

TEST_CASE("a constant initial map is already stationary") {
    auto rng = oracles::make_rng(606);
    RasterImage img = oracles::random_image(6, 5, 3, rng);
    SparseAffinity lap = build_matting_laplacian(img, 1e-4);
    IlluminationMap tt = IlluminationMap::constant(6, 5, 0.42);
    SolverConfig cfg;
    cfg.lambda = 5.0;
    RefineResult res = refine_illumination_detailed(tt, lap, nullptr, cfg);
    for (Eigen::Index i = 0; i < tt.values.size(); ++i)
        CHECK(res.t.values[i] == doctest::Approx(0.42).epsilon(1e-10));
}

TEST_CASE("refinement agrees with a dense solve and lowers the objective") {
    auto rng = oracles::make_rng(607);
    for (int trial = 0; trial < 5; ++trial) {
        RasterImage img = oracles::random_image(6, 6, 3, rng);
        SparseAffinity lap = build_matting_laplacian(img, 1e-4);
        Eigen::MatrixXd L = oracles::dense_matting_laplacian(img, 1e-4);
        IlluminationMap tt = oracles::random_map(6, 6, rng, 0.1, 1.0);
        SolverConfig cfg;
        cfg.lambda = 0.1;
        cfg.tolerance = 1e-12;
        RefineResult res = refine_illumination_detailed(tt, lap, nullptr, cfg);
        Eigen::VectorXd direct = dense_refine(tt, L, nullptr, cfg.lambda);
        CHECK((res.unclamped.matrix() - direct).norm() / direct.norm() <= 1e-8);

        IlluminationMap raw{6, 6, res.unclamped};
        CHECK(bcp_loss(raw, tt, lap, cfg.lambda).total <=
              bcp_loss(tt, tt, lap, cfg.lambda).total + 1e-12);
    }
}

TEST_CASE("attention-weighted refinement matches its dense counterpart") {
    auto rng = oracles::make_rng(608);
    RasterImage img = oracles::random_image(8, 8, 3, rng);
    SparseAffinity lap = build_matting_laplacian(img, 1e-4);
    Eigen::MatrixXd L = oracles::dense_matting_laplacian(img, 1e-4);
    IlluminationMap tt = oracles::random_map(8, 8, rng, 0.1, 1.0);

    // zero attention over an interior block: those pixels are held only by
    // the smoothness term and relax toward values set by their surroundings
    Eigen::ArrayXd av = oracles::random_map(8, 8, rng, 0.5, 1.0).values;
    for (int r = 3; r <= 5; ++r)
        for (int c = 3; c <= 5; ++c) av[r * 8 + c] = 0.0;
    AttentionMap att{8, 8, av, 2.0};

    SolverConfig cfg;
    cfg.lambda = 0.5;
    cfg.tolerance = 1e-12;
    RefineResult res = refine_illumination_detailed(tt, lap, &att, cfg);
    Eigen::VectorXd direct = dense_refine(tt, L, &att.values, cfg.lambda);
    CHECK((res.unclamped.matrix() - direct).norm() / direct.norm() <= 1e-8);

    // the weighted objective cannot rise
    const double at_start = bcp_loss(tt, tt, lap, cfg.lambda, &att).total;
    const double at_end = bcp_loss({8, 8, res.unclamped}, tt, lap, cfg.lambda, &att).total;
    CHECK(at_end <= at_start + 1e-12);
}

TEST_CASE("solutions are clamped into the illumination range") {
    auto rng = oracles::make_rng(609);
    RasterImage img = oracles::random_image(6, 6, 3, rng);
    SparseAffinity lap = build_matting_laplacian(img, 1e-4);
    IlluminationMap tt = oracles::random_map(6, 6, rng, 0.05, 0.2);
    SolverConfig cfg;
    cfg.t_min = 0.15;
    RefineResult res = refine_illumination_detailed(tt, lap, nullptr, cfg);
    CHECK(res.t.values.minCoeff() >= 0.15);
    CHECK(res.t.values.maxCoeff() <= 1.0);
}

TEST_CASE("a converged answer is stable under more iterations") {
    auto rng = oracles::make_rng(610);
    RasterImage img = oracles::random_image(7, 7, 3, rng);
    SparseAffinity lap = build_matting_laplacian(img, 1e-4);
    IlluminationMap tt = oracles::random_map(7, 7, rng, 0.1, 1.0);
    SolverConfig cfg;
    cfg.lambda = 0.2;
    cfg.tolerance = 1e-10;
    cfg.max_iterations = 500;
    RefineResult once = refine_illumination_detailed(tt, lap, nullptr, cfg);
    cfg.max_iterations = 1000;
    RefineResult twice = refine_illumination_detailed(tt, lap, nullptr, cfg);
    CHECK((once.unclamped - twice.unclamped).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("mismatched dimensions are rejected") {
    auto rng = oracles::make_rng(611);
    RasterImage img = oracles::random_image(5, 5, 3, rng);
    SparseAffinity lap = build_matting_laplacian(img, 1e-4);
    IlluminationMap tt = IlluminationMap::constant(4, 4, 0.5);
    SolverConfig cfg;
    CHECK_THROWS_AS(refine_illumination_detailed(tt, lap, nullptr, cfg), std::invalid_argument);
}
