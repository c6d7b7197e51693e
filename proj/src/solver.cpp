#include "bcp/solver.hpp"

#include "bcp/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace bcp {

CgResult cg_solve(const LinearOperator& apply, const Eigen::VectorXd& rhs, double tolerance,
                  int max_iterations, const Eigen::VectorXd* x0) {
    if (!(tolerance > 0.0)) throw std::invalid_argument("cg tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("cg needs at least one iteration");

    const Eigen::Index n = rhs.size();
    const double rhs_norm = rhs.norm();

    CgResult res;
    if (rhs_norm == 0.0) {
        res.x = Eigen::VectorXd::Zero(n);
        return res;
    }

    Eigen::VectorXd x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
    if (x.size() != n) throw std::invalid_argument("warm start length does not match rhs");

    Eigen::VectorXd ax(n);
    apply(x, ax);
    Eigen::VectorXd r = rhs - ax;
    Eigen::VectorXd p = r;
    Eigen::VectorXd ap(n);
    double rr = r.squaredNorm();

    res.relative_residual = std::sqrt(rr) / rhs_norm;
    while (res.relative_residual > tolerance) {
        if (res.iterations >= max_iterations)
            throw SolverError("conjugate gradient failed to converge", res.iterations,
                              res.relative_residual);
        apply(p, ap);
        const double pap = p.dot(ap);
        if (!std::isfinite(pap) || pap <= 0.0)
            throw SolverError("conjugate gradient met a non-positive curvature direction",
                              res.iterations, res.relative_residual);
        const double alpha = rr / pap;
        x += alpha * p;
        r -= alpha * ap;
        const double rr_next = r.squaredNorm();
        if (!std::isfinite(rr_next))
            throw SolverError("conjugate gradient residual is not finite", res.iterations,
                              res.relative_residual);
        p = r + (rr_next / rr) * p;
        rr = rr_next;
        ++res.iterations;
        res.relative_residual = std::sqrt(rr) / rhs_norm;
    }
    res.x = std::move(x);
    return res;
}

RefineResult refine_illumination_detailed(const IlluminationMap& t_tilde,
                                          const SparseAffinity& lap,
                                          const AttentionMap* attention,
                                          const SolverConfig& cfg) {
    const Eigen::Index n = t_tilde.values.size();
    if (lap.dimension() != n)
        throw std::invalid_argument("affinity dimension does not match illumination length");

    Eigen::ArrayXd a = Eigen::ArrayXd::Ones(n);
    if (attention) {
        if (attention->values.size() != n)
            throw std::invalid_argument("attention length does not match illumination length");
        a = attention->values.max(kAttentionWeightFloor);
    }

    const LinearOperator apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        lap.multiply(x, y);
        y = (a * x.array() + cfg.lambda * y.array()).matrix();
    };

    const Eigen::VectorXd rhs = (a * t_tilde.values).matrix();
    const Eigen::VectorXd warm = t_tilde.values.matrix();
    CgResult cg = cg_solve(apply, rhs, cfg.tolerance, cfg.max_iterations, &warm);

    RefineResult out;
    out.iterations = cg.iterations;
    out.relative_residual = cg.relative_residual;
    out.unclamped = cg.x.array();
    out.t = {t_tilde.width, t_tilde.height, out.unclamped.max(cfg.t_min).min(1.0)};
    return out;
}

IlluminationMap refine_illumination(const IlluminationMap& t_tilde, const SparseAffinity& lap,
                                    const AttentionMap* attention, const SolverConfig& cfg) {
    return refine_illumination_detailed(t_tilde, lap, attention, cfg).t;
}

} // namespace bcp
