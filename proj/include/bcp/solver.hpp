#pragma once

#include "bcp/attention.hpp"
#include "bcp/bright_channel.hpp"
#include "bcp/matting.hpp"

#include <Eigen/Core>

#include <functional>

namespace bcp {

inline constexpr double kAttentionWeightFloor = 1e-3; // keeps diag(a) + lambda*L positive definite
inline constexpr double kDefaultCgTolerance = 1e-6;
inline constexpr int kDefaultCgMaxIterations = 2000;

struct SolverConfig {
    double lambda = kDefaultLambda;
    int max_iterations = kDefaultCgMaxIterations;
    double tolerance = kDefaultCgTolerance; // relative residual |Ax-b|/|b|
    double t_min = kDefaultTMin;
};

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double relative_residual = 0.0;
};

using LinearOperator = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Conjugate gradient for an SPD operator. Stops once |Ax - b|/|b| drops
// below tolerance; throws SolverError on stagnation past max_iterations or
// on a non-finite value. An optional x0 warm-starts the iteration.
CgResult cg_solve(const LinearOperator& apply, const Eigen::VectorXd& rhs,
                  double tolerance, int max_iterations,
                  const Eigen::VectorXd* x0 = nullptr);

struct RefineResult {
    IlluminationMap t;              // clamped into [t_min, 1]
    Eigen::ArrayXd unclamped;       // raw minimizer, for objective checks
    int iterations = 0;
    double relative_residual = 0.0;
};

// Minimizes the quadratic loss exactly: solves
//   (diag(a) + lambda * L) t = a .* t~
// by CG warm-started at t~, where a is the attention map floored at
// kAttentionWeightFloor (all ones when absent). The solution is then
// clamped into [t_min, 1].
RefineResult refine_illumination_detailed(const IlluminationMap& t_tilde,
                                          const SparseAffinity& lap,
                                          const AttentionMap* attention,
                                          const SolverConfig& cfg);

IlluminationMap refine_illumination(const IlluminationMap& t_tilde, const SparseAffinity& lap,
                                    const AttentionMap* attention, const SolverConfig& cfg);

} // namespace bcp
