#pragma once

#include "bcp/attention.hpp"
#include "bcp/bright_channel.hpp"
#include "bcp/image.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace bcp {

inline constexpr double kDefaultMattingEpsilon = 1e-4;
inline constexpr double kDefaultLambda = 1e-2;

// Symmetric sparse affinity operator over pixel pairs, assembled as a
// graph Laplacian: rows sum to zero and the matrix is PSD. Nonzeros only
// couple pixels that share at least one 3x3 window.
class SparseAffinity {
public:
    using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    SparseAffinity() = default;
    explicit SparseAffinity(Matrix laplacian) : matrix_(std::move(laplacian)) {}

    Eigen::Index dimension() const { return matrix_.rows(); }
    const Matrix& matrix() const { return matrix_; }

    // y = L * x, row-parallel, bit-identical for any worker count.
    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;

private:
    Matrix matrix_;
};

// Terms of the unsupervised bright-channel loss. data_term and
// smoothness_term are unnormalized sums; total = (data + lambda*smooth)/N.
struct LossBreakdown {
    double data_term = 0.0;
    double smoothness_term = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

// Closed-form matting Laplacian over fully-interior 3x3 windows:
//   L(i,j) = sum over windows k holding i and j of
//            delta_ij - (1/9) * (1 + (I_i - mu_k)' (Sigma_k + (eps/9) Id)^-1 (I_j - mu_k))
// with mu_k / Sigma_k the window mean and covariance of the RGB values.
SparseAffinity build_matting_laplacian(const RasterImage& img, double epsilon);

// Quadratic form t' L t. Equals the pairwise affinity energy
// sum w_ij (t_i - t_j)^2 up to the graph-Laplacian factor of 2; the
// quadratic form is the canonical energy here.
double smoothness_energy(const SparseAffinity& lap, const IlluminationMap& t);

// Full loss: sum_p a_p (t_p - t~_p)^2 + lambda * t'Lt, normalized by N.
// a_p comes from the attention map when supplied, else 1.
LossBreakdown bcp_loss(const IlluminationMap& t, const IlluminationMap& t_tilde,
                       const SparseAffinity& lap, double lambda,
                       const AttentionMap* attention = nullptr);

// Gradient of bcp_loss w.r.t. t: (2/N) * (a .* (t - t~) + lambda * L t).
Eigen::ArrayXd bcp_loss_gradient(const IlluminationMap& t, const IlluminationMap& t_tilde,
                                 const SparseAffinity& lap, double lambda,
                                 const AttentionMap* attention = nullptr);

} // namespace bcp
