#include "bcp/matting.hpp"

#include "bcp/parallel.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace bcp {

void SparseAffinity::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    if (x.size() != matrix_.rows())
        throw std::invalid_argument("vector length does not match affinity dimension");
    y.resize(matrix_.rows());
    parallel_for(matrix_.rows(), [&](long r0, long r1) {
        for (long r = r0; r < r1; ++r) {
            double acc = 0.0;
            for (Matrix::InnerIterator it(matrix_, r); it; ++it) acc += it.value() * x[it.col()];
            y[r] = acc;
        }
    });
}

SparseAffinity build_matting_laplacian(const RasterImage& img, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("matting epsilon must be positive");
    const int w = img.width();
    const int h = img.height();
    if (w < 3 || h < 3)
        throw std::invalid_argument("matting Laplacian needs at least a 3x3 image");

    const Eigen::Index n = img.pixel_count();
    const int wr = w - 2; // windows per row
    const long nwin = static_cast<long>(wr) * (h - 2);

    // One 9x9 contribution per fully-interior window:
    //   G_k = I9 - (1/9) * (1 1' + Xc (Sigma + eps/9 I3)^-1 Xc')
    // with Xc the mean-centered window colors (rows) and Sigma = Xc'Xc / 9.
    // Centered rows are orthogonal to the ones vector, so each G_k is PSD and
    // its rows sum to zero; both properties survive summation over windows.
    struct Block {
        Eigen::Index idx[9];
        Eigen::Matrix<double, 9, 9> g;
    };
    std::vector<Block> blocks(static_cast<size_t>(nwin));

    const int ch = img.channels();
    parallel_for(nwin, [&](long k0, long k1) {
        Eigen::Matrix<double, 9, 3> X;
        for (long k = k0; k < k1; ++k) {
            const int cr = static_cast<int>(k / wr) + 1; // window center
            const int cc = static_cast<int>(k % wr) + 1;
            Block& b = blocks[static_cast<size_t>(k)];
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int s = (dr + 1) * 3 + (dc + 1);
                    const Eigen::Index p = img.linear(cr + dr, cc + dc);
                    b.idx[s] = p;
                    for (int c = 0; c < 3; ++c)
                        X(s, c) = img.data()[(c % ch) * n + p];
                }
            const Eigen::RowVector3d mu = X.colwise().mean();
            const Eigen::Matrix<double, 9, 3> Xc = X.rowwise() - mu;
            const Eigen::Matrix3d sigma = (Xc.transpose() * Xc) / 9.0;
            const Eigen::Matrix3d reg = sigma + (epsilon / 9.0) * Eigen::Matrix3d::Identity();
            const Eigen::Matrix<double, 9, 9> inner =
                Eigen::Matrix<double, 9, 9>::Ones() + Xc * reg.llt().solve(Xc.transpose());
            b.g = Eigen::Matrix<double, 9, 9>::Identity() - inner / 9.0;
        }
    });

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(nwin) * 81);
    for (const Block& b : blocks)
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j)
                trips.emplace_back(static_cast<int>(b.idx[i]), static_cast<int>(b.idx[j]), b.g(i, j));
    blocks.clear();
    blocks.shrink_to_fit();

    SparseAffinity::Matrix lap(n, n);
    lap.setFromTriplets(trips.begin(), trips.end());
    return SparseAffinity(std::move(lap));
}

double smoothness_energy(const SparseAffinity& lap, const IlluminationMap& t) {
    if (t.values.size() != lap.dimension())
        throw std::invalid_argument("illumination length does not match affinity dimension");
    Eigen::VectorXd lt;
    lap.multiply(t.values.matrix(), lt);
    return t.values.matrix().dot(lt);
}

namespace {

Eigen::ArrayXd attention_weights(const AttentionMap* attention, Eigen::Index n) {
    if (!attention) return Eigen::ArrayXd::Ones(n);
    if (attention->values.size() != n)
        throw std::invalid_argument("attention length does not match illumination length");
    return attention->values;
}

} // namespace

LossBreakdown bcp_loss(const IlluminationMap& t, const IlluminationMap& t_tilde,
                       const SparseAffinity& lap, double lambda, const AttentionMap* attention) {
    const Eigen::Index n = t.values.size();
    if (t_tilde.values.size() != n)
        throw std::invalid_argument("illumination maps have mismatched lengths");
    const Eigen::ArrayXd a = attention_weights(attention, n);

    LossBreakdown out;
    out.lambda = lambda;
    out.data_term = (a * (t.values - t_tilde.values).square()).sum();
    out.smoothness_term = smoothness_energy(lap, t);
    out.total = (out.data_term + lambda * out.smoothness_term) / static_cast<double>(n);
    return out;
}

Eigen::ArrayXd bcp_loss_gradient(const IlluminationMap& t, const IlluminationMap& t_tilde,
                                 const SparseAffinity& lap, double lambda,
                                 const AttentionMap* attention) {
    const Eigen::Index n = t.values.size();
    if (t_tilde.values.size() != n)
        throw std::invalid_argument("illumination maps have mismatched lengths");
    const Eigen::ArrayXd a = attention_weights(attention, n);

    Eigen::VectorXd lt;
    lap.multiply(t.values.matrix(), lt);
    return (2.0 / static_cast<double>(n)) *
           (a * (t.values - t_tilde.values) + lambda * lt.array());
}

} // namespace bcp
