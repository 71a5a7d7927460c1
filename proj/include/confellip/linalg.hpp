#pragma once

#include <Eigen/Dense>
#include <utility>

#include "confellip/errors.hpp"

namespace confellip {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

/// Cholesky factor of a symmetric positive definite matrix, kept as the
/// lower triangle L with M = L L^T. All Sigma^{-1}-type applications in the
/// library go through this type: triangular solves, inverse quadratic
/// forms and log-determinants, never explicit inverses.
class SpdFactor {
public:
    /// Factorizes M. Inputs are symmetrized as (M + M^T)/2 when the
    /// relative asymmetry is below 1e-12; larger asymmetry is a DomainError.
    /// Throws NotPositiveDefinite if any pivot <= p * eps * max|diag(M)|.
    /// No regularization is applied on failure.
    static SpdFactor compute(const Matrix& m);

    Index dim() const { return lower_.rows(); }
    const Matrix& lower() const { return lower_; }

    Vector solve(const Vector& b) const;
    Matrix solve(const Matrix& b) const;

    /// b^T M^{-1} b, evaluated as ||L^{-1} b||^2.
    double inverse_quad_form(const Vector& b) const;

    /// log det(M) = 2 * sum log L_ii.
    double log_det() const;

private:
    explicit SpdFactor(Matrix lower) : lower_(std::move(lower)) {}
    Matrix lower_;
};

/// 2x2 block view of a symmetric p x p matrix split as p = k + l.
/// A is k x k (upper-left), C is l x l (lower-right), B is k x l.
struct BlockPartition {
    Matrix full;
    Index k = 0;
    Index l = 0;

    BlockPartition() = default;
    BlockPartition(Matrix m, Index k_dim, Index l_dim);

    Eigen::Block<const Matrix> a() const { return full.block(0, 0, k, k); }
    Eigen::Block<const Matrix> b() const { return full.block(0, k, k, l); }
    Eigen::Block<const Matrix> bt() const { return full.block(k, 0, l, k); }
    Eigen::Block<const Matrix> c() const { return full.block(k, k, l, l); }
};

/// Schur complement C - B^T A^{-1} B of the partition, the factor of A
/// being supplied by the caller. Result is symmetrized.
Matrix schur_complement(const BlockPartition& s, const SpdFactor& factor_a);

/// (lambda_min, lambda_max) of a symmetric matrix via a full symmetric
/// eigensolve. Works for indefinite input.
std::pair<double, double> sym_eigen_extremes(const Matrix& m);

/// (M + M^T)/2 after checking that the relative asymmetry is <= tol.
Matrix require_symmetric(const Matrix& m, double tol = 1e-12);

}  // namespace linalg
}  // namespace confellip
