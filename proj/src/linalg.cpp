#include "confellip/linalg.hpp"

#include <cmath>
#include <limits>

namespace confellip::linalg {

Matrix require_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("matrix is not square");
    }
    const double scale = m.cwiseAbs().maxCoeff();
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > tol * scale) {
        throw DomainError("matrix asymmetry exceeds tolerance");
    }
    return 0.5 * (m + m.transpose());
}

SpdFactor SpdFactor::compute(const Matrix& m) {
    Matrix a = require_symmetric(m);
    const Index p = a.rows();
    if (p == 0) {
        throw DimensionMismatch("cannot factorize an empty matrix");
    }
    const double max_diag = a.diagonal().cwiseAbs().maxCoeff();
    const double pivot_floor =
        static_cast<double>(p) * std::numeric_limits<double>::epsilon() * max_diag;

    Matrix lower = Matrix::Zero(p, p);
    for (Index j = 0; j < p; ++j) {
        double pivot = a(j, j);
        for (Index t = 0; t < j; ++t) pivot -= lower(j, t) * lower(j, t);
        if (pivot <= pivot_floor) {
            throw NotPositiveDefinite("pivot below threshold at column " +
                                      std::to_string(j));
        }
        lower(j, j) = std::sqrt(pivot);
        for (Index i = j + 1; i < p; ++i) {
            double s = a(i, j);
            for (Index t = 0; t < j; ++t) s -= lower(i, t) * lower(j, t);
            lower(i, j) = s / lower(j, j);
        }
    }
    return SpdFactor(std::move(lower));
}

Vector SpdFactor::solve(const Vector& b) const {
    if (b.size() != dim()) {
        throw DimensionMismatch("solve: vector length does not match factor");
    }
    Vector y = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdFactor::solve(const Matrix& b) const {
    if (b.rows() != dim()) {
        throw DimensionMismatch("solve: row count does not match factor");
    }
    Matrix y = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double SpdFactor::inverse_quad_form(const Vector& b) const {
    if (b.size() != dim()) {
        throw DimensionMismatch("inverse_quad_form: vector length mismatch");
    }
    Vector y = lower_.triangularView<Eigen::Lower>().solve(b);
    return y.squaredNorm();
}

double SpdFactor::log_det() const {
    return 2.0 * lower_.diagonal().array().log().sum();
}

BlockPartition::BlockPartition(Matrix m, Index k_dim, Index l_dim)
    : full(std::move(m)), k(k_dim), l(l_dim) {
    if (k < 0 || l < 0 || full.rows() != k + l || full.cols() != k + l) {
        throw DimensionMismatch("block partition does not tile the matrix");
    }
    full = require_symmetric(full);
}

Matrix schur_complement(const BlockPartition& s, const SpdFactor& factor_a) {
    if (factor_a.dim() != s.k) {
        throw DimensionMismatch("factor dimension does not match the A block");
    }
    Matrix ainv_b = factor_a.solve(Matrix(s.b()));
    Matrix result = Matrix(s.c()) - Matrix(s.bt()) * ainv_b;
    return 0.5 * (result + result.transpose());
}

std::pair<double, double> sym_eigen_extremes(const Matrix& m) {
    Matrix sym = require_symmetric(m, 1e-9);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NoConvergence("symmetric eigensolver failed");
    }
    const auto& ev = solver.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

}  // namespace confellip::linalg
