#include "confellip/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "confellip/specfun.hpp"

namespace confellip::conformal {

namespace {

void validate_dimensions(const Matrix& x, const Matrix& r) {
    if (x.rows() != r.rows()) {
        throw DimensionMismatch("calibration inputs and residuals disagree on n");
    }
    if (x.rows() < 2) throw DomainError("calibration set needs n >= 2");
    if (x.cols() < 1) throw DomainError("calibration set needs k >= 1");
    if (r.cols() < 1) throw DomainError("calibration set needs l >= 1");
}

double radius_from_quantile(double q, Index n) {
    const double s = (q + 1.0) / static_cast<double>(n);
    return (q + 1.0) / (1.0 - s) - 1.0;
}

}  // namespace

CalibrationSet::CalibrationSet(Matrix x_in, Matrix r_in)
    : x(std::move(x_in)), r(std::move(r_in)) {
    validate_dimensions(x, r);
}

CalibrationSet::CalibrationSet(Matrix x_in, Matrix y_in, Matrix yhat_in)
    : x(std::move(x_in)), r(), y(std::move(y_in)), yhat(std::move(yhat_in)) {
    if (y->rows() != yhat->rows() || y->cols() != yhat->cols()) {
        throw DimensionMismatch("outputs and predictions have different shapes");
    }
    r = *y - *yhat;
    validate_dimensions(x, r);
}

RegionOutcome RegionOutcome::make_full_space(Index l) {
    RegionOutcome out;
    out.kind = RegionKind::full_space;
    out.center = Vector::Zero(l);
    out.shape = Matrix::Identity(l, l);
    out.radius = std::numeric_limits<double>::infinity();
    return out;
}

bool RegionOutcome::contains(const Vector& z) const {
    switch (kind) {
        case RegionKind::full_space:
            return true;
        case RegionKind::empty:
            return false;
        case RegionKind::ellipsoid:
        case RegionKind::floored: {
            const Vector diff = z - center;
            const double qf =
                diff.dot(linalg::SpdFactor::compute(shape).solve(diff));
            return qf <= radius;
        }
    }
    return false;
}

RidgeStatistics build_ridge_statistics(const CalibrationSet& calib, double lambda) {
    if (lambda < 0.0) throw DomainError("ridge parameter must be nonnegative");
    const Index n = calib.n();
    const Index k = calib.k();
    const Index l = calib.l();
    const Index p = k + l;

    Matrix v(n, p);
    v.leftCols(k) = calib.x;
    v.rightCols(l) = calib.r;
    Vector mean = v.colwise().mean();
    Matrix centered = v.rowwise() - mean.transpose();

    Matrix sigma = centered.transpose() * centered / static_cast<double>(n);
    sigma.diagonal().array() += lambda;
    linalg::BlockPartition blocks(std::move(sigma), k, l);

    try {
        linalg::SpdFactor factor11 = linalg::SpdFactor::compute(blocks.a());
        linalg::SpdFactor factor_full = linalg::SpdFactor::compute(blocks.full);
        return RidgeStatistics{std::move(centered), std::move(mean), lambda,
                               std::move(blocks),   std::move(factor11),
                               std::move(factor_full)};
    } catch (const NotPositiveDefinite&) {
        throw NotPositiveDefinite(
            "ridge covariance is not positive definite: lambda too small for this sample");
    }
}

Vector leverage_diagonals(const RidgeStatistics& stats) {
    const Index n = stats.n();
    Matrix solved = stats.factor_full.solve(Matrix(stats.centered.transpose()));
    Vector out(n);
    for (Index i = 0; i < n; ++i) {
        out(i) = stats.centered.row(i).dot(solved.col(i)) / static_cast<double>(n);
    }
    return out;
}

Index conformal_index(Index n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("alpha must lie in (0, 1)");
    }
    if (alpha <= 1.0 / static_cast<double>(n + 1)) {
        throw AlphaTooSmall("alpha <= 1/(n+1): no conformal quantile exists");
    }
    const double m = (1.0 - alpha) * static_cast<double>(n + 1);
    const double rounded = std::round(m);
    Index idx;
    if (std::abs(m - rounded) < 1e-9 * static_cast<double>(n + 1)) {
        idx = static_cast<Index>(rounded);
    } else {
        idx = static_cast<Index>(std::ceil(m));
    }
    return std::clamp<Index>(idx, 1, n);
}

double conformal_quantile(const Vector& leverage, double alpha) {
    const Index n = leverage.size();
    const Index idx = conformal_index(n, alpha);
    std::vector<double> scaled(leverage.data(), leverage.data() + n);
    for (double& s : scaled) s *= static_cast<double>(n);
    std::nth_element(scaled.begin(), scaled.begin() + (idx - 1), scaled.end());
    return scaled[idx - 1];
}

RegionOutcome region_from_statistics(const RidgeStatistics& stats, double q,
                                     const Vector& x_new) {
    const Index n = stats.n();
    const Index k = stats.k();
    const Index l = stats.l();
    if (x_new.size() != k) {
        throw DimensionMismatch("test input dimension does not match calibration");
    }
    if (q >= static_cast<double>(n - 1)) {
        return RegionOutcome::make_full_space(l);
    }

    RegionOutcome out;
    out.shape = linalg::schur_complement(stats.blocks, stats.factor11);
    const Vector xc = x_new - stats.mean.head(k);
    const Vector solved = stats.factor11.solve(xc);
    out.center = Matrix(stats.blocks.bt()) * solved + stats.mean.tail(l);
    out.radius = radius_from_quantile(q, n) - xc.dot(solved);
    out.kind = out.radius < 0.0 ? RegionKind::empty : RegionKind::ellipsoid;
    return out;
}

RegionOutcome ccle_region(const CalibrationSet& calib, const Vector& x_new, double alpha,
                          double lambda) {
    RidgeStatistics stats = build_ridge_statistics(calib, lambda);
    const double q = conformal_quantile(leverage_diagonals(stats), alpha);
    return region_from_statistics(stats, q, x_new);
}

Vector corrected_center(const CalibrationSet& calib, const Vector& x_new,
                        const Vector& yhat_new, double lambda) {
    if (yhat_new.size() != calib.l()) {
        throw DimensionMismatch("prediction dimension does not match residuals");
    }
    RidgeStatistics stats = build_ridge_statistics(calib, lambda);
    const Vector xc = x_new - stats.mean.head(calib.k());
    const Vector solved = stats.factor11.solve(xc);
    return Matrix(stats.blocks.bt()) * solved + stats.mean.tail(calib.l()) + yhat_new;
}

Vector exact_score_matrix(const CalibrationSet& calib, const Vector& x_new,
                          const Vector& z, double lambda) {
    const Index n = calib.n();
    const Index k = calib.k();
    const Index l = calib.l();
    const Index p = k + l;
    if (x_new.size() != k || z.size() != l) {
        throw DimensionMismatch("candidate dimensions do not match calibration");
    }

    Matrix v(n + 1, p);
    v.topLeftCorner(n, k) = calib.x;
    v.topRightCorner(n, l) = calib.r;
    v.row(n).head(k) = x_new.transpose();
    v.row(n).tail(l) = z.transpose();

    const Vector mean = v.colwise().mean();
    Matrix w = v.rowwise() - mean.transpose();

    Matrix gram = w.transpose() * w;
    gram.diagonal().array() += static_cast<double>(n) * lambda;
    linalg::SpdFactor factor = linalg::SpdFactor::compute(gram);

    Vector scores(n + 1);
    for (Index i = 0; i <= n; ++i) {
        scores(i) =
            static_cast<double>(n) * factor.inverse_quad_form(w.row(i).transpose());
    }
    return scores;
}

ScoreMachinery::ScoreMachinery(const CalibrationSet& calib, const Vector& x_new,
                               double lambda)
    : stats_(build_ridge_statistics(calib, lambda)), x_new_(x_new) {
    const Index n = stats_.n();
    if (x_new_.size() != stats_.k()) {
        throw DimensionMismatch("test input dimension does not match calibration");
    }
    const double dn = static_cast<double>(n);
    w_head_ = -1.0 / std::sqrt(dn * (dn + 1.0));
    w_last_ = std::sqrt(dn / (dn + 1.0));
    v_norm_ = std::sqrt(dn / (dn + 1.0));

    // (1/n) B Sigma^{-1}: one factorization, reused for every candidate z.
    projector_rows_ = stats_.factor_full.solve(Matrix(stats_.centered.transpose()))
                          .transpose() /
                      dn;

    cn_diag_.resize(n + 1);
    for (Index i = 0; i < n; ++i) {
        cn_diag_(i) = stats_.centered.row(i).dot(projector_rows_.row(i)) +
                      1.0 / (dn * (dn + 1.0));
    }
    cn_diag_(n) = dn / (dn + 1.0);
}

Vector ScoreMachinery::r_of(const Vector& z) const {
    if (z.size() != stats_.l()) {
        throw DimensionMismatch("candidate residual dimension mismatch");
    }
    Vector stacked(stats_.p());
    stacked.head(stats_.k()) = x_new_;
    stacked.tail(stats_.l()) = z;
    return v_norm_ * (stacked - stats_.mean);
}

ScoreMachinery::Eval ScoreMachinery::fast_score_eval(const Vector& z) const {
    const Index n = stats_.n();
    const double dn = static_cast<double>(n);
    const Vector r = r_of(z);
    const double d = stats_.factor_full.inverse_quad_form(r) / dn;

    Vector b(n + 1);
    b.head(n) = projector_rows_ * r;
    b.head(n).array() -= w_head_;
    b(n) = -w_last_;

    const double score_new = dn * dn / (dn + 1.0) * d / (1.0 + d);
    return Eval{score_new, d, std::move(b)};
}

double ScoreMachinery::candidate_score(const Vector& z) const {
    const double dn = static_cast<double>(stats_.n());
    const Vector r = r_of(z);
    const double d = stats_.factor_full.inverse_quad_form(r) / dn;
    return dn * dn / (dn + 1.0) * d / (1.0 + d);
}

Vector ScoreMachinery::scores_at(const Vector& z) const {
    const Index n = stats_.n();
    const double dn = static_cast<double>(n);
    const Eval eval = fast_score_eval(z);
    Vector scores(n + 1);
    for (Index i = 0; i <= n; ++i) {
        scores(i) = dn * cn_diag_(i) - dn * eval.b(i) * eval.b(i) / (1.0 + eval.d);
    }
    return scores;
}

bool ScoreMachinery::exact_region_membership(const Vector& z, double alpha) const {
    const Index n = stats_.n();
    const Index idx = conformal_index(n, alpha);
    const Vector scores = scores_at(z);
    std::vector<double> head(scores.data(), scores.data() + n);
    std::nth_element(head.begin(), head.begin() + (idx - 1), head.end());
    return scores(n) <= head[idx - 1];
}

double region_volume(const RegionOutcome& region) {
    switch (region.kind) {
        case RegionKind::full_space:
            return std::numeric_limits<double>::infinity();
        case RegionKind::empty:
            return 0.0;
        case RegionKind::ellipsoid:
        case RegionKind::floored: {
            const Index l = region.shape.rows();
            const double log_det = linalg::SpdFactor::compute(region.shape).log_det();
            return specfun::unit_ball_volume(static_cast<int>(l)) *
                   std::exp(0.5 * log_det) *
                   std::pow(region.radius, 0.5 * static_cast<double>(l));
        }
    }
    return 0.0;
}

double region_eccentricity(const RegionOutcome& region) {
    if (region.kind == RegionKind::full_space) {
        throw UndefinedMetric("eccentricity is undefined for the full space");
    }
    const auto [lo, hi] = linalg::sym_eigen_extremes(region.shape);
    if (!(hi > 0.0)) throw DomainError("shape matrix is not positive definite");
    return std::sqrt(1.0 - lo / hi);
}

RegionMetrics region_metrics(const RegionOutcome& region) {
    return RegionMetrics{region_volume(region), region_eccentricity(region)};
}

RegionOutcome apply_volume_floor(const RegionOutcome& region, double v_min) {
    if (!(v_min > 0.0)) throw DomainError("volume floor must be positive");
    if (region.kind == RegionKind::full_space) {
        throw DomainError("cannot floor the full space");
    }
    if (region_volume(region) >= v_min) {
        return region;
    }
    const Index l = region.shape.rows();
    const double log_det = linalg::SpdFactor::compute(region.shape).log_det();
    const double v_l = specfun::unit_ball_volume(static_cast<int>(l));
    const double eps =
        std::pow(v_min / (v_l * std::exp(0.5 * log_det)), 1.0 / static_cast<double>(l));

    RegionOutcome out = region;
    out.kind = RegionKind::floored;
    out.radius = std::max(region.radius, eps * eps);
    out.floor_epsilon = eps;
    return out;
}

Ball ball_region(const Matrix& residuals, const Vector& center, double alpha) {
    if (center.size() != residuals.cols()) {
        throw DimensionMismatch("ball center dimension does not match residuals");
    }
    const Index n = residuals.rows();
    const Index idx = conformal_index(n, alpha);
    std::vector<double> norms(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        norms[static_cast<std::size_t>(i)] = residuals.row(i).squaredNorm();
    }
    std::nth_element(norms.begin(), norms.begin() + (idx - 1), norms.end());
    return Ball{center, norms[static_cast<std::size_t>(idx - 1)]};
}

Ball ball_region(const CalibrationSet& calib, const Vector& center, double alpha) {
    return ball_region(calib.r, center, alpha);
}

double ball_volume(const Ball& ball, Index l) {
    return specfun::unit_ball_volume(static_cast<int>(l)) *
           std::pow(ball.squared_radius, 0.5 * static_cast<double>(l));
}

}  // namespace confellip::conformal
