#include "confellip/asymptotics.hpp"

#include <cmath>

#include "confellip/specfun.hpp"

namespace confellip::asymptotics {

namespace {

using conformal::RegionKind;
using conformal::RegionOutcome;

Matrix with_ridge(const Matrix& sigma, double lambda) {
    Matrix shifted = linalg::require_symmetric(sigma);
    shifted.diagonal().array() += lambda;
    return shifted;
}

double log_det_of(const Matrix& m) {
    return linalg::SpdFactor::compute(m).log_det();
}

// log det(Sigma_lambda) - log det(Sigma_lambda^11); strictly increasing
// in lambda.
double log_det_ratio(const Matrix& sigma, int k, double lambda) {
    Matrix shifted = with_ridge(sigma, lambda);
    const double full = log_det_of(shifted);
    if (k == 0) return full;
    return full - log_det_of(shifted.topLeftCorner(k, k));
}

}  // namespace

LimitModel LimitModel::make(Matrix sigma, Index k, Index l, double lambda, Vector mean,
                            double q_inf) {
    if (lambda < 0.0) throw DomainError("ridge parameter must be nonnegative");
    if (q_inf < 0.0) throw DomainError("asymptotic quantile must be nonnegative");
    if (mean.size() != k + l) throw DimensionMismatch("mean dimension mismatch");
    Matrix shifted = with_ridge(sigma, lambda);
    linalg::SpdFactor::compute(shifted);  // reject non-SPD input up front
    return LimitModel{linalg::BlockPartition(std::move(shifted), k, l),
                      linalg::require_symmetric(sigma), lambda, std::move(mean), q_inf};
}

RegionOutcome asymptotic_ellipsoid(const LimitModel& model, const Vector& x) {
    const Index k = model.k();
    const Index l = model.l();
    if (x.size() != k) throw DimensionMismatch("input dimension mismatch");

    RegionOutcome out;
    if (k == 0) {
        out.shape = Matrix(model.blocks.c());
        out.center = model.mean;
        out.radius = model.q_inf;
    } else {
        linalg::SpdFactor factor11 = linalg::SpdFactor::compute(model.blocks.a());
        out.shape = linalg::schur_complement(model.blocks, factor11);
        const Vector xc = x - model.mean.head(k);
        const Vector solved = factor11.solve(xc);
        out.center = Matrix(model.blocks.bt()) * solved + model.mean.tail(l);
        out.radius = model.q_inf - xc.dot(solved);
    }
    out.kind = out.radius < 0.0 ? RegionKind::empty : RegionKind::ellipsoid;
    return out;
}

double gaussian_q_infinity(int k, int l, double alpha) {
    if (k < 0 || l < 1) throw DomainError("need k >= 0 and l >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    return specfun::chi2_quantile(k + l, 1.0 - alpha);
}

double gaussian_volume_moment(const Matrix& sigma, int k, int l, double alpha,
                              double q) {
    if (k < 1 || l < 1) throw DomainError("need k >= 1 and l >= 1");
    if (!(q > 0.0)) throw DomainError("moment order must be positive");
    Matrix sym = linalg::require_symmetric(sigma);
    if (sym.rows() != k + l) throw DimensionMismatch("Sigma must be (k+l) x (k+l)");

    const double q_inf = gaussian_q_infinity(k, l, alpha);
    const double log_det_schur = log_det_of(sym) - log_det_of(sym.topLeftCorner(k, k));
    const double v_l = specfun::unit_ball_volume(l);
    const double kk = 0.5 * k;
    const double c =
        std::pow(2.0, -kk) * std::pow(v_l, q) *
        specfun::euler_beta(kk, 0.5 * q * l + 1.0) / std::tgamma(kk);
    return c * std::exp(0.5 * q * log_det_schur) *
           std::pow(q_inf, 0.5 * (k + q * l)) *
           specfun::kummer_1f1(kk, 0.5 * (k + q * l) + 1.0, -0.5 * q_inf);
}

double gaussian_empty_probability(int k, int l, double alpha) {
    if (k < 1) throw DomainError("need k >= 1");
    if (l < 0) throw DomainError("need l >= 0");
    if (l == 0) return alpha;
    const double q_inf = gaussian_q_infinity(k, l, alpha);
    return 1.0 - specfun::chi2_cdf(k, q_inf);
}

double asymptotic_ball_volume(double q_norm, int l) {
    if (q_norm < 0.0) throw DomainError("squared-radius quantile must be nonnegative");
    return specfun::unit_ball_volume(l) * std::pow(q_norm, 0.5 * l);
}

TradeoffResult tradeoff_ratio(const Matrix& sigma, int k, int l, double alpha) {
    if (k < 0 || l < 1) throw DomainError("need k >= 0 and l >= 1");
    Matrix sym = linalg::require_symmetric(sigma);
    if (sym.rows() != k + l) throw DimensionMismatch("Sigma must be (k+l) x (k+l)");

    const double c_alpha = (k == 0)
                               ? 1.0
                               : specfun::chi2_quantile(k + l, 1.0 - alpha) /
                                     specfun::chi2_quantile(l, 1.0 - alpha);
    const double log_det_schur =
        (k == 0) ? log_det_of(sym)
                 : log_det_of(sym) - log_det_of(sym.topLeftCorner(k, k));
    const double log_det_22 = log_det_of(sym.bottomRightCorner(l, l));
    const double bound =
        c_alpha * std::exp((log_det_schur - log_det_22) / static_cast<double>(l));
    return TradeoffResult{c_alpha, bound, bound <= 1.0};
}

double solve_lambda0(const Matrix& sigma, int k, int l, double c) {
    if (k < 1 || l < 1) throw DomainError("need k >= 1 and l >= 1");
    if (!(c > 0.0)) throw DomainError("target ratio must be positive");
    Matrix sym = linalg::require_symmetric(sigma);
    if (sym.rows() != k + l) throw DimensionMismatch("Sigma must be (k+l) x (k+l)");

    const double log_det_22 = log_det_of(sym.bottomRightCorner(l, l));
    const double log_target = -static_cast<double>(l) * std::log(c) + log_det_22;

    const double at_zero = log_det_ratio(sym, k, 0.0);
    if (log_target < at_zero - 1e-12) {
        throw NoRoot("target det-ratio is below the lambda = 0 value");
    }
    if (log_target <= at_zero + 1e-14) return 0.0;

    double hi = 1.0;
    while (log_det_ratio(sym, k, hi) < log_target) {
        hi *= 2.0;
        if (hi > 1e12) throw NoRoot("target det-ratio is beyond the search guard");
    }
    double lo = 0.0;
    while (hi - lo > 1e-10 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (log_det_ratio(sym, k, mid) < log_target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Matrix asymptotic_mse_matrix(const Matrix& sigma, int k, int l, double lambda) {
    if (k < 1 || l < 1) throw DomainError("need k >= 1 and l >= 1");
    if (lambda < 0.0) throw DomainError("ridge parameter must be nonnegative");
    Matrix sym = linalg::require_symmetric(sigma);
    if (sym.rows() != k + l) throw DimensionMismatch("Sigma must be (k+l) x (k+l)");

    linalg::BlockPartition shifted(with_ridge(sym, lambda), k, l);
    linalg::SpdFactor factor11 = linalg::SpdFactor::compute(shifted.a());
    Matrix schur = linalg::schur_complement(shifted, factor11);

    // Sigma21 (Sigma_lambda^11)^{-2} Sigma12 = (inv11 * Sigma12)^T (inv11 * Sigma12)
    Matrix solved = factor11.solve(Matrix(shifted.b()));
    Matrix correction = Matrix::Identity(l, l) + solved.transpose() * solved;
    Matrix m = schur - lambda * correction;
    return 0.5 * (m + m.transpose());
}

}  // namespace confellip::asymptotics
