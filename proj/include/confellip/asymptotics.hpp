#pragma once

#include "confellip/conformal.hpp"
#include "confellip/linalg.hpp"

namespace confellip::asymptotics {

/// Population-level model: dispersion matrix, ridge shift, mean and the
/// asymptotic quantile q_{1-alpha} of the whitened squared norm. For
/// non-Gaussian data the quantile is a caller-supplied plug-in; nothing
/// here assumes ellipticity silently.
struct LimitModel {
    linalg::BlockPartition blocks;  // Sigma + lambda I, partitioned k / l
    Matrix sigma;                   // Sigma itself (no ridge shift)
    double lambda = 0.0;
    Vector mean;                    // population mean of (X, R)
    double q_inf = 0.0;             // asymptotic quantile, >= 0

    static LimitModel make(Matrix sigma, Index k, Index l, double lambda, Vector mean,
                           double q_inf);

    Index k() const { return blocks.k; }
    Index l() const { return blocks.l; }
};

/// Limit of the prediction region at input x: shape the Schur complement
/// of Sigma + lambda I, center the population linear conditional
/// expectation, radius q_inf minus the input Mahalanobis term. Supports
/// k = 0, where the region is the plain Mahalanobis ellipsoid on residuals.
conformal::RegionOutcome asymptotic_ellipsoid(const LimitModel& model, const Vector& x);

/// Gaussian asymptotic quantile: chi-squared(k + l) quantile at 1 - alpha.
double gaussian_q_infinity(int k, int l, double alpha);

/// Closed-form limit of E[Vol^q] for Gaussian data with lambda = 0:
/// C_{k,l,q} det(Sigma/Sigma11)^{q/2} q_inf^{(k+ql)/2}
///   1F1(k/2, (k+ql)/2 + 1, -q_inf/2).
double gaussian_volume_moment(const Matrix& sigma, int k, int l, double alpha, double q);

/// Limit probability of an empty region for Gaussian data:
/// 1 - F_{chi2(k)}(F^{-1}_{chi2(k+l)}(1 - alpha)).
double gaussian_empty_probability(int k, int l, double alpha);

/// Deterministic limit volume of the norm-residual ball:
/// v_l q_norm^{l/2} with q_norm the 1-alpha quantile of ||R||^2.
double asymptotic_ball_volume(double q_norm, int l);

struct TradeoffResult {
    double c_alpha;  // quantile ratio chi2(k+l) / chi2(l) at 1 - alpha
    double bound;    // c_alpha (det(Sigma/Sigma11)/det(Sigma22))^{1/l}
    bool satisfied;  // bound <= 1: the ellipsoid beats the ball in the limit
};

/// Volume-comparison ratio for Gaussian spherical factors. For general
/// spherical factors pass a one-dimensional quantile callback instead.
TradeoffResult tradeoff_ratio(const Matrix& sigma, int k, int l, double alpha);

/// Solves det(Sigma_lambda0) = c^{-l} det(Sigma_lambda0^11) det(Sigma22)
/// by bisection on the strictly increasing map
/// lambda -> det(Sigma_lambda)/det(Sigma_lambda^11).
double solve_lambda0(const Matrix& sigma, int k, int l, double c);

/// Asymptotic mean-squared-error matrix of the corrected predictor:
/// M_lambda = Sigma_lambda/Sigma_lambda^11
///            - lambda (I + Sigma21 (Sigma_lambda^11)^{-2} Sigma12).
Matrix asymptotic_mse_matrix(const Matrix& sigma, int k, int l, double lambda);

}  // namespace confellip::asymptotics
