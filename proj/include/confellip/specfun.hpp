#pragma once

#include "confellip/errors.hpp"

namespace confellip::specfun {

/// ln Gamma(x) for x > 0.
double log_gamma(double x);

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
/// Series expansion for x < a + 1, continued fraction otherwise.
double reg_lower_gamma(double a, double x);

/// CDF of the chi-squared distribution with dof degrees of freedom.
double chi2_cdf(int dof, double x);

/// Quantile of the chi-squared distribution: F^{-1}_{chi2(dof)}(p) for
/// p in [0, 1). Bracketing bisection followed by Newton polish.
double chi2_quantile(int dof, double p);

/// Kummer confluent hypergeometric function 1F1(a, b, x). Negative
/// arguments are routed through the Kummer transform
/// 1F1(a,b,x) = e^x 1F1(b-a, b, -x) to avoid cancellation.
double kummer_1f1(double a, double b, double x);

/// Euler Beta via exp(lgamma(x) + lgamma(y) - lgamma(x+y)).
double euler_beta(double x, double y);

/// Volume of the unit ball in dimension l: pi^{l/2} / Gamma(l/2 + 1).
double unit_ball_volume(int l);

/// Half-integer Matern kernel parameters. Smoothness nu is restricted to
/// {1/2, 3/2, 5/2, 7/2}, the orders with closed forms.
struct MaternParams {
    double nu = 1.5;
    double sigma2 = 1.0;
    double length = 1.0;

    MaternParams() = default;
    MaternParams(double nu_, double sigma2_, double length_);
};

/// k_nu(h) with H = |h| sqrt(2 nu) / L, e.g.
/// k_{3/2}(h) = sigma^2 (1 + H) exp(-H).
double matern_kernel(const MaternParams& params, double h);

}  // namespace confellip::specfun
