#include "confellip/specfun.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace confellip::specfun {

namespace {

constexpr double kSeriesEps = 1e-16;
constexpr int kMaxTerms = 100000;

// Series for P(a, x), valid and fast for x < a + 1.
double lower_gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int i = 1; i < kMaxTerms; ++i) {
        term *= x / (a + i);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kSeriesEps) {
            return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
        }
    }
    throw NoConvergence("incomplete gamma series did not converge");
}

// Modified Lentz continued fraction for Q(a, x) = 1 - P(a, x), x >= a + 1.
double upper_gamma_cf(double a, double x) {
    const double tiny = std::numeric_limits<double>::min() / kSeriesEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxTerms; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kSeriesEps) {
            return h * std::exp(-x + a * std::log(x) - log_gamma(a));
        }
    }
    throw NoConvergence("incomplete gamma continued fraction did not converge");
}

double chi2_pdf(int dof, double x) {
    const double half = 0.5 * dof;
    if (x <= 0.0) return 0.0;
    return std::exp((half - 1.0) * std::log(x) - 0.5 * x - half * M_LN2 - log_gamma(half));
}

}  // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) {
        throw DomainError("log_gamma requires x > 0");
    }
    return std::lgamma(x);
}

double reg_lower_gamma(double a, double x) {
    if (!(a > 0.0)) throw DomainError("reg_lower_gamma requires a > 0");
    if (x < 0.0) throw DomainError("reg_lower_gamma requires x >= 0");
    if (x == 0.0) return 0.0;
    double p = (x < a + 1.0) ? lower_gamma_series(a, x) : 1.0 - upper_gamma_cf(a, x);
    if (p < 0.0) p = 0.0;
    if (p > 1.0) p = 1.0;
    return p;
}

double chi2_cdf(int dof, double x) {
    if (dof < 1) throw DomainError("chi2_cdf requires dof >= 1");
    if (x <= 0.0) return 0.0;
    return reg_lower_gamma(0.5 * dof, 0.5 * x);
}

double chi2_quantile(int dof, double p) {
    if (dof < 1) throw DomainError("chi2_quantile requires dof >= 1");
    if (!(p >= 0.0 && p < 1.0)) {
        throw DomainError("chi2_quantile requires p in [0, 1)");
    }
    if (p == 0.0) return 0.0;

    double lo = 0.0;
    double hi = dof + 10.0 * std::sqrt(2.0 * dof) + 10.0;
    while (chi2_cdf(dof, hi) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw NoConvergence("chi2_quantile bracket expansion failed");
    }
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(dof, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 5; ++it) {
        const double f = chi2_cdf(dof, x) - p;
        const double df = chi2_pdf(dof, x);
        if (df <= 0.0) break;
        const double step = f / df;
        const double next = x - step;
        if (next <= lo || next >= hi) break;
        x = next;
        if (std::abs(step) < 1e-14 * (1.0 + x)) break;
    }
    return x;
}

double kummer_1f1(double a, double b, double x) {
    if (b <= 0.0 && b == std::floor(b)) {
        throw DomainError("kummer_1f1: b must not be a nonpositive integer");
    }
    if (x == 0.0) return 1.0;
    if (x < 0.0) {
        return std::exp(x) * kummer_1f1(b - a, b, -x);
    }
    double term = 1.0;
    double sum = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int j = 0; j < kMaxTerms; ++j) {
        term *= (a + j) * x / ((b + j) * (j + 1));
        sum += term;
        if (std::abs(term) < kSeriesEps * std::abs(sum) &&
            std::abs(prev) < kSeriesEps * std::abs(sum)) {
            return sum;
        }
        prev = term;
    }
    throw NoConvergence("kummer_1f1 series exceeded the term budget");
}

double euler_beta(double x, double y) {
    return std::exp(log_gamma(x) + log_gamma(y) - log_gamma(x + y));
}

double unit_ball_volume(int l) {
    if (l < 1) throw DomainError("unit_ball_volume requires l >= 1");
    return std::pow(M_PI, 0.5 * l) / std::tgamma(0.5 * l + 1.0);
}

MaternParams::MaternParams(double nu_, double sigma2_, double length_)
    : nu(nu_), sigma2(sigma2_), length(length_) {
    if (!(sigma2 > 0.0)) throw DomainError("Matern variance must be positive");
    if (!(length > 0.0)) throw DomainError("Matern lengthscale must be positive");
}

double matern_kernel(const MaternParams& params, double h) {
    const double hh = std::abs(h) * std::sqrt(2.0 * params.nu) / params.length;
    const double s2 = params.sigma2;
    const double tol = 1e-12;
    if (std::abs(params.nu - 0.5) < tol) {
        return s2 * std::exp(-hh);
    }
    if (std::abs(params.nu - 1.5) < tol) {
        return s2 * (1.0 + hh) * std::exp(-hh);
    }
    if (std::abs(params.nu - 2.5) < tol) {
        return s2 * (1.0 + hh + hh * hh / 3.0) * std::exp(-hh);
    }
    if (std::abs(params.nu - 3.5) < tol) {
        return s2 * (1.0 + hh + 0.4 * hh * hh + hh * hh * hh / 15.0) * std::exp(-hh);
    }
    throw UnsupportedSmoothness("Matern smoothness must be in {1/2, 3/2, 5/2, 7/2}, got " +
                                std::to_string(params.nu));
}

}  // namespace confellip::specfun
