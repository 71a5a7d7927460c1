#pragma once

#include <cstdint>

#include "confellip/linalg.hpp"
#include "confellip/specfun.hpp"

namespace confellip::randgen {

/// Deterministic random stream identified by (seed, stream_id). Equal
/// identifiers reproduce the exact same sequence; distinct stream ids from
/// the same seed give statistically independent streams. Streams are value
/// types; derive one per task instead of sharing mutably across threads.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next_u64();

    /// Uniform on (0, 1), never returning an exact endpoint.
    double uniform();

    /// Standard normal via the Marsaglia polar method (second variate cached).
    double normal();

    /// Gamma(shape, scale) via the Marsaglia-Tsang squeeze, with the
    /// shape < 1 boost G_a = G_{a+1} U^{1/a}.
    double gamma(double shape, double scale);

    /// Chi-squared with one degree of freedom (squared standard normal).
    double chi2_one();

private:
    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Mixes (a, b) into a single stream id; used for per-replicate,
/// per-phase stream derivation.
std::uint64_t derive_stream_id(std::uint64_t a, std::uint64_t b);

/// p x p Matern covariance matrix Sigma_ij = k_nu(i - j) on the integer
/// grid; symmetric Toeplitz with diagonal sigma^2.
Matrix matern_covariance(Index p, const specfun::MaternParams& params);

/// n rows iid N(mu, Sigma), generated as mu + L z for the lower Cholesky
/// factor L of Sigma and z standard normal.
Matrix sample_mvn(RngStream& stream, const Vector& mu, const linalg::SpdFactor& factor,
                  Index n);
Matrix sample_mvn(RngStream& stream, const Vector& mu, const Matrix& sigma, Index n);

/// n rows iid central multivariate Cauchy C(0, Sigma): L z / sqrt(w) with
/// z ~ N(0, I) and w ~ chi2(1) drawn independently per row.
Matrix sample_mv_cauchy(RngStream& stream, const linalg::SpdFactor& factor, Index n);
Matrix sample_mv_cauchy(RngStream& stream, const Matrix& sigma, Index n);

/// n x l matrix whose column i holds independent signed square roots
/// +-sqrt(G) with G ~ gamma(delta_i, 1/delta_i) and a fair sign flip;
/// every column has population mean 0 and variance 1, with tail weight
/// controlled by delta_i.
Matrix sample_gamma_tail(RngStream& stream, const Vector& delta, Index n);

}  // namespace confellip::randgen
