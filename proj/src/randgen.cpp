#include "confellip/randgen.hpp"

#include <cmath>

namespace confellip::randgen {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    // Expand (seed, stream_id) into a full xoshiro256++ state.
    std::uint64_t mix = seed;
    const std::uint64_t salt = splitmix64(mix);
    mix = stream_id ^ rotl(salt, 17) ^ 0xd2b74407b1ce6e93ULL;
    for (auto& word : state_) {
        word = splitmix64(mix);
    }
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() {
    double u;
    do {
        u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    return u;
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * m;
    has_cached_normal_ = true;
    return u * m;
}

double RngStream::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) {
        throw DomainError("gamma variate requires positive shape and scale");
    }
    if (shape < 1.0) {
        const double boost = std::pow(uniform(), 1.0 / shape);
        return gamma(shape + 1.0, scale) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

double RngStream::chi2_one() {
    const double z = normal();
    return z * z;
}

std::uint64_t derive_stream_id(std::uint64_t a, std::uint64_t b) {
    std::uint64_t mix = a ^ 0x6a09e667f3bcc909ULL;
    std::uint64_t h = splitmix64(mix);
    mix = h ^ b;
    return splitmix64(mix);
}

Matrix matern_covariance(Index p, const specfun::MaternParams& params) {
    if (p < 1) throw DomainError("matern_covariance requires p >= 1");
    Matrix sigma(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j <= i; ++j) {
            const double v = specfun::matern_kernel(params, static_cast<double>(i - j));
            sigma(i, j) = v;
            sigma(j, i) = v;
        }
    }
    return sigma;
}

Matrix sample_mvn(RngStream& stream, const Vector& mu, const linalg::SpdFactor& factor,
                  Index n) {
    const Index p = factor.dim();
    if (mu.size() != p) throw DimensionMismatch("sample_mvn: mean dimension mismatch");
    Matrix out(n, p);
    Vector z(p);
    for (Index row = 0; row < n; ++row) {
        for (Index j = 0; j < p; ++j) z(j) = stream.normal();
        out.row(row) = (mu + factor.lower() * z).transpose();
    }
    return out;
}

Matrix sample_mvn(RngStream& stream, const Vector& mu, const Matrix& sigma, Index n) {
    return sample_mvn(stream, mu, linalg::SpdFactor::compute(sigma), n);
}

Matrix sample_mv_cauchy(RngStream& stream, const linalg::SpdFactor& factor, Index n) {
    const Index p = factor.dim();
    Matrix out(n, p);
    Vector z(p);
    for (Index row = 0; row < n; ++row) {
        for (Index j = 0; j < p; ++j) z(j) = stream.normal();
        const double w = stream.chi2_one();
        out.row(row) = (factor.lower() * z).transpose() / std::sqrt(w);
    }
    return out;
}

Matrix sample_mv_cauchy(RngStream& stream, const Matrix& sigma, Index n) {
    return sample_mv_cauchy(stream, linalg::SpdFactor::compute(sigma), n);
}

Matrix sample_gamma_tail(RngStream& stream, const Vector& delta, Index n) {
    const Index l = delta.size();
    for (Index i = 0; i < l; ++i) {
        if (!(delta(i) > 0.0)) {
            throw DomainError("sample_gamma_tail requires positive tail rates");
        }
    }
    Matrix out(n, l);
    for (Index row = 0; row < n; ++row) {
        for (Index i = 0; i < l; ++i) {
            const double g = stream.gamma(delta(i), 1.0 / delta(i));
            const bool flip = (stream.next_u64() & 1ULL) != 0;
            out(row, i) = flip ? -std::sqrt(g) : std::sqrt(g);
        }
    }
    return out;
}

}  // namespace confellip::randgen
