#pragma once

#include "confellip/linalg.hpp"

namespace confellip::predictor {

/// Multivariate ridge linear predictor, beta = (X^T X + mu0 I)^{-1} X^T Y.
/// No intercept: the region's center correction absorbs predictor bias.
/// Immutable after fitting, as split conformal requires.
class RidgePredictor {
public:
    static RidgePredictor fit(const Matrix& x, const Matrix& y, double mu0);

    /// Row i of the result is beta^T X_i.
    Matrix predict(const Matrix& x) const;

    const Matrix& coefficients() const { return beta_; }
    double ridge() const { return mu0_; }
    Index inputs() const { return beta_.rows(); }
    Index outputs() const { return beta_.cols(); }

private:
    RidgePredictor(Matrix beta, double mu0) : beta_(std::move(beta)), mu0_(mu0) {}
    Matrix beta_;
    double mu0_;
};

}  // namespace confellip::predictor
