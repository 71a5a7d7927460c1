#include "confellip/predictor.hpp"

namespace confellip::predictor {

RidgePredictor RidgePredictor::fit(const Matrix& x, const Matrix& y, double mu0) {
    if (x.rows() != y.rows()) {
        throw DimensionMismatch("ridge fit: row counts of X and Y differ");
    }
    if (x.rows() < 1) throw DomainError("ridge fit needs at least one row");
    if (mu0 < 0.0) throw DomainError("ridge penalty must be nonnegative");

    Matrix gram = x.transpose() * x;
    gram.diagonal().array() += mu0;
    linalg::SpdFactor factor = linalg::SpdFactor::compute(gram);
    return RidgePredictor(factor.solve(Matrix(x.transpose() * y)), mu0);
}

Matrix RidgePredictor::predict(const Matrix& x) const {
    if (x.cols() != beta_.rows()) {
        throw DimensionMismatch("predict: input dimension does not match the fit");
    }
    return x * beta_;
}

}  // namespace confellip::predictor
