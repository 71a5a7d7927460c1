#pragma once

#include <optional>

#include "confellip/linalg.hpp"

namespace confellip::conformal {

/// Paired calibration inputs and residuals. Rows of x and r are the
/// observations V_i = (X_i, R_i); y and yhat are optional raw outputs and
/// predictions (when both are present, r must equal y - yhat).
struct CalibrationSet {
    Matrix x;  // n x k
    Matrix r;  // n x l
    std::optional<Matrix> y;
    std::optional<Matrix> yhat;

    CalibrationSet(Matrix x_in, Matrix r_in);
    CalibrationSet(Matrix x_in, Matrix y_in, Matrix yhat_in);

    Index n() const { return x.rows(); }
    Index k() const { return x.cols(); }
    Index l() const { return r.cols(); }
    Index p() const { return k() + l(); }
};

/// Centered design and ridge covariance of the calibration sample,
/// together with the factorizations every downstream quantity needs.
struct RidgeStatistics {
    Matrix centered;                 // B_n, n x p, column sums zero
    Vector mean;                     // sample mean of the V_i
    double lambda = 0.0;             // ridge parameter
    linalg::BlockPartition blocks;   // ridge covariance (1/n) B^T B + lambda I
    linalg::SpdFactor factor11;      // factor of the k x k input block
    linalg::SpdFactor factor_full;   // factor of the full p x p matrix

    Index n() const { return centered.rows(); }
    Index k() const { return blocks.k; }
    Index l() const { return blocks.l; }
    Index p() const { return blocks.k + blocks.l; }
};

struct Ellipsoid {
    Vector center;  // l-vector
    Matrix shape;   // SPD l x l
    double radius;  // quadratic-form bound: (z-c)^T shape^{-1} (z-c) <= radius
};

struct Ball {
    Vector center;
    double squared_radius;
};

enum class RegionKind { ellipsoid, full_space, empty, floored };

/// Prediction-region outcome. Empty regions keep the (shape, center) pair
/// and the negative radius so a volume floor can still be applied.
struct RegionOutcome {
    RegionKind kind = RegionKind::full_space;
    Vector center;
    Matrix shape;
    double radius = 0.0;
    double floor_epsilon = 0.0;  // set only for floored regions

    static RegionOutcome make_full_space(Index l);

    bool contains(const Vector& z) const;
};

struct RegionMetrics {
    double volume;
    double eccentricity;
};

RidgeStatistics build_ridge_statistics(const CalibrationSet& calib, double lambda);

/// Diagonal of the regularized projector: p_i = (1/n) b_i^T Sigma^{-1} b_i
/// for the rows b_i of the centered design. Each entry lies in [0, 1] and
/// the sum is at most p.
Vector leverage_diagonals(const RidgeStatistics& stats);

/// Conformal order-statistic index n_alpha = ceil((1-alpha)(n+1)).
/// Throws AlphaTooSmall when alpha <= 1/(n+1).
Index conformal_index(Index n, double alpha);

/// q_{n,alpha}: the n_alpha-th smallest of the n values n * p_i.
double conformal_quantile(const Vector& leverage, double alpha);

/// The explicit residual-space prediction region: full space when
/// q >= n - 1, otherwise the ellipsoid with shape the Schur complement of
/// the ridge covariance, center the ridge-regression estimate of the
/// residual at x_new, and the conformal radius (empty when negative).
/// Add the test prediction to the center for the region on raw outputs.
RegionOutcome ccle_region(const CalibrationSet& calib, const Vector& x_new, double alpha,
                          double lambda);

/// Same region computed from prebuilt statistics and quantile, for loops
/// that evaluate multiple test inputs against one calibration sample.
RegionOutcome region_from_statistics(const RidgeStatistics& stats, double q,
                                     const Vector& x_new);

/// Corrected point prediction: the region center shifted to output space.
Vector corrected_center(const CalibrationSet& calib, const Vector& x_new,
                        const Vector& yhat_new, double lambda);

/// Direct evaluation of all n+1 scores at a candidate residual z:
/// the data rows plus (x_new, z) are stacked, centered over the n+1 rows,
/// and the diagonal of n W (W^T W + n lambda I)^{-1} W^T is returned.
/// One matrix inversion per call; kept as the slow reference path.
Vector exact_score_matrix(const CalibrationSet& calib, const Vector& x_new,
                          const Vector& z, double lambda);

/// Rank-one score machinery: after one factorization of the ridge
/// covariance, every candidate z costs O(n p) to score. Immutable and
/// shareable across threads once built.
class ScoreMachinery {
public:
    ScoreMachinery(const CalibrationSet& calib, const Vector& x_new, double lambda);

    struct Eval {
        double score_new;  // S_{n+1}(z)
        double d;          // the positive quadratic form d_n(z)
        Vector b;          // the n+1 rank-one coefficients b^n(z)
    };

    Eval fast_score_eval(const Vector& z) const;

    /// S_{n+1}(z) alone; avoids forming the b vector.
    double candidate_score(const Vector& z) const;

    /// All n+1 scores via the rank-one expansion
    /// S_i(z) = n C_ii - n b_i(z)^2 / (1 + d_n(z)).
    Vector scores_at(const Vector& z) const;

    /// Exact conformal membership: S_{n+1}(z) <= S_{(n_alpha)}(z), the
    /// order statistic taken over the first n scores at the same z.
    bool exact_region_membership(const Vector& z, double alpha) const;

    const Vector& cn_diagonal() const { return cn_diag_; }
    const RidgeStatistics& statistics() const { return stats_; }
    Index n() const { return stats_.n(); }

private:
    Vector r_of(const Vector& z) const;

    RidgeStatistics stats_;
    Vector x_new_;
    Matrix projector_rows_;  // (1/n) B Sigma^{-1}, n x p
    Vector cn_diag_;         // n+1 diagonal entries of C_n
    double w_head_;          // -1/sqrt(n(n+1)), first n entries of w
    double w_last_;          // sqrt(n/(n+1))
    double v_norm_;          // sqrt(n/(n+1))
};

/// Volume and principal eccentricity. Throws UndefinedMetric for the full
/// space; use region_volume alone when an infinite sentinel is acceptable.
RegionMetrics region_metrics(const RegionOutcome& region);

/// v_l sqrt(det shape) radius^{l/2}; 0 for empty, +infinity for full space.
double region_volume(const RegionOutcome& region);

/// sqrt(1 - lambda_min/lambda_max) of the shape matrix.
double region_eccentricity(const RegionOutcome& region);

/// Replaces the radius by max(radius, eps^2) with eps chosen so the floored
/// region has volume exactly v_min; regions already at least that large are
/// returned unchanged.
RegionOutcome apply_volume_floor(const RegionOutcome& region, double v_min);

/// Norm-residual baseline: ball centered at the supplied point whose
/// squared radius is the n_alpha-th order statistic of the calibration
/// squared residual norms.
Ball ball_region(const CalibrationSet& calib, const Vector& center, double alpha);
Ball ball_region(const Matrix& residuals, const Vector& center, double alpha);

double ball_volume(const Ball& ball, Index l);

}  // namespace confellip::conformal
