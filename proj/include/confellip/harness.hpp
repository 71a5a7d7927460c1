#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "confellip/asymptotics.hpp"
#include "confellip/conformal.hpp"
#include "confellip/predictor.hpp"
#include "confellip/randgen.hpp"

namespace confellip::harness {

enum class Distribution { gaussian, cauchy, gamma_tail };

Distribution parse_distribution(const std::string& name);
std::string distribution_name(Distribution d);

/// Full Monte Carlo protocol parameters. The data model is a stationary
/// Matern vector on the integer grid: inputs are the first k coordinates,
/// outputs the last l. gamma_tail uses the k = 0 convention with tail
/// rates derived from the eigenvalues of the l x l Matern block.
struct ExperimentConfig {
    Distribution distribution = Distribution::gaussian;
    int k = 6;
    int l = 3;
    double nu = 1.5;
    double sigma2 = 1.0;
    double length_scale = 5.0;
    int n_split = 5000;
    int n_calib = 200;
    int n_test = 200;
    int n_histo = 200;
    double alpha = 0.1;
    double lambda = 0.0;
    double mu0 = 0.01;
    std::optional<double> v_min;
    std::uint64_t seed = 1;
    int grid_resolution = 25;

    void validate() const;
    specfun::MaternParams matern() const;
};

/// Averages over the n_test fresh (calibration set, test point) draws of
/// one replicate.
struct ReplicateResult {
    double ell_mean_vol = 0.0;
    double ell_coverage = 0.0;
    int ell_empty_count = 0;
    int ell_fullspace_count = 0;
    double ball_mean_vol = 0.0;
    double ball_coverage = 0.0;
    int n_test = 0;

    double ell_empty_frac() const {
        return n_test > 0 ? static_cast<double>(ell_empty_count) / n_test : 0.0;
    }
    double ell_fullspace_frac() const {
        return n_test > 0 ? static_cast<double>(ell_fullspace_count) / n_test : 0.0;
    }

    bool operator==(const ReplicateResult&) const = default;
};

struct HistogramSummary {
    double mean = 0.0;
    double stddev = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<long> bins;

    bool operator==(const HistogramSummary&) const = default;
};

/// Per-replicate rows plus histogram summaries of the four tracked
/// statistics (ellipsoid volume/coverage, ball volume/coverage).
struct Report {
    std::vector<ReplicateResult> rows;
    HistogramSummary ell_vol;
    HistogramSummary ell_cov;
    HistogramSummary ball_vol;
    HistogramSummary ball_cov;

    bool operator==(const Report&) const = default;
};

struct Table1Row {
    double q = 0.0;
    double closed_form = 0.0;
    double monte_carlo = 0.0;
    double rel_error = 0.0;
};

struct Table2Row {
    int q = 0;       // Matern order index, nu = q - 1/2
    double nu = 0.0;
    int k = 0;
    double mean_volume = 0.0;
    bool is_argmin = false;
};

struct SurplusRow {
    int n = 0;
    double est_surplus = 0.0;    // grid estimate of Vol((E \ C) cap K)
    double std_error = 0.0;      // Monte Carlo standard error over replicates
    long reverse_count = 0;      // probes in C but outside E (expected zero)
};

struct TailComparisonRow {
    double alpha = 0.0;
    double q_mahalanobis = 0.0;  // empirical 1-alpha quantile of sum T_i^2
    double q_weighted = 0.0;     // same for sum delta_i T_i^2
};

/// A fully prepared experiment: model covariance factored and the
/// predictor fit exactly once on the split sample (split conformal).
/// Replicates are independent given their index and safe to run in
/// parallel; every random draw comes from a stream derived from
/// (seed, replicate, phase).
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);

    ReplicateResult run_replicate(int replicate_index) const;

    /// Mean of Vol^q over the replicate's n_test draws, one entry per
    /// requested order. Used by the moment-validation experiment.
    std::vector<double> replicate_volume_moments(int replicate_index,
                                                 const std::vector<double>& orders) const;

    const ExperimentConfig& config() const { return cfg_; }
    const Matrix& model_sigma() const { return sigma_; }

private:
    struct Batch {
        Matrix x;      // n_calib x k (0 columns when k = 0)
        Matrix r;      // n_calib x l residuals
        Vector x_new;  // test input (empty when k = 0)
        Vector r_new;  // test residual
    };
    Batch draw_batch(randgen::RngStream& calib_stream,
                     randgen::RngStream& test_stream) const;
    conformal::RegionOutcome region_for(const Batch& batch) const;

    ExperimentConfig cfg_;
    Matrix sigma_;                 // model dispersion ((k+l) or l dimensional)
    linalg::SpdFactor sigma_factor_;
    std::optional<predictor::RidgePredictor> predictor_;
    Vector tail_deltas_;           // gamma_tail rates (product one)
    Vector tail_scales_;           // sqrt of the Matern block eigenvalues
};

/// The k = 0 convention region: plain Mahalanobis machinery on the
/// residual sample, shape the ridge covariance, center the sample mean and
/// no input term in the radius.
conformal::RegionOutcome residual_only_region(const Matrix& residuals, double alpha,
                                              double lambda);

/// n_histo replicates with independent derived streams; aggregation is
/// replicate-indexed and therefore independent of execution order.
Report run_histogram(const ExperimentConfig& cfg, int threads = 0);

/// Closed-form vs Monte Carlo moments of the region volume (Gaussian only).
std::vector<Table1Row> table1_experiment(const ExperimentConfig& cfg,
                                         const std::vector<double>& q_list,
                                         int threads = 0);

/// Mean-volume grid over Matern orders nu = q - 1/2 (q = 1..4) and input
/// counts k = 0..k_max, flagging the per-row argmin.
std::vector<Table2Row> table2_experiment(const ExperimentConfig& base, int k_max = 6,
                                         int threads = 0);

/// Grid estimate of the surplus volume Vol((E \ C) cap K) per calibration
/// size, over a probe box fixed across n (the asymptotic ellipsoid's
/// bounding box scaled 1.5x per axis).
std::vector<SurplusRow> surplus_volume_experiment(const ExperimentConfig& cfg,
                                                  const std::vector<int>& n_list,
                                                  int threads = 0);

/// Heavy-tail counterexample: empirical high quantiles of the Mahalanobis
/// and determinant-normalized norm statistics for the gamma-tail vector.
std::vector<TailComparisonRow> tail_comparison_experiment(
    const ExperimentConfig& cfg, const std::vector<double>& levels,
    Index n_samples = 1000000);

}  // namespace confellip::harness
