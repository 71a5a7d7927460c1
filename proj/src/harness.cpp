#include "confellip/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "confellip/specfun.hpp"

namespace confellip::harness {

namespace {

using conformal::RegionKind;
using conformal::RegionOutcome;

enum StreamPhase : std::uint64_t { kPhaseSplit = 1, kPhaseCalib = 2, kPhaseTest = 3 };

randgen::RngStream phase_stream(std::uint64_t seed, std::uint64_t replicate,
                                StreamPhase phase) {
    return randgen::RngStream(seed, randgen::derive_stream_id(replicate, phase));
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
    }
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::scoped_lock lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

HistogramSummary summarize(const std::vector<double>& values, int bins) {
    HistogramSummary out;
    const std::size_t n = values.size();
    out.bins.assign(static_cast<std::size_t>(bins), 0);
    if (n == 0) return out;

    double sum = 0.0;
    out.lo = values.front();
    out.hi = values.front();
    for (double v : values) {
        sum += v;
        out.lo = std::min(out.lo, v);
        out.hi = std::max(out.hi, v);
    }
    out.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;

    const double width = (out.hi - out.lo) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t idx = 0;
        if (width > 0.0) {
            idx = static_cast<std::size_t>((v - out.lo) / width);
            idx = std::min(idx, static_cast<std::size_t>(bins - 1));
        }
        ++out.bins[idx];
    }
    return out;
}

double ellipsoid_volume(const Matrix& shape, double radius, int l) {
    const double log_det = linalg::SpdFactor::compute(shape).log_det();
    return specfun::unit_ball_volume(l) * std::exp(0.5 * log_det) *
           std::pow(radius, 0.5 * l);
}

}  // namespace

Distribution parse_distribution(const std::string& name) {
    if (name == "gaussian") return Distribution::gaussian;
    if (name == "cauchy") return Distribution::cauchy;
    if (name == "gamma_tail") return Distribution::gamma_tail;
    throw ConfigError("unknown distribution: " + name);
}

std::string distribution_name(Distribution d) {
    switch (d) {
        case Distribution::gaussian: return "gaussian";
        case Distribution::cauchy: return "cauchy";
        case Distribution::gamma_tail: return "gamma_tail";
    }
    throw ConfigError("invalid distribution value");
}

void ExperimentConfig::validate() const {
    if (k < 0) throw ConfigError("k must be nonnegative");
    if (l < 1) throw ConfigError("l must be at least 1");
    if (n_calib < 2 || n_test < 1 || n_histo < 1) {
        throw ConfigError("all counts must be at least 1 (n_calib at least 2)");
    }
    if (k >= 1 && n_split < 1) throw ConfigError("n_split must be at least 1");
    if (!(alpha > 1.0 / (n_calib + 1.0) && alpha < 1.0)) {
        throw ConfigError("alpha must lie in (1/(n_calib+1), 1)");
    }
    if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (mu0 < 0.0) throw ConfigError("mu0 must be nonnegative");
    if (v_min && !(*v_min > 0.0)) throw ConfigError("v_min must be positive");
    if (grid_resolution < 2) throw ConfigError("grid_resolution must be at least 2");
    if (distribution == Distribution::gamma_tail && k != 0) {
        throw ConfigError("gamma_tail uses the k = 0 convention");
    }
    specfun::matern_kernel(matern(), 0.0);  // rejects unsupported smoothness
}

specfun::MaternParams ExperimentConfig::matern() const {
    return specfun::MaternParams(nu, sigma2, length_scale);
}

Experiment::Experiment(ExperimentConfig cfg)
    : cfg_(std::move(cfg)),
      sigma_(randgen::matern_covariance(cfg_.k >= 1 ? cfg_.k + cfg_.l : cfg_.l,
                                        cfg_.matern())),
      sigma_factor_(linalg::SpdFactor::compute(sigma_)) {
    cfg_.validate();
    if (cfg_.distribution == Distribution::gamma_tail) {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma_);
        Vector eigenvalues = solver.eigenvalues();
        const double log_geo = eigenvalues.array().log().mean();
        tail_deltas_ = (eigenvalues.array().log() - log_geo).exp();
        tail_scales_ = eigenvalues.array().sqrt();
        return;
    }
    if (cfg_.k >= 1) {
        auto split_stream = phase_stream(cfg_.seed, 0, kPhaseSplit);
        Matrix data = cfg_.distribution == Distribution::gaussian
                          ? randgen::sample_mvn(split_stream,
                                                Vector::Zero(sigma_.rows()),
                                                sigma_factor_, cfg_.n_split)
                          : randgen::sample_mv_cauchy(split_stream, sigma_factor_,
                                                      cfg_.n_split);
        predictor_ = predictor::RidgePredictor::fit(
            data.leftCols(cfg_.k), data.rightCols(cfg_.l), cfg_.mu0);
    }
}

Experiment::Batch Experiment::draw_batch(randgen::RngStream& calib_stream,
                                         randgen::RngStream& test_stream) const {
    Batch batch;
    const Index k = cfg_.k;
    const Index l = cfg_.l;

    if (cfg_.distribution == Distribution::gamma_tail) {
        batch.x = Matrix(cfg_.n_calib, 0);
        batch.r = randgen::sample_gamma_tail(calib_stream, tail_deltas_, cfg_.n_calib);
        batch.r.array().rowwise() *= tail_scales_.transpose().array();
        Matrix t = randgen::sample_gamma_tail(test_stream, tail_deltas_, 1);
        batch.x_new = Vector(0);
        batch.r_new = (t.array().rowwise() * tail_scales_.transpose().array())
                          .row(0)
                          .transpose();
        return batch;
    }

    const bool gaussian = cfg_.distribution == Distribution::gaussian;
    const Vector zero = Vector::Zero(sigma_.rows());
    Matrix calib = gaussian
                       ? randgen::sample_mvn(calib_stream, zero, sigma_factor_,
                                             cfg_.n_calib)
                       : randgen::sample_mv_cauchy(calib_stream, sigma_factor_,
                                                   cfg_.n_calib);
    Matrix test = gaussian
                      ? randgen::sample_mvn(test_stream, zero, sigma_factor_, 1)
                      : randgen::sample_mv_cauchy(test_stream, sigma_factor_, 1);

    if (k == 0) {
        batch.x = Matrix(cfg_.n_calib, 0);
        batch.r = std::move(calib);
        batch.x_new = Vector(0);
        batch.r_new = test.row(0).transpose();
        return batch;
    }

    batch.x = calib.leftCols(k);
    batch.r = calib.rightCols(l) - predictor_->predict(batch.x);
    batch.x_new = test.row(0).head(k).transpose();
    batch.r_new = test.row(0).tail(l).transpose() -
                  predictor_->predict(Matrix(test.leftCols(k))).row(0).transpose();
    return batch;
}

RegionOutcome Experiment::region_for(const Batch& batch) const {
    if (cfg_.k >= 1) {
        conformal::CalibrationSet calib(batch.x, batch.r);
        conformal::RidgeStatistics stats =
            conformal::build_ridge_statistics(calib, cfg_.lambda);
        const double q =
            conformal::conformal_quantile(conformal::leverage_diagonals(stats),
                                          cfg_.alpha);
        return conformal::region_from_statistics(stats, q, batch.x_new);
    }
    return residual_only_region(batch.r, cfg_.alpha, cfg_.lambda);
}

ReplicateResult Experiment::run_replicate(int replicate_index) const {
    auto calib_stream = phase_stream(cfg_.seed, replicate_index, kPhaseCalib);
    auto test_stream = phase_stream(cfg_.seed, replicate_index, kPhaseTest);
    const int l = cfg_.l;

    ReplicateResult result;
    result.n_test = cfg_.n_test;
    double vol_sum = 0.0, cover_sum = 0.0, ball_vol_sum = 0.0, ball_cover_sum = 0.0;

    for (int t = 0; t < cfg_.n_test; ++t) {
        Batch batch = draw_batch(calib_stream, test_stream);
        RegionOutcome region = region_for(batch);
        if (cfg_.v_min && region.kind != RegionKind::full_space) {
            region = conformal::apply_volume_floor(region, *cfg_.v_min);
        }

        switch (region.kind) {
            case RegionKind::full_space:
                ++result.ell_fullspace_count;
                cover_sum += 1.0;
                vol_sum += std::numeric_limits<double>::infinity();
                break;
            case RegionKind::empty:
                ++result.ell_empty_count;
                break;
            case RegionKind::ellipsoid:
            case RegionKind::floored: {
                linalg::SpdFactor shape_factor =
                    linalg::SpdFactor::compute(region.shape);
                vol_sum += specfun::unit_ball_volume(l) *
                           std::exp(0.5 * shape_factor.log_det()) *
                           std::pow(region.radius, 0.5 * l);
                const Vector diff = batch.r_new - region.center;
                if (shape_factor.inverse_quad_form(diff) <= region.radius) {
                    cover_sum += 1.0;
                }
                break;
            }
        }

        conformal::Ball ball =
            conformal::ball_region(batch.r, Vector::Zero(l), cfg_.alpha);
        ball_vol_sum += conformal::ball_volume(ball, l);
        if (batch.r_new.squaredNorm() <= ball.squared_radius) ball_cover_sum += 1.0;
    }

    const double dn = static_cast<double>(cfg_.n_test);
    result.ell_mean_vol = vol_sum / dn;
    result.ell_coverage = cover_sum / dn;
    result.ball_mean_vol = ball_vol_sum / dn;
    result.ball_coverage = ball_cover_sum / dn;
    return result;
}

std::vector<double> Experiment::replicate_volume_moments(
    int replicate_index, const std::vector<double>& orders) const {
    auto calib_stream = phase_stream(cfg_.seed, replicate_index, kPhaseCalib);
    auto test_stream = phase_stream(cfg_.seed, replicate_index, kPhaseTest);

    std::vector<double> sums(orders.size(), 0.0);
    for (int t = 0; t < cfg_.n_test; ++t) {
        Batch batch = draw_batch(calib_stream, test_stream);
        RegionOutcome region = region_for(batch);
        const double vol = conformal::region_volume(region);
        for (std::size_t j = 0; j < orders.size(); ++j) {
            sums[j] += std::pow(vol, orders[j]);
        }
    }
    for (double& s : sums) s /= static_cast<double>(cfg_.n_test);
    return sums;
}

RegionOutcome residual_only_region(const Matrix& residuals, double alpha,
                                   double lambda) {
    const Index n = residuals.rows();
    const Index l = residuals.cols();
    if (n < 2) throw DomainError("residual sample needs n >= 2");
    if (lambda < 0.0) throw DomainError("ridge parameter must be nonnegative");

    const Vector mean = residuals.colwise().mean();
    Matrix centered = residuals.rowwise() - mean.transpose();
    Matrix sigma = centered.transpose() * centered / static_cast<double>(n);
    sigma.diagonal().array() += lambda;
    linalg::SpdFactor factor = linalg::SpdFactor::compute(sigma);

    Matrix solved = factor.solve(Matrix(centered.transpose()));
    Vector leverage(n);
    for (Index i = 0; i < n; ++i) {
        leverage(i) = centered.row(i).dot(solved.col(i)) / static_cast<double>(n);
    }
    const double q = conformal::conformal_quantile(leverage, alpha);
    if (q >= static_cast<double>(n - 1)) {
        return RegionOutcome::make_full_space(l);
    }

    RegionOutcome out;
    out.shape = std::move(sigma);
    out.center = mean;
    out.radius = (q + 1.0) / (1.0 - (q + 1.0) / static_cast<double>(n)) - 1.0;
    out.kind = out.radius < 0.0 ? RegionKind::empty : RegionKind::ellipsoid;
    return out;
}

Report run_histogram(const ExperimentConfig& cfg, int threads) {
    Experiment experiment(cfg);
    Report report;
    report.rows.resize(static_cast<std::size_t>(cfg.n_histo));
    parallel_for(cfg.n_histo, threads, [&](int i) {
        report.rows[static_cast<std::size_t>(i)] = experiment.run_replicate(i);
    });

    const int bins = cfg.distribution == Distribution::gaussian ? 75 : 50;
    std::vector<double> ev, ec, bv, bc;
    ev.reserve(report.rows.size());
    for (const auto& row : report.rows) {
        ev.push_back(row.ell_mean_vol);
        ec.push_back(row.ell_coverage);
        bv.push_back(row.ball_mean_vol);
        bc.push_back(row.ball_coverage);
    }
    report.ell_vol = summarize(ev, bins);
    report.ell_cov = summarize(ec, bins);
    report.ball_vol = summarize(bv, bins);
    report.ball_cov = summarize(bc, bins);
    return report;
}

std::vector<Table1Row> table1_experiment(const ExperimentConfig& cfg,
                                         const std::vector<double>& q_list,
                                         int threads) {
    if (cfg.distribution != Distribution::gaussian) {
        throw ConfigError("the moment-validation experiment requires Gaussian data");
    }
    if (cfg.k < 1) throw ConfigError("the moment-validation experiment requires k >= 1");

    Experiment experiment(cfg);
    std::vector<std::vector<double>> per_replicate(
        static_cast<std::size_t>(cfg.n_histo));
    parallel_for(cfg.n_histo, threads, [&](int i) {
        per_replicate[static_cast<std::size_t>(i)] =
            experiment.replicate_volume_moments(i, q_list);
    });

    std::vector<Table1Row> rows;
    rows.reserve(q_list.size());
    for (std::size_t j = 0; j < q_list.size(); ++j) {
        double grand = 0.0;
        for (const auto& rep : per_replicate) grand += rep[j];
        grand /= static_cast<double>(cfg.n_histo);
        const double closed = asymptotics::gaussian_volume_moment(
            experiment.model_sigma(), cfg.k, cfg.l, cfg.alpha, q_list[j]);
        rows.push_back(Table1Row{q_list[j], closed, grand,
                                 std::abs(closed - grand) / closed});
    }
    return rows;
}

std::vector<Table2Row> table2_experiment(const ExperimentConfig& base, int k_max,
                                         int threads) {
    if (base.distribution != Distribution::gaussian) {
        throw ConfigError("the volume-grid experiment requires Gaussian data");
    }
    std::vector<Table2Row> rows;
    for (int q = 1; q <= 4; ++q) {
        const double nu = q - 0.5;
        std::size_t row_start = rows.size();
        for (int k = 0; k <= k_max; ++k) {
            ExperimentConfig cfg = base;
            cfg.nu = nu;
            cfg.k = k;
            Experiment experiment(cfg);
            std::vector<double> vols(static_cast<std::size_t>(cfg.n_histo));
            parallel_for(cfg.n_histo, threads, [&](int i) {
                vols[static_cast<std::size_t>(i)] =
                    experiment.run_replicate(i).ell_mean_vol;
            });
            double grand = 0.0;
            for (double v : vols) grand += v;
            grand /= static_cast<double>(cfg.n_histo);
            rows.push_back(Table2Row{q, nu, k, grand, false});
        }
        auto begin = rows.begin() + static_cast<std::ptrdiff_t>(row_start);
        auto best = std::min_element(begin, rows.end(),
                                     [](const Table2Row& a, const Table2Row& b) {
                                         return a.mean_volume < b.mean_volume;
                                     });
        best->is_argmin = true;
    }
    return rows;
}

std::vector<SurplusRow> surplus_volume_experiment(const ExperimentConfig& cfg,
                                                  const std::vector<int>& n_list,
                                                  int threads) {
    if (cfg.distribution != Distribution::gaussian || cfg.k < 1) {
        throw ConfigError("the surplus experiment requires Gaussian data with k >= 1");
    }
    const int l = cfg.l;
    const long grid_total = static_cast<long>(std::pow(cfg.grid_resolution, l));
    if (grid_total > 2000000) {
        throw ConfigError("probe grid too large; reduce grid_resolution or l");
    }

    // Probe box: bounding box of the asymptotic ellipsoid at the mean
    // input, scaled 1.5x per axis. Deterministic, hence fixed across n.
    Experiment base_experiment(cfg);
    const Matrix& sigma = base_experiment.model_sigma();
    const double q_inf = asymptotics::gaussian_q_infinity(cfg.k, l, cfg.alpha);
    asymptotics::LimitModel limit = asymptotics::LimitModel::make(
        sigma, cfg.k, l, cfg.lambda, Vector::Zero(cfg.k + l), q_inf);
    RegionOutcome limit_region =
        asymptotics::asymptotic_ellipsoid(limit, Vector::Zero(cfg.k));
    Vector half_width(l);
    for (int j = 0; j < l; ++j) {
        half_width(j) = 1.5 * std::sqrt(limit_region.radius * limit_region.shape(j, j));
    }
    const Vector box_lo = limit_region.center - half_width;
    double box_volume = 1.0;
    for (int j = 0; j < l; ++j) box_volume *= 2.0 * half_width(j);

    std::vector<SurplusRow> rows;
    for (int n : n_list) {
        ExperimentConfig cfg_n = cfg;
        cfg_n.n_calib = n;
        cfg_n.validate();
        Experiment experiment(cfg_n);

        std::vector<double> estimates(static_cast<std::size_t>(cfg.n_histo));
        std::vector<long> reversed(static_cast<std::size_t>(cfg.n_histo), 0);
        parallel_for(cfg.n_histo, threads, [&](int rep) {
            auto calib_stream = phase_stream(cfg_n.seed, rep, kPhaseCalib);
            auto test_stream = phase_stream(cfg_n.seed, rep, kPhaseTest);
            auto data = randgen::sample_mvn(calib_stream, Vector::Zero(cfg.k + l),
                                            linalg::SpdFactor::compute(sigma), n);
            auto test = randgen::sample_mvn(test_stream, Vector::Zero(cfg.k + l),
                                            linalg::SpdFactor::compute(sigma), 1);
            conformal::CalibrationSet calib(data.leftCols(cfg.k), data.rightCols(l));
            const Vector x_new = test.row(0).head(cfg.k).transpose();

            conformal::ScoreMachinery machinery(calib, x_new, cfg.lambda);
            Vector leverage(n);
            const double inv_corr = 1.0 / (static_cast<double>(n) * (n + 1.0));
            for (int i = 0; i < n; ++i) {
                leverage(i) = machinery.cn_diagonal()(i) - inv_corr;
            }
            const double q = conformal::conformal_quantile(leverage, cfg.alpha);
            RegionOutcome region =
                conformal::region_from_statistics(machinery.statistics(), q, x_new);

            long surplus = 0, reverse = 0;
            if (region.kind == RegionKind::ellipsoid) {
                linalg::SpdFactor shape_factor =
                    linalg::SpdFactor::compute(region.shape);
                Vector z(l);
                std::vector<int> idx(static_cast<std::size_t>(l), 0);
                const double step = 1.0 / (cfg.grid_resolution - 1.0);
                for (long g = 0; g < grid_total; ++g) {
                    long rem = g;
                    for (int j = 0; j < l; ++j) {
                        idx[static_cast<std::size_t>(j)] =
                            static_cast<int>(rem % cfg.grid_resolution);
                        rem /= cfg.grid_resolution;
                    }
                    for (int j = 0; j < l; ++j) {
                        z(j) = box_lo(j) +
                               2.0 * half_width(j) * step *
                                   idx[static_cast<std::size_t>(j)];
                    }
                    const Vector diff = z - region.center;
                    const bool in_ellipsoid =
                        shape_factor.inverse_quad_form(diff) <= region.radius;
                    const bool in_exact =
                        machinery.exact_region_membership(z, cfg.alpha);
                    if (in_ellipsoid && !in_exact) ++surplus;
                    if (in_exact && !in_ellipsoid) ++reverse;
                }
            }
            estimates[static_cast<std::size_t>(rep)] =
                box_volume * static_cast<double>(surplus) /
                static_cast<double>(grid_total);
            reversed[static_cast<std::size_t>(rep)] = reverse;
        });

        SurplusRow row;
        row.n = n;
        double mean = 0.0;
        for (double e : estimates) mean += e;
        mean /= static_cast<double>(estimates.size());
        double ss = 0.0;
        for (double e : estimates) ss += (e - mean) * (e - mean);
        row.est_surplus = mean;
        row.std_error = estimates.size() > 1
                            ? std::sqrt(ss / (estimates.size() * (estimates.size() - 1.0)))
                            : 0.0;
        for (long r : reversed) row.reverse_count += r;
        rows.push_back(row);
    }
    return rows;
}

std::vector<TailComparisonRow> tail_comparison_experiment(
    const ExperimentConfig& cfg, const std::vector<double>& levels, Index n_samples) {
    if (cfg.distribution != Distribution::gamma_tail) {
        throw ConfigError("the tail comparison requires the gamma_tail distribution");
    }
    Matrix sigma = randgen::matern_covariance(cfg.l, cfg.matern());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma);
    Vector eigenvalues = solver.eigenvalues();
    const double log_geo = eigenvalues.array().log().mean();
    Vector deltas = (eigenvalues.array().log() - log_geo).exp();

    auto stream = phase_stream(cfg.seed, 0, kPhaseCalib);
    Matrix t = randgen::sample_gamma_tail(stream, deltas, n_samples);

    std::vector<double> mahal(static_cast<std::size_t>(n_samples));
    std::vector<double> weighted(static_cast<std::size_t>(n_samples));
    for (Index i = 0; i < n_samples; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (Index j = 0; j < cfg.l; ++j) {
            const double tij2 = t(i, j) * t(i, j);
            s1 += tij2;
            s2 += deltas(j) * tij2;
        }
        mahal[static_cast<std::size_t>(i)] = s1;
        weighted[static_cast<std::size_t>(i)] = s2;
    }
    std::sort(mahal.begin(), mahal.end());
    std::sort(weighted.begin(), weighted.end());

    std::vector<TailComparisonRow> rows;
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) {
            throw DomainError("tail levels must lie in (0, 1)");
        }
        const auto idx = static_cast<std::size_t>(
            std::min<double>(std::ceil((1.0 - level) * n_samples),
                             static_cast<double>(n_samples)) - 1.0);
        rows.push_back(TailComparisonRow{level, mahal[idx], weighted[idx]});
    }
    return rows;
}

}  // namespace confellip::harness
