#pragma once

#include <string>
#include <vector>

#include "confellip/conformal.hpp"
#include "confellip/harness.hpp"

namespace confellip::io {

enum class ReportFormat { csv, json };

/// Parses an experiment config from JSON. Recognized keys: distribution,
/// k, l, nu, sigma2, length_scale, n_split, n_calib, n_test, n_histo,
/// alpha, lambda, mu0, v_min, seed, grid_resolution. Missing keys fall
/// back to defaults; unknown keys are rejected.
harness::ExperimentConfig read_config(const std::string& path);
harness::ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const harness::ExperimentConfig& cfg);

/// Histogram report. CSV columns: replicate, ell_mean_vol, ell_coverage,
/// ell_empty_frac, ell_fullspace_frac, ball_mean_vol, ball_coverage.
/// JSON mirrors the full Report structure. Doubles are written with 17
/// significant digits so a round trip reproduces them exactly.
void write_report(const harness::Report& report, const std::string& path,
                  ReportFormat format);

struct ReplicateCsvRow {
    long replicate = 0;
    double ell_mean_vol = 0.0;
    double ell_coverage = 0.0;
    double ell_empty_frac = 0.0;
    double ell_fullspace_frac = 0.0;
    double ball_mean_vol = 0.0;
    double ball_coverage = 0.0;

    bool operator==(const ReplicateCsvRow&) const = default;
};

std::vector<ReplicateCsvRow> read_report_csv(const std::string& path);
harness::Report read_report_json(const std::string& path);

void write_table1_csv(const std::vector<harness::Table1Row>& rows,
                      const std::string& path);
void write_table2_csv(const std::vector<harness::Table2Row>& rows,
                      const std::string& path);
void write_surplus_csv(const std::vector<harness::SurplusRow>& rows,
                       const std::string& path);
void write_tails_csv(const std::vector<harness::TailComparisonRow>& rows,
                     const std::string& path);

/// Calibration CSV: a header row, then columns x1..xk, y1..yl and
/// optionally yhat1..yhatl (comma separator, decimal point). Without yhat
/// columns the y values are taken as residuals.
conformal::CalibrationSet read_calibration_csv(const std::string& path);

/// Region JSON: {"kind", "center", "shape", "radius", "volume",
/// "eccentricity"}. The full space carries null geometry fields.
std::string region_to_json_text(const conformal::RegionOutcome& region);
std::string ball_to_json_text(const conformal::Ball& ball);
void write_region_json(const conformal::RegionOutcome& region, const std::string& path);

/// Doubles formatted with up to 17 significant digits (%.17g).
std::string format_double(double value);

}  // namespace confellip::io
