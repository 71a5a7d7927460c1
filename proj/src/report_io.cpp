#include "confellip/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace confellip::io {

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write to " + path + " failed");
}

json histogram_to_json(const harness::HistogramSummary& h) {
    return json{{"mean", h.mean},
                {"stddev", h.stddev},
                {"lo", h.lo},
                {"hi", h.hi},
                {"bins", h.bins}};
}

harness::HistogramSummary histogram_from_json(const json& j) {
    harness::HistogramSummary h;
    h.mean = j.at("mean").get<double>();
    h.stddev = j.at("stddev").get<double>();
    h.lo = j.at("lo").get<double>();
    h.hi = j.at("hi").get<double>();
    h.bins = j.at("bins").get<std::vector<long>>();
    return h;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(row);
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double value = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) {
            ++pos;
        }
        if (pos != cell.size()) throw std::invalid_argument("trailing junk");
        return value;
    } catch (const std::exception&) {
        throw IoError("cannot parse numeric cell '" + cell + "' in " + context);
    }
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

harness::ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    static const char* known[] = {"distribution", "k",       "l",        "nu",
                                  "sigma2",       "length_scale", "n_split",  "n_calib",
                                  "n_test",       "n_histo", "alpha",    "lambda",
                                  "mu0",          "v_min",   "seed",     "grid_resolution"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* key : known) ok = ok || (it.key() == key);
        if (!ok) throw ConfigError("unknown config key: " + it.key());
    }

    harness::ExperimentConfig cfg;
    try {
        if (j.contains("distribution")) {
            cfg.distribution =
                harness::parse_distribution(j.at("distribution").get<std::string>());
        }
        if (j.contains("k")) cfg.k = j.at("k").get<int>();
        if (j.contains("l")) cfg.l = j.at("l").get<int>();
        if (j.contains("nu")) cfg.nu = j.at("nu").get<double>();
        if (j.contains("sigma2")) cfg.sigma2 = j.at("sigma2").get<double>();
        if (j.contains("length_scale")) cfg.length_scale = j.at("length_scale").get<double>();
        if (j.contains("n_split")) cfg.n_split = j.at("n_split").get<int>();
        if (j.contains("n_calib")) cfg.n_calib = j.at("n_calib").get<int>();
        if (j.contains("n_test")) cfg.n_test = j.at("n_test").get<int>();
        if (j.contains("n_histo")) cfg.n_histo = j.at("n_histo").get<int>();
        if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
        if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
        if (j.contains("mu0")) cfg.mu0 = j.at("mu0").get<double>();
        if (j.contains("v_min") && !j.at("v_min").is_null()) {
            cfg.v_min = j.at("v_min").get<double>();
        }
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("grid_resolution")) {
            cfg.grid_resolution = j.at("grid_resolution").get<int>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config value has the wrong type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

harness::ExperimentConfig read_config(const std::string& path) {
    return config_from_json_text(slurp(path));
}

std::string config_to_json_text(const harness::ExperimentConfig& cfg) {
    json j{{"distribution", harness::distribution_name(cfg.distribution)},
           {"k", cfg.k},
           {"l", cfg.l},
           {"nu", cfg.nu},
           {"sigma2", cfg.sigma2},
           {"length_scale", cfg.length_scale},
           {"n_split", cfg.n_split},
           {"n_calib", cfg.n_calib},
           {"n_test", cfg.n_test},
           {"n_histo", cfg.n_histo},
           {"alpha", cfg.alpha},
           {"lambda", cfg.lambda},
           {"mu0", cfg.mu0},
           {"v_min", cfg.v_min ? json(*cfg.v_min) : json(nullptr)},
           {"seed", cfg.seed},
           {"grid_resolution", cfg.grid_resolution}};
    return j.dump(2);
}

void write_report(const harness::Report& report, const std::string& path,
                  ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::ostringstream out;
        out << "replicate,ell_mean_vol,ell_coverage,ell_empty_frac,"
               "ell_fullspace_frac,ball_mean_vol,ball_coverage\n";
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            const auto& r = report.rows[i];
            out << i << ',' << format_double(r.ell_mean_vol) << ','
                << format_double(r.ell_coverage) << ','
                << format_double(r.ell_empty_frac()) << ','
                << format_double(r.ell_fullspace_frac()) << ','
                << format_double(r.ball_mean_vol) << ','
                << format_double(r.ball_coverage) << '\n';
        }
        spill(path, out.str());
        return;
    }

    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back(json{{"ell_mean_vol", r.ell_mean_vol},
                            {"ell_coverage", r.ell_coverage},
                            {"ell_empty_count", r.ell_empty_count},
                            {"ell_fullspace_count", r.ell_fullspace_count},
                            {"ball_mean_vol", r.ball_mean_vol},
                            {"ball_coverage", r.ball_coverage},
                            {"n_test", r.n_test}});
    }
    json j{{"rows", rows},
           {"histograms",
            json{{"ell_mean_vol", histogram_to_json(report.ell_vol)},
                 {"ell_coverage", histogram_to_json(report.ell_cov)},
                 {"ball_mean_vol", histogram_to_json(report.ball_vol)},
                 {"ball_coverage", histogram_to_json(report.ball_cov)}}}};
    spill(path, j.dump(2) + "\n");
}

std::vector<ReplicateCsvRow> read_report_csv(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError("report CSV is empty: " + path);
    std::vector<ReplicateCsvRow> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != 7) {
            throw IoError("report CSV line " + std::to_string(line_no) +
                          " does not have 7 columns");
        }
        const std::string ctx = path + ":" + std::to_string(line_no);
        ReplicateCsvRow row;
        row.replicate = static_cast<long>(parse_cell(cells[0], ctx));
        row.ell_mean_vol = parse_cell(cells[1], ctx);
        row.ell_coverage = parse_cell(cells[2], ctx);
        row.ell_empty_frac = parse_cell(cells[3], ctx);
        row.ell_fullspace_frac = parse_cell(cells[4], ctx);
        row.ball_mean_vol = parse_cell(cells[5], ctx);
        row.ball_coverage = parse_cell(cells[6], ctx);
        rows.push_back(row);
    }
    return rows;
}

harness::Report read_report_json(const std::string& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw IoError(std::string("report is not valid JSON: ") + e.what());
    }
    harness::Report report;
    for (const auto& r : j.at("rows")) {
        harness::ReplicateResult row;
        row.ell_mean_vol = r.at("ell_mean_vol").get<double>();
        row.ell_coverage = r.at("ell_coverage").get<double>();
        row.ell_empty_count = r.at("ell_empty_count").get<int>();
        row.ell_fullspace_count = r.at("ell_fullspace_count").get<int>();
        row.ball_mean_vol = r.at("ball_mean_vol").get<double>();
        row.ball_coverage = r.at("ball_coverage").get<double>();
        row.n_test = r.at("n_test").get<int>();
        report.rows.push_back(row);
    }
    const auto& h = j.at("histograms");
    report.ell_vol = histogram_from_json(h.at("ell_mean_vol"));
    report.ell_cov = histogram_from_json(h.at("ell_coverage"));
    report.ball_vol = histogram_from_json(h.at("ball_mean_vol"));
    report.ball_cov = histogram_from_json(h.at("ball_coverage"));
    return report;
}

void write_table1_csv(const std::vector<harness::Table1Row>& rows,
                      const std::string& path) {
    std::ostringstream out;
    out << "q,closed_form,monte_carlo,rel_error\n";
    for (const auto& r : rows) {
        out << format_double(r.q) << ',' << format_double(r.closed_form) << ','
            << format_double(r.monte_carlo) << ',' << format_double(r.rel_error)
            << '\n';
    }
    spill(path, out.str());
}

void write_table2_csv(const std::vector<harness::Table2Row>& rows,
                      const std::string& path) {
    std::ostringstream out;
    out << "q,nu,k,mean_volume,is_argmin\n";
    for (const auto& r : rows) {
        out << r.q << ',' << format_double(r.nu) << ',' << r.k << ','
            << format_double(r.mean_volume) << ',' << (r.is_argmin ? 1 : 0) << '\n';
    }
    spill(path, out.str());
}

void write_surplus_csv(const std::vector<harness::SurplusRow>& rows,
                       const std::string& path) {
    std::ostringstream out;
    out << "n,est_surplus,std_error,reverse_count\n";
    for (const auto& r : rows) {
        out << r.n << ',' << format_double(r.est_surplus) << ','
            << format_double(r.std_error) << ',' << r.reverse_count << '\n';
    }
    spill(path, out.str());
}

void write_tails_csv(const std::vector<harness::TailComparisonRow>& rows,
                     const std::string& path) {
    std::ostringstream out;
    out << "alpha,q_mahalanobis,q_weighted\n";
    for (const auto& r : rows) {
        out << format_double(r.alpha) << ',' << format_double(r.q_mahalanobis) << ','
            << format_double(r.q_weighted) << '\n';
    }
    spill(path, out.str());
}

conformal::CalibrationSet read_calibration_csv(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError("calibration CSV is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_line(line);
    Index k = 0, l = 0, h = 0;
    for (const auto& name : header) {
        if (name.rfind("x", 0) == 0) ++k;
        else if (name.rfind("yhat", 0) == 0) ++h;
        else if (name.rfind("y", 0) == 0) ++l;
        else throw IoError("unexpected calibration column name: " + name);
    }
    if (k < 1 || l < 1) {
        throw IoError("calibration CSV needs x1..xk and y1..yl columns");
    }
    if (h != 0 && h != l) {
        throw IoError("calibration CSV has a partial yhat block");
    }

    std::vector<std::vector<double>> data;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (static_cast<Index>(cells.size()) != k + l + h) {
            throw IoError("calibration CSV line " + std::to_string(line_no) +
                          " has the wrong number of cells");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        const std::string ctx = path + ":" + std::to_string(line_no);
        for (const auto& cell : cells) row.push_back(parse_cell(cell, ctx));
        data.push_back(std::move(row));
    }
    const Index n = static_cast<Index>(data.size());
    if (n < 2) throw IoError("calibration CSV needs at least two data rows");

    Matrix x(n, k), y(n, l), yhat(n, l);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < k; ++j) x(i, j) = data[i][j];
        for (Index j = 0; j < l; ++j) y(i, j) = data[i][k + j];
        if (h > 0) {
            for (Index j = 0; j < l; ++j) yhat(i, j) = data[i][k + l + j];
        }
    }
    if (h > 0) {
        return conformal::CalibrationSet(std::move(x), std::move(y), std::move(yhat));
    }
    return conformal::CalibrationSet(std::move(x), std::move(y));
}

std::string region_to_json_text(const conformal::RegionOutcome& region) {
    using conformal::RegionKind;
    json j;
    switch (region.kind) {
        case RegionKind::ellipsoid: j["kind"] = "ellipsoid"; break;
        case RegionKind::full_space: j["kind"] = "full_space"; break;
        case RegionKind::empty: j["kind"] = "empty"; break;
        case RegionKind::floored: j["kind"] = "floored"; break;
    }
    if (region.kind == RegionKind::full_space) {
        j["center"] = nullptr;
        j["shape"] = nullptr;
        j["radius"] = nullptr;
        j["volume"] = nullptr;
        j["eccentricity"] = nullptr;
    } else {
        j["center"] = vector_to_json(region.center);
        j["shape"] = matrix_to_json(region.shape);
        j["radius"] = region.radius;
        j["volume"] = conformal::region_volume(region);
        j["eccentricity"] = conformal::region_eccentricity(region);
        if (region.kind == RegionKind::floored) {
            j["floor_epsilon"] = region.floor_epsilon;
        }
    }
    return j.dump(2) + "\n";
}

std::string ball_to_json_text(const conformal::Ball& ball) {
    const Index l = ball.center.size();
    json j{{"kind", "ball"},
           {"center", vector_to_json(ball.center)},
           {"shape", matrix_to_json(Matrix::Identity(l, l))},
           {"radius", ball.squared_radius},
           {"volume", conformal::ball_volume(ball, l)},
           {"eccentricity", 0.0}};
    return j.dump(2) + "\n";
}

void write_region_json(const conformal::RegionOutcome& region, const std::string& path) {
    spill(path, region_to_json_text(region));
}

}  // namespace confellip::io
