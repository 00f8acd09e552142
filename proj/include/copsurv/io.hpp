#pragma once

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "copsurv/estimation.hpp"
#include "copsurv/simulation.hpp"
#include "copsurv/version.hpp"

namespace copsurv::io {

/// Shortest round-trip decimal form of x (so repeated runs are byte-identical
/// and re-parsing loses nothing).
inline std::string fmt(double x) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

/// Header block stamped on every output file.
struct OutputMetadata {
    std::string command;
    std::uint64_t seed = 0;
    bool has_seed = false;
};

inline void write_metadata(std::ostream& os, const OutputMetadata& meta) {
    os << "# tool_version: " << version_string << "\n";
    if (!meta.command.empty()) os << "# command: " << meta.command << "\n";
    if (meta.has_seed) os << "# seed: " << meta.seed << "\n";
}

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

inline void write_dataset_csv(std::ostream& os, const Dataset& d, const OutputMetadata& meta) {
    write_metadata(os, meta);
    os << "y,delta\n";
    for (std::size_t i = 0; i < d.n(); ++i) os << fmt(d.y[i]) << "," << d.delta[i] << "\n";
}

struct DatasetReadResult {
    Dataset data;
    std::size_t rejected_nonpositive = 0; // parsable rows dropped for y <= 0
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

inline bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    const auto r = std::from_chars(b, e, out);
    return r.ec == std::errc{} && r.ptr == e;
}

} // namespace detail

/// Parse a `y,delta` CSV. `#` lines are metadata and skipped. Rows that do not
/// parse are an error listing their line numbers; rows with y <= 0 are
/// dropped and counted (they carry no usable survival information).
inline DatasetReadResult read_dataset_csv(std::istream& is, const std::string& origin = "<stream>") {
    DatasetReadResult out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    std::vector<std::size_t> bad_lines;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            if (t != "y,delta")
                throw io_error(origin + ": expected header 'y,delta', got '" + t + "' at line " +
                               std::to_string(lineno));
            header_seen = true;
            continue;
        }
        const auto comma = t.find(',');
        bool ok = comma != std::string::npos;
        double y = 0.0;
        int delta = -1;
        if (ok) {
            const std::string ys = detail::trim(t.substr(0, comma));
            const std::string ds = detail::trim(t.substr(comma + 1));
            ok = detail::parse_double(ys, y) && std::isfinite(y);
            if (ds == "0") delta = 0;
            else if (ds == "1") delta = 1;
            else ok = false;
        }
        if (!ok) {
            bad_lines.push_back(lineno);
            continue;
        }
        if (y <= 0.0) {
            ++out.rejected_nonpositive;
            continue;
        }
        out.data.add(y, delta);
    }
    if (!header_seen) throw io_error(origin + ": no 'y,delta' header found");
    if (!bad_lines.empty()) {
        std::ostringstream msg;
        msg << origin << ": malformed rows at line";
        if (bad_lines.size() > 1) msg << "s";
        const std::size_t show = std::min<std::size_t>(bad_lines.size(), 20);
        for (std::size_t i = 0; i < show; ++i) msg << (i ? ", " : " ") << bad_lines[i];
        if (bad_lines.size() > show) msg << " and " << bad_lines.size() - show << " more";
        throw io_error(msg.str());
    }
    return out;
}

inline DatasetReadResult read_dataset_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open data file '" + path + "'");
    return read_dataset_csv(is, path);
}

// ---------------------------------------------------------------------------
// Model / fit serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json margin_to_json(const MarginParams& m) {
    nlohmann::ordered_json j;
    j["family"] = margin_family_name(m.family);
    const auto names = margin_param_names(m.family);
    nlohmann::ordered_json params;
    for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = m.p[i];
    j["params"] = params;
    return j;
}

inline nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::ordered_json fit_result_to_json(const FitResult& fr, const OutputMetadata& meta) {
    nlohmann::ordered_json j;
    j["tool_version"] = version_string;
    if (!meta.command.empty()) j["command"] = meta.command;
    if (meta.has_seed) j["seed"] = meta.seed;
    j["copula"] = copula_family_name(fr.estimate.layout.copula);
    j["margin_t"] = margin_to_json(fr.model.margin_t);
    j["margin_c"] = margin_to_json(fr.model.margin_c);
    if (fr.estimate.layout.has_dependence()) {
        j["transform"] = transform_name(fr.estimate.layout.transform);
        j["tau"] = fr.model.copula.tau;
        j["theta"] = fr.model.copula.theta;
    }
    nlohmann::ordered_json est;
    est["names"] = fr.estimate.layout.names();
    est["values"] = fr.estimate.values;
    est["natural_names"] = fr.estimate.layout.natural_names();
    est["natural_values"] = fr.estimate.layout.natural_values(fr.model);
    j["estimate"] = est;
    j["loglik"] = fr.loglik;
    j["converged"] = fr.converged;
    j["iterations"] = fr.iterations;
    j["restarts_used"] = fr.restarts_used;
    j["gradient_inf_norm"] = fr.gradient_inf_norm;
    j["tau_near_boundary"] = fr.tau_near_boundary;
    j["fitted_prob_uncensored"] = fr.fitted_prob_uncensored;
    if (fr.cov_sandwich) {
        nlohmann::ordered_json sw;
        std::vector<double> se;
        for (Eigen::Index k = 0; k < fr.cov_sandwich->rows(); ++k)
            se.push_back(std::sqrt(std::fmax((*fr.cov_sandwich)(k, k), 0.0)));
        sw["se"] = se;
        sw["cov"] = matrix_to_json(*fr.cov_sandwich);
        j["sandwich"] = sw;
    }
    return j;
}

inline void add_bootstrap_to_json(nlohmann::ordered_json& j, const BootstrapResult& b) {
    nlohmann::ordered_json bs;
    bs["B"] = b.requested;
    bs["used"] = b.used;
    bs["dropped"] = b.dropped;
    bs["names"] = b.names;
    bs["se"] = b.se;
    bs["natural_names"] = b.natural_names;
    bs["se_natural"] = b.se_natural;
    bs["cov"] = matrix_to_json(b.cov);
    j["bootstrap"] = bs;
}

// ---------------------------------------------------------------------------
// Diagnostic / study CSV exports
// ---------------------------------------------------------------------------

inline void write_density_csv(std::ostream& os, const std::vector<SubdensityPoint>& grid,
                              const OutputMetadata& meta) {
    write_metadata(os, meta);
    os << "y,f_y,f_y_delta1,f_y_delta0\n";
    for (const auto& p : grid)
        os << fmt(p.y) << "," << fmt(p.f_y) << "," << fmt(p.f_y_delta1) << "," << fmt(p.f_y_delta0)
           << "\n";
}

inline void write_probe_csv(std::ostream& os, const ProbeReport& rep, const OutputMetadata& meta) {
    write_metadata(os, meta);
    os << "t,F_t,F_c,h_tc,h_ct,cdf_ratio,log_cdf_ratio,a_tc,a_ct\n";
    for (const auto& p : rep.points) {
        os << fmt(p.t) << "," << fmt(p.F_t) << "," << fmt(p.F_c) << "," << fmt(p.h_tc) << ","
           << fmt(p.h_ct) << "," << fmt(p.cdf_ratio) << "," << fmt(p.log_cdf_ratio) << ",";
        if (std::isnan(p.a_tc)) os << ",";
        else os << fmt(p.a_tc) << "," << fmt(p.a_ct);
        os << "\n";
    }
}

/// Human-readable reading of the probe, mirroring the report flags.
inline std::vector<std::string> probe_verdict_lines(const ProbeReport& rep) {
    std::vector<std::string> out;
    auto verdict = [](bool vanishes, bool monotone) {
        if (vanishes && monotone) return std::string("satisfied (numeric)");
        if (vanishes) return std::string("endpoint below 1e-4, but not monotone into it");
        return std::string("not satisfied (numeric)");
    };
    out.push_back("(C2a) h_{T|C}(F_T|F_C) -> 0 as t -> 0: " +
                  verdict(rep.c2a_h_tc_vanishes_at_0, rep.h_tc_decreasing_into_tmin) +
                  "  [value " + fmt(rep.h_tc_at_tmin) + " at smallest t]");
    out.push_back("(C2b) h_{C|T}(F_C|F_T) -> 0 as t -> 0: " +
                  verdict(rep.c2b_h_ct_vanishes_at_0, rep.h_ct_decreasing_into_tmin) +
                  "  [value " + fmt(rep.h_ct_at_tmin) + " at smallest t]");
    std::string ratio = "margin CDF ratio F_T/F_C at smallest t: " + fmt(rep.cdf_ratio_at_tmin);
    if (rep.cdf_ratio_to_zero) ratio += "  (tends to 0: ratio condition for Clayton-type identifiability holds)";
    else if (rep.cdf_ratio_to_infinity) ratio += "  (tends to infinity: ratio condition holds with roles swapped)";
    else ratio += "  (no clear 0/infinity trend at this grid)";
    out.push_back(ratio);
    out.push_back("log-CDF ratio log F_T / log F_C at smallest t: " + fmt(rep.log_cdf_ratio_at_tmin));
    if (rep.has_gaussian_trajectories)
        out.push_back("Gaussian trajectories A(t) = Phi^{-1}(F_T) - theta Phi^{-1}(F_C) exported per grid point");
    if (rep.has_nonfinite)
        out.push_back("warning: non-finite values encountered at extreme grid points");
    return out;
}

/// Long-format study summary: one row per (cell, coordinate), with the
/// conventional column names for the replicate statistics.
inline void write_summary_csv_header(std::ostream& os) {
    os << "scenario,family,tau,n,reps,reps_used,dropped,high_drop_warning,parameter,truth,"
          "average.estimate,sd.of.average.estimate,average.bias,RMSE\n";
}

inline void append_summary_csv(std::ostream& os, const CellSummary& s) {
    for (std::size_t j = 0; j < s.names.size(); ++j) {
        os << s.cell.scenario.id << "," << copula_family_name(s.cell.family) << ","
           << fmt(s.cell.tau) << "," << s.cell.n << "," << s.cell.reps << "," << s.reps_used << ","
           << s.dropped << "," << (s.warning_high_drop_rate ? 1 : 0) << "," << s.names[j] << ","
           << fmt(s.truth[j]) << ",";
        if (s.reps_used >= 1) os << fmt(s.average_estimate[j]);
        os << ",";
        if (!s.sd_of_average_estimate.empty()) os << fmt(s.sd_of_average_estimate[j]);
        os << ",";
        if (s.reps_used >= 1) os << fmt(s.average_bias[j]);
        os << ",";
        if (s.reps_used >= 1) os << fmt(s.rmse[j]);
        os << "\n";
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open output file '" + path + "'");
    os << content;
    if (!os) throw io_error("failed writing output file '" + path + "'");
}

} // namespace copsurv::io
