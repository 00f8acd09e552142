// copsurv: fit, simulate, and diagnose parametric survival models where the
// censoring time is tied to the survival time through a copula.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "copsurv/copsurv.hpp"

namespace {

using namespace copsurv;

// ---------------------------------------------------------------------------
// Shared option plumbing
// ---------------------------------------------------------------------------

struct GridSpec {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
};

GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    std::istringstream is(s);
    char c1 = 0, c2 = 0;
    if (!(is >> g.lo >> c1 >> g.hi >> c2 >> g.count) || c1 != ':' || c2 != ':' || !is.eof())
        throw CLI::ValidationError("--grid", "expected lo:hi:count, got '" + s + "'");
    if (!(g.lo > 0.0) || !(g.hi > g.lo))
        throw CLI::ValidationError("--grid", "grid bounds must be positive with lo < hi");
    if (g.count < 2) throw CLI::ValidationError("--grid", "grid needs at least 2 points");
    return g;
}

std::vector<double> linear_grid(const GridSpec& g) {
    std::vector<double> out(g.count);
    for (std::size_t i = 0; i < g.count; ++i)
        out[i] = g.lo + (g.hi - g.lo) * static_cast<double>(i) / static_cast<double>(g.count - 1);
    return out;
}

std::vector<double> log_grid(const GridSpec& g) {
    std::vector<double> out(g.count);
    const double llo = std::log(g.lo), lhi = std::log(g.hi);
    for (std::size_t i = 0; i < g.count; ++i)
        out[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(g.count - 1));
    return out;
}

/// "lognormal:2.2,1.0" -> margin with parameters; "lognormal" -> family only.
struct MarginArg {
    MarginFamily family = MarginFamily::LogNormal;
    std::optional<MarginParams> params;
};

MarginArg parse_margin(const std::string& s) {
    MarginArg m;
    const auto colon = s.find(':');
    if (colon == std::string::npos) {
        m.family = margin_family_from_name(s);
        return m;
    }
    m.family = margin_family_from_name(s.substr(0, colon));
    std::vector<double> p;
    std::istringstream is(s.substr(colon + 1));
    std::string tok;
    while (std::getline(is, tok, ',')) p.push_back(std::stod(tok));
    if (p.size() != margin_dim(m.family))
        throw CLI::ValidationError("margin", margin_family_name(m.family) + " takes " +
                                                 std::to_string(margin_dim(m.family)) +
                                                 " parameters, got " + std::to_string(p.size()));
    switch (m.family) {
        case MarginFamily::LogNormal: m.params = MarginParams::lognormal(p[0], p[1]); break;
        case MarginFamily::Weibull: m.params = MarginParams::weibull(p[0], p[1]); break;
        case MarginFamily::LogLogistic: m.params = MarginParams::loglogistic(p[0], p[1]); break;
        case MarginFamily::LogStudentT: m.params = MarginParams::logstudentt(p[0], p[1], p[2]); break;
    }
    return m;
}

/// Options shared by the commands that need a fully specified model.
struct ModelOptions {
    int scenario = 0;
    std::string margin_t_spec, margin_c_spec;
    std::string copula_name = "independence";
    double tau = std::numeric_limits<double>::quiet_NaN();
    double theta = std::numeric_limits<double>::quiet_NaN();

    void attach(CLI::App* cmd, bool need_copula = true) {
        cmd->add_option("--scenario", scenario, "benchmark parameter set (1 or 2) for log-normal margins")
            ->check(CLI::IsMember({1, 2}));
        cmd->add_option("--margin-t", margin_t_spec, "survival margin, family:p1,p2[,p3]");
        cmd->add_option("--margin-c", margin_c_spec, "censoring margin, family:p1,p2[,p3]");
        if (need_copula) {
            cmd->add_option("--copula", copula_name,
                            "copula family: independence|frank|clayton|gumbel|gaussian");
            cmd->add_option("--tau", tau, "dependence as Kendall's tau");
            cmd->add_option("--theta", theta, "dependence as the natural copula parameter");
        }
    }

    ModelSpec build() const {
        MarginParams mt = MarginParams::lognormal(0, 1), mc = mt;
        if (scenario != 0) {
            const Scenario sc = Scenario::by_id(scenario);
            mt = sc.margin_t();
            mc = sc.margin_c();
        } else {
            if (margin_t_spec.empty() || margin_c_spec.empty())
                throw CLI::ValidationError("model", "need --scenario or both --margin-t/--margin-c with parameters");
            const MarginArg at = parse_margin(margin_t_spec), ac = parse_margin(margin_c_spec);
            if (!at.params || !ac.params)
                throw CLI::ValidationError("model", "margins here need explicit parameters (family:p1,p2)");
            mt = *at.params;
            mc = *ac.params;
        }
        const CopulaFamily fam = copula_family_from_name(copula_name);
        CopulaSpec cop = CopulaSpec::independence();
        if (fam != CopulaFamily::Independence) {
            const bool has_tau = !std::isnan(tau), has_theta = !std::isnan(theta);
            if (has_tau == has_theta)
                throw CLI::ValidationError("model", "give exactly one of --tau or --theta for a dependent copula");
            cop = has_tau ? CopulaSpec::from_tau(fam, tau) : CopulaSpec::from_theta(fam, theta);
        }
        return ModelSpec{cop, mt, mc};
    }
};

int default_threads() {
    if (const char* env = std::getenv("COPSURV_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

void write_file(const std::string& path, const std::string& content) {
    io::write_text_file(path, content);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"parametric survival modeling under copula-dependent censoring"};
    app.require_subcommand(1);

    int threads = default_threads();
    app.add_option("--threads", threads, "worker threads for bootstrap/study (default: COPSURV_THREADS or 1)")
        ->check(CLI::PositiveNumber);

    io::OutputMetadata meta;
    meta.command = join_args(argc, argv);

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "draw an observed dataset from a model");
    ModelOptions sim_model;
    sim_model.attach(sim);
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 0;
    std::string sim_out = "data.csv";
    sim->add_option("--n", sim_n, "number of records");
    sim->add_option("--seed", sim_seed, "random seed (recorded in the output)");
    sim->add_option("--out", sim_out, "output CSV path");

    // --- fit / bootstrap ---------------------------------------------------
    std::string fit_data, fit_out = "fit.json", fit_copula = "frank";
    std::string fit_margin_t = "lognormal", fit_margin_c = "lognormal";
    std::string fit_transform = "logit";
    int fit_bootstrap = 0;
    std::uint64_t fit_seed = 0;
    bool fit_all = false;
    double fit_fixed_nu_t = std::numeric_limits<double>::quiet_NaN();
    double fit_fixed_nu_c = std::numeric_limits<double>::quiet_NaN();
    int fit_max_iterations = 2000, fit_max_polish = 200, fit_restarts = 5;

    auto add_fit_options = [&](CLI::App* cmd) {
        cmd->add_option("--data", fit_data, "input CSV with header y,delta")->required();
        cmd->add_option("--copula", fit_copula, "copula family to fit");
        cmd->add_flag("--all-copulas", fit_all, "fit every family and emit a comparison");
        cmd->add_option("--margin-t", fit_margin_t, "survival margin family");
        cmd->add_option("--margin-c", fit_margin_c, "censoring margin family");
        cmd->add_option("--transform", fit_transform, "dependence chart: logit|fisherz");
        cmd->add_option("--seed", fit_seed, "seed for restarts and bootstrap");
        cmd->add_option("--out", fit_out, "output JSON path");
        cmd->add_option("--fixed-nu-t", fit_fixed_nu_t, "pin the log-t tail index of the T margin");
        cmd->add_option("--fixed-nu-c", fit_fixed_nu_c, "pin the log-t tail index of the C margin");
        cmd->add_option("--max-iterations", fit_max_iterations, "simplex iteration cap");
        cmd->add_option("--max-polish-iterations", fit_max_polish, "gradient-polish iteration cap");
        cmd->add_option("--restarts", fit_restarts, "randomized restarts while unconverged");
    };
    auto* fitc = app.add_subcommand("fit", "maximum-likelihood fit to a dataset");
    add_fit_options(fitc);
    fitc->add_option("--bootstrap", fit_bootstrap, "bootstrap replicates for standard errors (0 = off)");
    auto* bootc = app.add_subcommand("bootstrap", "fit plus bootstrap standard errors");
    add_fit_options(bootc);
    int boot_B = 100;
    bootc->add_option("--B", boot_B, "bootstrap replicates")->required();

    // --- study --------------------------------------------------------------
    auto* study = app.add_subcommand("study", "replicate simulation study over a cell grid");
    int study_scenario = 1;
    std::string study_families = "frank", study_transform = "logit";
    std::vector<double> study_taus{0.5};
    std::vector<std::size_t> study_ns{1000};
    int study_reps = 100;
    std::uint64_t study_seed = 0;
    std::string study_out = "summary.csv";
    study->add_option("--scenario", study_scenario)->check(CLI::IsMember({1, 2}));
    study->add_option("--families", study_families, "comma-separated copula families");
    study->add_option("--taus", study_taus, "Kendall tau values")->delimiter(',');
    study->add_option("--ns", study_ns, "sample sizes")->delimiter(',');
    study->add_option("--reps", study_reps, "replicates per cell");
    study->add_option("--seed", study_seed);
    study->add_option("--transform", study_transform, "dependence chart: logit|fisherz");
    study->add_option("--out", study_out, "summary CSV path");

    // --- density ------------------------------------------------------------
    auto* dens = app.add_subcommand("density", "tabulate the observed-time density and subdensities");
    ModelOptions dens_model;
    dens_model.attach(dens);
    std::string dens_grid = "0.1:60:300", dens_out = "density.csv";
    dens->add_option("--grid", dens_grid, "lo:hi:count (linear in t)");
    dens->add_option("--out", dens_out);

    // --- probe ---------------------------------------------------------------
    auto* probe = app.add_subcommand("probe", "numeric identifiability diagnostics");
    ModelOptions probe_model;
    probe_model.attach(probe);
    std::string probe_grid, probe_out = "probe.csv";
    probe->add_option("--grid", probe_grid, "lo:hi:count (log-spaced in t; default 1e-6..1e6 x median)");
    probe->add_option("--out", probe_out);

    try {
        app.parse(argc, argv);

        if (sim->parsed()) {
            meta.seed = sim_seed;
            meta.has_seed = true;
            const ModelSpec m = sim_model.build();
            math::Rng rng(sim_seed);
            const Dataset d = sample_observed(m, sim_n, rng);
            std::ostringstream os;
            io::write_dataset_csv(os, d, meta);
            write_file(sim_out, os.str());
            const double md = d.n() ? static_cast<double>(d.count_uncensored()) / d.n() : 0.0;
            std::cout << "wrote " << d.n() << " records (mean delta " << io::fmt(md) << ") to "
                      << sim_out << "\n";
            return 0;
        }

        if (fitc->parsed() || bootc->parsed()) {
            const bool boot_mode = bootc->parsed();
            const int B = boot_mode ? boot_B : fit_bootstrap;
            meta.seed = fit_seed;
            meta.has_seed = true;
            const auto read = io::read_dataset_csv_file(fit_data);
            if (read.rejected_nonpositive > 0)
                std::cerr << "note: dropped " << read.rejected_nonpositive
                          << " rows with non-positive y\n";
            const MarginFamily mt = parse_margin(fit_margin_t).family;
            const MarginFamily mc = parse_margin(fit_margin_c).family;
            FitOptions opts;
            opts.transform = transform_from_name(fit_transform);
            opts.max_simplex_iterations = fit_max_iterations;
            opts.max_polish_iterations = fit_max_polish;
            opts.restarts = fit_restarts;
            opts.restart_seed = fit_seed;
            opts.compute_sandwich = true;
            if (!std::isnan(fit_fixed_nu_t)) opts.fixed_nu_t = fit_fixed_nu_t;
            if (!std::isnan(fit_fixed_nu_c)) opts.fixed_nu_c = fit_fixed_nu_c;

            std::vector<CopulaFamily> fams;
            if (fit_all)
                fams = {CopulaFamily::Independence, CopulaFamily::Frank, CopulaFamily::Clayton,
                        CopulaFamily::Gumbel, CopulaFamily::Gaussian};
            else
                fams = {copula_family_from_name(fit_copula)};

            bool all_converged = true;
            nlohmann::ordered_json jfits = nlohmann::ordered_json::array();
            for (CopulaFamily fam : fams) {
                FitOptions fo = opts;
                // under --all-copulas one shared transform is requested; fall
                // back to logit for the positive-dependence-only families,
                // where fisher-z is undefined. A single-family fit passes the
                // request through and lets validation reject the combination.
                if (fit_all && (fam == CopulaFamily::Clayton || fam == CopulaFamily::Gumbel))
                    fo.transform = DependenceTransform::LogitTau;
                FitResult fr = fit(read.data, fam, mt, mc, fo);
                if (B > 0) {
                    FitOptions bo = fo;
                    bo.start = fr.estimate.values; // warm-start replicates at the parent fit
                    const BootstrapResult bs = bootstrap(read.data, fam, mt, mc, B, fit_seed, bo, threads);
                    fr.cov_bootstrap = bs.cov;
                    fr.bootstrap_se = bs.se;
                    nlohmann::ordered_json j = io::fit_result_to_json(fr, meta);
                    io::add_bootstrap_to_json(j, bs);
                    jfits.push_back(std::move(j));
                } else {
                    jfits.push_back(io::fit_result_to_json(fr, meta));
                }
                all_converged = all_converged && fr.converged;
                if (fit_all)
                    std::cout << copula_family_name(fam) << ": loglik " << io::fmt(fr.loglik)
                              << (fr.estimate.layout.has_dependence()
                                      ? ", tau " + io::fmt(fr.model.copula.tau) + ", theta " +
                                            io::fmt(fr.model.copula.theta)
                                      : "")
                              << (fr.converged ? "" : "  [not converged]") << "\n";
                else
                    std::cout << "loglik " << io::fmt(fr.loglik) << ", converged "
                              << (fr.converged ? "yes" : "no") << "\n";
            }
            std::string payload;
            if (fit_all) {
                nlohmann::ordered_json j;
                j["tool_version"] = version_string;
                j["command"] = meta.command;
                j["seed"] = meta.seed;
                j["fits"] = jfits;
                payload = j.dump(2) + "\n";
            } else {
                payload = jfits[0].dump(2) + "\n";
            }
            write_file(fit_out, payload);
            return all_converged ? 0 : 2;
        }

        if (study->parsed()) {
            meta.seed = study_seed;
            meta.has_seed = true;
            std::vector<CopulaFamily> fams;
            {
                std::istringstream is(study_families);
                std::string tok;
                while (std::getline(is, tok, ',')) fams.push_back(copula_family_from_name(tok));
            }
            if (fams.empty()) throw CLI::ValidationError("--families", "none given");
            std::ostringstream os;
            io::write_metadata(os, meta);
            io::write_summary_csv_header(os);
            for (CopulaFamily fam : fams) {
                for (double tau : study_taus) {
                    for (std::size_t n : study_ns) {
                        StudyCell cell{Scenario::by_id(study_scenario), fam, tau, n, study_reps,
                                       study_seed, transform_from_name(study_transform)};
                        const CellSummary s = run_cell(cell, threads);
                        io::append_summary_csv(os, s);
                        std::cout << "cell " << copula_family_name(fam) << " tau=" << io::fmt(tau)
                                  << " n=" << n << ": " << s.reps_used << "/" << cell.reps
                                  << " replicates converged"
                                  << (s.warning_high_drop_rate ? "  [warning: >20% dropped]" : "")
                                  << "\n";
                    }
                }
            }
            write_file(study_out, os.str());
            return 0;
        }

        if (dens->parsed()) {
            const ModelSpec m = dens_model.build();
            const auto grid = theoretical_density_grid(m, linear_grid(parse_grid(dens_grid)));
            std::ostringstream os;
            io::write_density_csv(os, grid, meta);
            write_file(dens_out, os.str());
            std::cout << "wrote " << grid.size() << " grid rows to " << dens_out << "\n";
            return 0;
        }

        if (probe->parsed()) {
            const ModelSpec m = probe_model.build();
            const std::vector<double> grid =
                probe_grid.empty() ? default_probe_grid(m) : log_grid(parse_grid(probe_grid));
            const ProbeReport rep = probe_identifiability(m, grid);
            std::ostringstream os;
            io::write_probe_csv(os, rep, meta);
            write_file(probe_out, os.str());
            for (const std::string& line : io::probe_verdict_lines(rep)) std::cout << line << "\n";
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
