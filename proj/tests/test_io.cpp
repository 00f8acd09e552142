#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "copsurv/estimation.hpp"
#include "copsurv/io.hpp"
#include "copsurv/simulation.hpp"

using namespace copsurv;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("shortest-round-trip number formatting", "[io]") {
    for (double x : {0.1, 1.0 / 3.0, 2.0, 1e-300, -4.25e17, 0.0}) {
        const std::string s = io::fmt(x);
        REQUIRE(std::stod(s) == x);
    }
    REQUIRE(io::fmt(2.0) == "2");
    REQUIRE(io::fmt(0.5) == "0.5");
}

TEST_CASE("dataset csv writes and reads back exactly", "[io]") {
    Dataset d;
    d.add(1.2345678901234567, 1);
    d.add(1e-7, 0);
    d.add(987654.25, 1);
    io::OutputMetadata meta;
    meta.command = "unit-test";
    meta.seed = 42;
    meta.has_seed = true;

    std::ostringstream os;
    io::write_dataset_csv(os, d, meta);
    const std::string text = os.str();
    REQUIRE_THAT(text, ContainsSubstring("# tool_version:"));
    REQUIRE_THAT(text, ContainsSubstring("# command: unit-test"));
    REQUIRE_THAT(text, ContainsSubstring("# seed: 42"));
    REQUIRE_THAT(text, ContainsSubstring("y,delta"));

    std::istringstream is(text);
    const auto r = io::read_dataset_csv(is);
    REQUIRE(r.rejected_nonpositive == 0);
    REQUIRE(r.data.y == d.y); // bitwise identical round trip
    REQUIRE(r.data.delta == d.delta);
}

TEST_CASE("dataset csv rejects what it must and says where", "[io]") {
    SECTION("nonpositive survival times are counted and dropped") {
        std::istringstream is("y,delta\n1.5,1\n-2.0,0\n0,1\n3.5,0\n");
        const auto r = io::read_dataset_csv(is);
        REQUIRE(r.data.n() == 2);
        REQUIRE(r.rejected_nonpositive == 2);
    }
    SECTION("malformed rows raise an error naming the line numbers") {
        std::istringstream is("# comment\ny,delta\n1.5,1\nabc,1\n2.0,7\n3.0,0\n4.0\n");
        try {
            io::read_dataset_csv(is, "test.csv");
            FAIL("expected io_error");
        } catch (const io_error& e) {
            const std::string msg = e.what();
            REQUIRE_THAT(msg, ContainsSubstring("test.csv"));
            REQUIRE_THAT(msg, ContainsSubstring("lines 4, 5, 7"));
        }
    }
    SECTION("delta must be literally 0 or 1") {
        std::istringstream is("y,delta\n1.0,1.0\n");
        REQUIRE_THROWS_AS(io::read_dataset_csv(is), io_error);
    }
    SECTION("missing or wrong header") {
        std::istringstream is1("1.0,1\n2.0,0\n");
        REQUIRE_THROWS_AS(io::read_dataset_csv(is1), io_error);
        std::istringstream is2("time,status\n1.0,1\n");
        REQUIRE_THROWS_WITH(io::read_dataset_csv(is2), ContainsSubstring("y,delta"));
        std::istringstream is3("# only comments\n");
        REQUIRE_THROWS_AS(io::read_dataset_csv(is3), io_error);
    }
    SECTION("missing file error names the path") {
        REQUIRE_THROWS_WITH(io::read_dataset_csv_file("/nonexistent/x.csv"),
                            ContainsSubstring("/nonexistent/x.csv"));
    }
}

TEST_CASE("fit result serialization", "[io]") {
    math::Rng rng(3);
    const Dataset d = sample_observed(Scenario::by_id(1).model(CopulaFamily::Frank, 0.5), 300, rng);
    FitOptions o;
    o.compute_sandwich = true;
    const FitResult fr = fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal, o);
    REQUIRE(fr.converged);

    io::OutputMetadata meta;
    meta.command = "copsurv fit --data d.csv";
    meta.seed = 0;
    meta.has_seed = true;
    auto j = io::fit_result_to_json(fr, meta);

    REQUIRE(j["tool_version"] == version_string);
    REQUIRE(j["command"] == "copsurv fit --data d.csv");
    REQUIRE(j["seed"] == 0);
    REQUIRE(j["copula"] == "frank");
    REQUIRE(j["margin_t"]["family"] == "lognormal");
    REQUIRE(j["margin_t"]["params"].size() == 2);
    REQUIRE(j["transform"] == "logit(tau)");
    REQUIRE_THAT(j["tau"].get<double>(), WithinRel(fr.model.copula.tau, 1e-14));
    REQUIRE_THAT(j["theta"].get<double>(), WithinRel(fr.model.copula.theta, 1e-14));
    REQUIRE(j["estimate"]["names"].size() == 5);
    REQUIRE(j["estimate"]["values"].size() == 5);
    REQUIRE(j["estimate"]["natural_names"].size() == 6);
    REQUIRE(j["estimate"]["natural_values"].size() == 6);
    REQUIRE(j["converged"] == true);
    REQUIRE(j.contains("loglik"));
    REQUIRE(j.contains("gradient_inf_norm"));
    REQUIRE(j.contains("fitted_prob_uncensored"));
    REQUIRE(j["sandwich"]["se"].size() == 5);
    REQUIRE(j["sandwich"]["cov"].size() == 5);
    REQUIRE(j["sandwich"]["cov"][0].size() == 5);

    // bootstrap block is appended on demand
    FitOptions ob;
    ob.start = fr.estimate.values;
    const BootstrapResult b =
        bootstrap(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal, 4, 9, ob);
    io::add_bootstrap_to_json(j, b);
    REQUIRE(j["bootstrap"]["B"] == 4);
    REQUIRE(j["bootstrap"]["se"].size() == 5);
    REQUIRE(j["bootstrap"]["se_natural"].size() == 6);
    REQUIRE(j["bootstrap"]["used"].get<int>() + j["bootstrap"]["dropped"].get<int>() == 4);

    // an independence fit has no dependence fields
    const FitResult fi =
        fit(d, CopulaFamily::Independence, MarginFamily::LogNormal, MarginFamily::LogNormal);
    const auto ji = io::fit_result_to_json(fi, meta);
    REQUIRE_FALSE(ji.contains("tau"));
    REQUIRE_FALSE(ji.contains("transform"));
    REQUIRE(ji["estimate"]["names"].size() == 4);
}

TEST_CASE("density and probe tables", "[io]") {
    const ModelSpec m = Scenario::by_id(1).model(CopulaFamily::Frank, 0.5);
    io::OutputMetadata meta;
    meta.command = "x";

    std::ostringstream os;
    io::write_density_csv(os, theoretical_density_grid(m, {1.0, 2.0}), meta);
    const std::string text = os.str();
    REQUIRE_THAT(text, ContainsSubstring("y,f_y,f_y_delta1,f_y_delta0"));
    REQUIRE(std::count(text.begin(), text.end(), '\n') >= 4);

    const ProbeReport rep = probe_identifiability(m, default_probe_grid(m));
    std::ostringstream ps;
    io::write_probe_csv(ps, rep, meta);
    REQUIRE_THAT(ps.str(),
                 ContainsSubstring("t,F_t,F_c,h_tc,h_ct,cdf_ratio,log_cdf_ratio,a_tc,a_ct"));

    const auto lines = io::probe_verdict_lines(rep);
    REQUIRE(lines.size() >= 3);
    bool c2a = false, c2b = false;
    for (const auto& ln : lines) {
        if (ln.find("(C2a)") != std::string::npos) {
            c2a = true;
            REQUIRE_THAT(ln, ContainsSubstring("satisfied"));
        }
        if (ln.find("(C2b)") != std::string::npos) c2b = true;
    }
    REQUIRE(c2a);
    REQUIRE(c2b);

    // Gaussian models report the extra trajectory columns with values
    const ModelSpec mg = Scenario::by_id(1).model(CopulaFamily::Gaussian, 0.5);
    const ProbeReport repg = probe_identifiability(mg, {2.0, 8.0});
    std::ostringstream gs;
    io::write_probe_csv(gs, repg, meta);
    std::string line2 = gs.str();
    line2 = line2.substr(line2.rfind('\n', line2.size() - 2) + 1); // last data row
    REQUIRE(std::count(line2.begin(), line2.end(), ',') == 8);
    REQUIRE(line2.back() != ','); // a_ct populated for the Gaussian family
}

TEST_CASE("study summary table layout", "[io]") {
    StudyCell cell{Scenario::by_id(1), CopulaFamily::Frank, 0.5, 120, 2, 77,
                   DependenceTransform::LogitTau};
    const CellSummary s = run_cell(cell);
    std::ostringstream os;
    io::write_summary_csv_header(os);
    io::append_summary_csv(os, s);
    const std::string text = os.str();
    REQUIRE_THAT(text, ContainsSubstring(
                           "scenario,family,tau,n,reps,reps_used,dropped,high_drop_warning,"
                           "parameter,truth,average.estimate,sd.of.average.estimate,average.bias,RMSE"));
    REQUIRE_THAT(text, ContainsSubstring("1,frank,0.5,120,2,"));
    REQUIRE_THAT(text, ContainsSubstring("logit(tau)"));
    // one row per chart coordinate plus the tau row
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 1 + 6);

    // single-replicate cells leave the spread column empty, not zero
    StudyCell one = cell;
    one.reps = 1;
    std::ostringstream os1;
    io::append_summary_csv(os1, run_cell(one));
    const std::string t1 = os1.str();
    const std::string first_row = t1.substr(0, t1.find('\n'));
    REQUIRE_THAT(first_row, ContainsSubstring(",,"));
}
