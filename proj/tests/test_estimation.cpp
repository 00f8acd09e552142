#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "copsurv/estimation.hpp"
#include "copsurv/math/quadrature.hpp"
#include "copsurv/simulation.hpp"

using namespace copsurv;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Dataset simulate_scenario(int sid, CopulaFamily f, double tau, std::size_t n, std::uint64_t seed) {
    math::Rng rng(seed);
    return sample_observed(Scenario::by_id(sid).model(f, tau), n, rng);
}

ParamLayout layout_for(CopulaFamily f, MarginFamily mt, MarginFamily mc,
                       DependenceTransform tr = DependenceTransform::LogitTau) {
    ParamLayout L;
    L.copula = f;
    L.margin_t = mt;
    L.margin_c = mc;
    L.transform = tr;
    return L;
}

} // namespace

TEST_CASE("dataset validation", "[estimation]") {
    Dataset d;
    d.add(1.0, 1);
    d.add(2.5, 0);
    REQUIRE_NOTHROW(d.validate());
    REQUIRE(d.count_uncensored() == 1);

    Dataset bad1;
    bad1.add(-1.0, 1);
    REQUIRE_THROWS_AS(bad1.validate(), std::invalid_argument);
    Dataset bad2;
    bad2.add(1.0, 2);
    REQUIRE_THROWS_AS(bad2.validate(), std::invalid_argument);
    Dataset bad3;
    bad3.y = {1.0, 2.0};
    bad3.delta = {1};
    REQUIRE_THROWS_AS(bad3.validate(), std::invalid_argument);
}

TEST_CASE("parameter layout shape and names", "[estimation]") {
    const auto L = layout_for(CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal);
    REQUIRE(L.dim() == 5);
    REQUIRE(L.names() == std::vector<std::string>{"mu_T", "log(sigma_T)", "mu_C", "log(sigma_C)",
                                                  "logit(tau)"});
    REQUIRE(L.natural_names() ==
            std::vector<std::string>{"mu_T", "sigma_T", "mu_C", "sigma_C", "tau", "theta"});

    const auto LI =
        layout_for(CopulaFamily::Independence, MarginFamily::Weibull, MarginFamily::LogLogistic);
    REQUIRE(LI.dim() == 4);
    REQUIRE_FALSE(LI.has_dependence());
    REQUIRE(LI.names() == std::vector<std::string>{"log(shape_T)", "log(scale_T)", "log(lambda_C)",
                                                   "log(kappa_C)"});

    auto Lt = layout_for(CopulaFamily::Gaussian, MarginFamily::LogStudentT, MarginFamily::LogNormal,
                         DependenceTransform::FisherZTau);
    REQUIRE(Lt.dim() == 6);
    Lt.fixed_nu_t = 6.0;
    REQUIRE(Lt.dim() == 5);
    REQUIRE(Lt.names() == std::vector<std::string>{"mu_T", "log(sigma_T)", "mu_C", "log(sigma_C)",
                                                   "fisherz(tau)"});
    Lt.fixed_nu_t = -1.0;
    REQUIRE_THROWS_AS(Lt.validate(), std::invalid_argument);

    // the signed chart cannot host a positive-only family
    const auto Lbad = layout_for(CopulaFamily::Clayton, MarginFamily::LogNormal,
                                 MarginFamily::LogNormal, DependenceTransform::FisherZTau);
    REQUIRE_THROWS_AS(Lbad.validate(), std::invalid_argument);
}

TEST_CASE("pack and unpack round trip", "[estimation]") {
    const ModelSpec m{CopulaSpec::from_tau(CopulaFamily::Gumbel, 0.65),
                      MarginParams::weibull(1.6, 4.0), MarginParams::logstudentt(7.0, 1.8, 0.6)};
    const auto L = layout_for(CopulaFamily::Gumbel, MarginFamily::Weibull, MarginFamily::LogStudentT);
    const auto v = L.pack(m);
    REQUIRE(v.size() == L.dim());
    const ModelSpec back = L.unpack(v);
    REQUIRE_THAT(back.margin_t.p[0], WithinRel(1.6, 1e-12));
    REQUIRE_THAT(back.margin_c.p[0], WithinRel(7.0, 1e-12));
    REQUIRE_THAT(back.margin_c.p[2], WithinRel(0.6, 1e-12));
    REQUIRE_THAT(back.copula.tau, WithinRel(0.65, 1e-10));

    const auto nat = L.natural_values(back);
    REQUIRE(nat.size() == L.natural_names().size());
    REQUIRE_THAT(nat[1], WithinRel(4.0, 1e-12));      // scale_T
    REQUIRE_THAT(nat.end()[-2], WithinRel(0.65, 1e-10)); // tau
    REQUIRE_THAT(nat.back(), WithinRel(back.copula.theta, 1e-12));

    // pinned tail index: nu drops off the chart but returns in the model
    auto Lf = L;
    Lf.fixed_nu_c = 7.0;
    const auto vf = Lf.pack(m);
    REQUIRE(vf.size() == v.size() - 1);
    REQUIRE_THAT(Lf.unpack(vf).margin_c.p[0], WithinRel(7.0, 1e-15));

    std::vector<double> wrong(3, 0.0);
    REQUIRE_THROWS_AS(L.unpack(wrong), std::invalid_argument);
}

TEST_CASE("log-likelihood single-record anchor", "[estimation]") {
    Dataset d;
    d.add(2.0, 1);
    const ModelSpec m = Scenario::by_id(1).model(CopulaFamily::Frank, 0.5);
    REQUIRE_THAT(log_likelihood(m, d), WithinRel(-2.7473887623726354, 1e-11));
}

TEST_CASE("log-likelihood under independence matches the classical sum", "[estimation]") {
    const ModelSpec m{CopulaSpec::independence(), MarginParams::weibull(1.3, 5.0),
                      MarginParams::lognormal(1.8, 0.6)};
    Dataset d;
    d.add(2.0, 1);
    d.add(7.5, 0);
    d.add(0.9, 1);
    double expect = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        if (d.delta[i] == 1)
            expect += margin_log_pdf(m.margin_t, d.y[i]) + std::log1p(-margin_cdf(m.margin_c, d.y[i]));
        else
            expect += margin_log_pdf(m.margin_c, d.y[i]) + std::log1p(-margin_cdf(m.margin_t, d.y[i]));
    }
    REQUIRE_THAT(log_likelihood(m, d), WithinRel(expect, 1e-12));

    const auto L = layout_for(CopulaFamily::Independence, MarginFamily::Weibull, MarginFamily::LogNormal);
    const ParamVector p{L, L.pack(m)};
    REQUIRE_THAT(log_likelihood(p, d), WithinRel(expect, 1e-10));
}

TEST_CASE("true parameters dominate a displaced alternative", "[estimation]") {
    const auto L = layout_for(CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal);
    const ModelSpec truth = Scenario::by_id(1).model(CopulaFamily::Frank, 0.5);
    const auto x_true = L.pack(truth);
    auto x_off = x_true;
    for (double& c : x_off) c += 0.5;

    int wins = 0;
    for (int rep = 0; rep < 100; ++rep) {
        math::Rng rng(math::derive_seed(7, 0, static_cast<std::uint64_t>(rep)));
        const Dataset d = sample_observed(truth, 500, rng);
        if (log_likelihood(ParamVector{L, x_true}, d) > log_likelihood(ParamVector{L, x_off}, d))
            ++wins;
    }
    REQUIRE(wins >= 95);
}

TEST_CASE("maximum-likelihood fit recovers the generator", "[estimation]") {
    const Dataset d = simulate_scenario(1, CopulaFamily::Frank, 0.5, 800, 31);
    const FitResult fr = fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal);
    REQUIRE(fr.converged);
    REQUIRE(fr.gradient_inf_norm <=
            1e-4 * (1.0 + std::fabs(fr.loglik)) / static_cast<double>(d.n()) * (1 + 1e-9));
    REQUIRE_FALSE(fr.tau_near_boundary);
    REQUIRE_THAT(fr.model.margin_t.p[0], WithinAbs(2.2, 0.2));
    REQUIRE_THAT(fr.model.margin_c.p[0], WithinAbs(2.0, 0.1));
    REQUIRE_THAT(fr.model.copula.tau, WithinAbs(0.5, 0.15));
    REQUIRE(std::isfinite(fr.fitted_prob_uncensored));
    REQUIRE_THAT(fr.fitted_prob_uncensored,
                 WithinAbs(static_cast<double>(d.count_uncensored()) / d.n(), 0.1));
    // reported loglik is the loglik of the reported estimate
    REQUIRE_THAT(fr.loglik, WithinRel(log_likelihood(fr.estimate, d), 1e-12));

    // a warm start at the truth cannot end below its own starting value
    FitOptions warm;
    warm.start = layout_for(CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal)
                     .pack(Scenario::by_id(1).model(CopulaFamily::Frank, 0.5));
    const double ll_start = log_likelihood(ParamVector{fr.estimate.layout, *warm.start}, d);
    const FitResult fw = fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal, warm);
    REQUIRE(fw.loglik >= ll_start - 1e-9);
    REQUIRE_THAT(fw.loglik, WithinAbs(fr.loglik, 1e-4));
}

TEST_CASE("every dependent family nests independence in likelihood", "[estimation]") {
    const Dataset d = simulate_scenario(1, CopulaFamily::Frank, 0.5, 300, 99);
    const FitResult fi =
        fit(d, CopulaFamily::Independence, MarginFamily::LogNormal, MarginFamily::LogNormal);
    REQUIRE(fi.converged);
    for (CopulaFamily f : {CopulaFamily::Frank, CopulaFamily::Clayton, CopulaFamily::Gumbel,
                           CopulaFamily::Gaussian}) {
        const FitResult fr = fit(d, f, MarginFamily::LogNormal, MarginFamily::LogNormal);
        INFO("family " << copula_family_name(f));
        REQUIRE(fr.loglik >= fi.loglik - 1e-6);
    }
}

TEST_CASE("fit is invariant to the dependence chart", "[estimation]") {
    const Dataset d = simulate_scenario(1, CopulaFamily::Frank, 0.5, 600, 77);
    FitOptions o1, o2;
    o1.transform = DependenceTransform::LogitTau;
    o2.transform = DependenceTransform::FisherZTau;
    const FitResult f1 = fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal, o1);
    const FitResult f2 = fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal, o2);
    REQUIRE(f1.converged);
    REQUIRE(f2.converged);
    REQUIRE_THAT(f1.loglik, WithinAbs(f2.loglik, 1e-5));
    REQUIRE_THAT(f1.model.copula.tau, WithinAbs(f2.model.copula.tau, 5e-3));
}

TEST_CASE("a signed chart can sit at zero dependence", "[estimation]") {
    // independent data fitted with a Frank copula on the fisherz chart: tau can
    // settle on either side of zero but must stay near it
    const Dataset d =
        simulate_scenario(1, CopulaFamily::Independence, 0.0, 800, 13);
    FitOptions o;
    o.transform = DependenceTransform::FisherZTau;
    const FitResult fr = fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal, o);
    REQUIRE(fr.converged);
    REQUIRE(std::fabs(fr.model.copula.tau) < 0.1);
    const FitResult fi =
        fit(d, CopulaFamily::Independence, MarginFamily::LogNormal, MarginFamily::LogNormal);
    REQUIRE(fr.loglik >= fi.loglik - 1e-6);
}

TEST_CASE("degenerate censoring patterns are rejected for dependent fits", "[estimation]") {
    Dataset d;
    for (int i = 1; i <= 30; ++i) d.add(0.5 * i, 1); // everyone uncensored
    REQUIRE_THROWS_AS(fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal),
                      std::invalid_argument);
    REQUIRE_THROWS_WITH(fit(d, CopulaFamily::Frank, MarginFamily::LogNormal, MarginFamily::LogNormal),
                        ContainsSubstring("Independence"));
    // the same data still admits an independence fit of the T margin
    const FitResult fr =
        fit(d, CopulaFamily::Independence, MarginFamily::LogNormal, MarginFamily::LogNormal);
    REQUIRE(fr.converged);

    Dataset d0;
    for (int i = 1; i <= 30; ++i) d0.add(0.5 * i, 0);
    REQUIRE_THROWS_AS(fit(d0, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(fit(Dataset{}, CopulaFamily::Independence, MarginFamily::LogNormal,
                          MarginFamily::LogNormal),
                      std::invalid_argument);
}

TEST_CASE("sandwich covariance matches the analytic information", "[estimation][slow]") {
    // Exponential survival and censoring (unit Weibull shape), independent, so
    // the Fisher information has a closed integral form we can compute to high
    // accuracy and invert. Correct specification means sandwich ~= inverse
    // information / n at the truth.
    const ModelSpec truth{CopulaSpec::independence(), MarginParams::weibull(1.0, 1.0),
                          MarginParams::weibull(1.0, 1.0)};
    math::Rng rng(42);
    const std::size_t n = 5000;
    const Dataset d = sample_observed(truth, n, rng);

    FitOptions o;
    o.compute_sandwich = true;
    const FitResult fr = fit(d, CopulaFamily::Independence, MarginFamily::Weibull, MarginFamily::Weibull, o);
    REQUIRE(fr.converged);
    REQUIRE(fr.cov_sandwich.has_value());
    const Eigen::MatrixXd& S = *fr.cov_sandwich;
    REQUIRE(S.rows() == 4);

    // symmetry and positive variances
    for (int i = 0; i < 4; ++i) {
        REQUIRE(S(i, i) > 0.0);
        for (int j = 0; j < 4; ++j) REQUIRE_THAT(S(i, j), WithinAbs(S(j, i), 1e-14));
    }

    // score of one record at the truth, chart order
    // (log shape_T, log scale_T, log shape_C, log scale_C)
    auto score = [](double y, int del) {
        const double ly = std::log(y);
        const std::array<double, 2> own{1.0 + ly * (1.0 - y), y - 1.0}; // density block
        const std::array<double, 2> other{-y * ly, y};                  // survival block
        return del == 1 ? std::array<double, 4>{own[0], own[1], other[0], other[1]}
                        : std::array<double, 4>{other[0], other[1], own[0], own[1]};
    };
    // Y = min(T,C) ~ Exp(2), delta independent of Y with probability 1/2 each;
    // I_jk = E[s_j s_k] integrates both censoring states against e^{-2y}
    Eigen::MatrixXd I(4, 4);
    for (int j = 0; j < 4; ++j)
        for (int k = j; k < 4; ++k) {
            const auto r = math::integrate(
                [&](double y) {
                    const auto s1 = score(y, 1), s0 = score(y, 0);
                    return (s1[j] * s1[k] + s0[j] * s0[k]) * std::exp(-2.0 * y);
                },
                1e-12, 40.0, 1e-10, 1e-10, 4000);
            REQUIRE(r.converged);
            I(j, k) = I(k, j) = r.value;
        }
    const Eigen::MatrixXd C_true = I.inverse() / static_cast<double>(n);
    for (int i = 0; i < 4; ++i) {
        const double ratio = std::sqrt(S(i, i)) / std::sqrt(C_true(i, i));
        INFO("coordinate " << i << " se ratio " << ratio);
        REQUIRE(ratio > 0.90);
        REQUIRE(ratio < 1.10);
    }

    // correctly specified model: sandwich also agrees with the inverse Hessian
    auto avg_negll = [&](const std::vector<double>& x) {
        ParamVector p{fr.estimate.layout, x};
        return -log_likelihood(p, d) / static_cast<double>(n);
    };
    const auto H = math::numeric_hessian(avg_negll, fr.estimate.values);
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) A(i, j) = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    const Eigen::MatrixXd C_model = A.inverse() / static_cast<double>(n);
    for (int i = 0; i < 4; ++i) {
        const double ratio = std::sqrt(S(i, i)) / std::sqrt(C_model(i, i));
        REQUIRE(ratio > 0.75);
        REQUIRE(ratio < 1.25);
    }
}

TEST_CASE("sandwich covariance rejects singular curvature", "[estimation]") {
    // One record at y = 1 with both location parameters at log-time 0 leaves
    // the T-margin scale direction exactly flat, so the Hessian is singular.
    Dataset d;
    d.add(1.0, 1);
    const auto L =
        layout_for(CopulaFamily::Independence, MarginFamily::LogNormal, MarginFamily::LogNormal);
    const ParamVector p{L, {0.0, 0.0, 0.0, 0.0}};
    REQUIRE_THROWS_AS(sandwich_covariance(p, d), numeric_error);
    REQUIRE_THROWS_WITH(sandwich_covariance(p, d), ContainsSubstring("condition"));
}

TEST_CASE("bootstrap standard errors", "[estimation][slow]") {
    const Dataset d = simulate_scenario(1, CopulaFamily::Gumbel, 0.5, 250, 314);
    FitOptions o;
    const FitResult fr = fit(d, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal, o);
    REQUIRE(fr.converged);
    o.start = fr.estimate.values; // replicates warm-start at the parent estimate

    const BootstrapResult b1 =
        bootstrap(d, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal, 8, 5, o);
    REQUIRE(b1.requested == 8);
    REQUIRE(b1.used + b1.dropped == 8);
    REQUIRE(b1.se.size() == 5);
    REQUIRE(b1.names == fr.estimate.layout.names());
    REQUIRE(b1.natural_names == fr.estimate.layout.natural_names());
    REQUIRE(b1.se_natural.size() == 6);
    for (double s : b1.se) {
        REQUIRE(std::isfinite(s));
        REQUIRE(s >= 0.0);
    }
    REQUIRE(b1.cov.rows() == 5);
    REQUIRE_THAT(b1.cov(2, 1), WithinAbs(b1.cov(1, 2), 1e-15));

    // same seed, same answer; different seed, different answer
    const BootstrapResult b2 =
        bootstrap(d, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal, 8, 5, o);
    REQUIRE(b1.se == b2.se);
    const BootstrapResult b3 =
        bootstrap(d, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal, 8, 6, o);
    REQUIRE(b1.se != b3.se);

    // replicate scheduling is by index: thread count cannot change the numbers
    const BootstrapResult b4 =
        bootstrap(d, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal, 8, 5, o, 3);
    REQUIRE(b1.se == b4.se);

    REQUIRE_THROWS_AS(
        bootstrap(d, CopulaFamily::Gumbel, MarginFamily::LogNormal, MarginFamily::LogNormal, 1, 5, o),
        std::invalid_argument);

    // if most replicates fail, the run reports an error rather than quiet junk
    FitOptions crippled = o;
    crippled.start.reset();
    crippled.max_simplex_iterations = 1;
    crippled.max_polish_iterations = 0;
    crippled.restarts = 0;
    REQUIRE_THROWS_AS(bootstrap(d, CopulaFamily::Gumbel, MarginFamily::LogNormal,
                                MarginFamily::LogNormal, 6, 5, crippled),
                      numeric_error);
}
