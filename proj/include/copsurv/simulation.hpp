#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "copsurv/estimation.hpp"
#include "copsurv/math/parallel.hpp"
#include "copsurv/math/rng.hpp"
#include "copsurv/survival_model.hpp"

namespace copsurv {

// ---------------------------------------------------------------------------
// Sampling from the model
// ---------------------------------------------------------------------------

/// One latent pair (t, c): conditional-inversion draw from the copula, pushed
/// through the margin quantiles.
inline std::pair<double, double> sample_pair(const ModelSpec& m, math::Rng& rng) {
    const auto [u, v] = detail::sample_uv(m.copula, rng);
    return {margin_quantile(m.margin_t, u), margin_quantile(m.margin_c, v)};
}

/// n observed records: y = min(t, c), delta = 1{t <= c}.
inline Dataset sample_observed(const ModelSpec& m, std::size_t n, math::Rng& rng) {
    Dataset d;
    d.y.reserve(n);
    d.delta.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [t, c] = sample_pair(m, rng);
        d.add(std::fmin(t, c), t <= c ? 1 : 0);
    }
    return d;
}

inline std::vector<SubdensityPoint> theoretical_density_grid(const ModelSpec& m,
                                                             const std::vector<double>& y_grid) {
    std::vector<SubdensityPoint> out;
    out.reserve(y_grid.size());
    for (double y : y_grid) {
        SubdensityPoint p;
        p.y = y;
        p.f_y_delta1 = subdensity_uncensored(m, y);
        p.f_y_delta0 = subdensity_censored(m, y);
        p.f_y = p.f_y_delta1 + p.f_y_delta0;
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation-study harness
// ---------------------------------------------------------------------------

/// The two benchmark parameter sets (log-normal margins for both T and C).
/// Scenario 2's heavier censoring-scale spread produces the lower uncensoring
/// probabilities.
struct Scenario {
    int id;
    double mu_t, sigma_t, mu_c, sigma_c;
    static constexpr std::array<double, 3> tau_grid{0.2, 0.5, 0.8};

    static Scenario by_id(int id) {
        if (id == 1) return {1, 2.2, 1.0, 2.0, 0.25};
        if (id == 2) return {2, 2.5, 1.0, 2.0, 0.50};
        throw std::invalid_argument("Scenario: id must be 1 or 2");
    }
    MarginParams margin_t() const { return MarginParams::lognormal(mu_t, sigma_t); }
    MarginParams margin_c() const { return MarginParams::lognormal(mu_c, sigma_c); }
    ModelSpec model(CopulaFamily family, double tau) const {
        return {CopulaSpec::from_tau(family, tau), margin_t(), margin_c()};
    }
};

struct StudyCell {
    Scenario scenario;
    CopulaFamily family;
    double tau;
    std::size_t n;
    int reps;
    std::uint64_t seed;
    DependenceTransform transform = DependenceTransform::LogitTau;
};

/// Stable identifier of a cell's configuration, mixed into every replicate
/// seed so each cell is reproducible in isolation from any study subset.
inline std::uint64_t cell_key(const StudyCell& c) {
    std::uint64_t k = math::derive_seed(0x636f707375726bULL, static_cast<std::uint64_t>(c.scenario.id),
                                        static_cast<std::uint64_t>(c.family));
    k = math::derive_seed(k, static_cast<std::uint64_t>(std::llround(c.tau * 1e9)),
                          static_cast<std::uint64_t>(c.n));
    return k;
}

/// Per-coordinate summary of the replicate estimates on the unconstrained
/// chart, plus one extra column for tau itself. sd_of_average_estimate is the
/// SD of the mean (SD/sqrt(reps)); empty when fewer than two replicates
/// converged, since it is then undefined.
struct CellSummary {
    StudyCell cell;
    std::vector<std::string> names; // chart coordinates, then "tau"
    std::vector<double> truth;
    std::vector<double> average_estimate;
    std::vector<double> sd_of_average_estimate;
    std::vector<double> average_bias;
    std::vector<double> rmse;
    int reps_used = 0;
    int dropped = 0;
    bool warning_high_drop_rate = false; // more than 20% of replicates dropped
};

/// Generate `reps` datasets from the cell's true model, refit each with the
/// matching family/margins, and summarize. Replicates may run on several
/// threads; seeds are by replicate index, so the summary is thread-count
/// invariant.
inline CellSummary run_cell(const StudyCell& cell, int threads = 1) {
    if (cell.reps < 1) throw std::invalid_argument("run_cell: reps must be >= 1");
    const ModelSpec truth = cell.scenario.model(cell.family, cell.tau);

    ParamLayout L;
    L.copula = cell.family;
    L.margin_t = MarginFamily::LogNormal;
    L.margin_c = MarginFamily::LogNormal;
    L.transform = cell.transform;

    CellSummary s;
    s.cell = cell;
    s.names = L.names();
    s.names.push_back("tau");
    s.truth = L.pack(truth);
    s.truth.push_back(truth.copula.tau);

    const std::uint64_t key = cell_key(cell);
    const std::size_t dim = s.truth.size();

    struct Rep {
        bool ok = false;
        std::vector<double> est;
    };
    std::vector<Rep> reps(static_cast<std::size_t>(cell.reps));
    math::parallel_for(reps.size(), threads, [&](std::size_t r) {
        math::Rng data_rng(math::derive_seed(cell.seed, key, 2 * r));
        const Dataset d = sample_observed(truth, cell.n, data_rng);
        FitOptions opts;
        opts.transform = cell.transform;
        opts.restart_seed = math::derive_seed(cell.seed, key, 2 * r + 1);
        try {
            const FitResult fr = fit(d, cell.family, MarginFamily::LogNormal,
                                     MarginFamily::LogNormal, opts);
            if (fr.converged) {
                reps[r].ok = true;
                reps[r].est = fr.estimate.values;
                reps[r].est.push_back(fr.model.copula.tau);
            }
        } catch (const std::exception&) {
            // dropped replicate
        }
    });

    std::vector<const Rep*> kept;
    for (const auto& r : reps)
        if (r.ok) kept.push_back(&r);
    s.reps_used = static_cast<int>(kept.size());
    s.dropped = cell.reps - s.reps_used;
    s.warning_high_drop_rate = s.dropped > cell.reps / 5.0;
    if (kept.empty()) return s;

    const double m = static_cast<double>(kept.size());
    s.average_estimate.assign(dim, 0.0);
    s.average_bias.assign(dim, 0.0);
    s.rmse.assign(dim, 0.0);
    for (const Rep* r : kept)
        for (std::size_t j = 0; j < dim; ++j) s.average_estimate[j] += r->est[j];
    for (std::size_t j = 0; j < dim; ++j) s.average_estimate[j] /= m;
    for (std::size_t j = 0; j < dim; ++j) {
        double sq = 0.0, var = 0.0;
        for (const Rep* r : kept) {
            const double err = r->est[j] - s.truth[j];
            sq += err * err;
            const double dev = r->est[j] - s.average_estimate[j];
            var += dev * dev;
        }
        s.average_bias[j] = s.average_estimate[j] - s.truth[j];
        s.rmse[j] = std::sqrt(sq / m);
        if (kept.size() >= 2 && j == 0 && s.sd_of_average_estimate.empty())
            s.sd_of_average_estimate.assign(dim, 0.0);
        if (kept.size() >= 2)
            s.sd_of_average_estimate[j] = std::sqrt(var / (m - 1.0)) / std::sqrt(m);
    }
    return s;
}

} // namespace copsurv
