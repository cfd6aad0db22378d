// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed; do not loosen them here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rfr/hedging.hpp"
#include "rfr/monte_carlo.hpp"
#include "rfr/pricing.hpp"
#include "rfr/riccati.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace rfr;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double z_score(const Estimate& e, double want) {
    if (e.std_error == 0.0) return e.value == want ? 0.0 : INFINITY;
    return std::abs(e.value - want) / e.std_error;
}

std::vector<double> column(const PathSet& paths, std::size_t node, bool rate) {
    std::vector<double> out(paths.n_paths());
    for (std::size_t p = 0; p < paths.n_paths(); ++p) out[p] = rate ? paths.rho(p, node) : paths.R(p, node);
    return out;
}

// Single factor with roll-over atoms and jumps, one of them on an atom,
// over a horizon that ends at the last maturity of interest.
scenario::Case mc_case() {
    auto c = scenario::base();
    c.schedule = Schedule({0.5, 1.0, 1.5}, {0.75, 1.0}, 2.0);
    return c;
}

// 1. Analytic bond price against the Riccati transform at (u, v) = (0, -1).
Outcome bond_vs_riccati() {
    std::mt19937_64 rng(20240601);
    std::vector<scenario::Case> cases{scenario::base()};
    while (cases.size() < 10) {
        auto c = scenario::random_case(rng);
        if (!c.schedule.roll_over().empty() && !c.params.jumps.empty()) cases.push_back(c);
    }
    double worst = 0.0;
    int combos = 0;
    for (const auto& c : cases) {
        const auto spec = build_gaussian_hw_spec({c.params}, c.schedule);
        for (double T : {0.5 * c.T, c.T}) {
            const std::vector<Complex> u{0.0};
            const std::vector<double> x{c.params.rho0};
            const double riccati = transform(spec, 0.0, T, u, -1.0, x, 0.0, 1e-3).real();
            const double analytic = bond_price(0.0, T, c.params.rho0, c.params, c.schedule);
            worst = std::max(worst, std::abs(riccati / analytic - 1.0));
            ++combos;
        }
    }
    return {worst <= 1e-6, fmt("%d combinations, max rel dev %.3g (tol 1e-6)", combos, worst)};
}

// 2. Analytic P(0, T) against E[1 / S0_T] over 1e6 exact-scheme paths.
Outcome bond_vs_mc() {
    const auto c = mc_case();
    const auto paths = simulate(c.params, c.schedule, date_grid(c.schedule, {}), 1'000'000, 2, {});
    const auto est = mc_price(paths, [](const PathView&) { return 1.0; }, c.T, Discount::numeraire);
    const double want = bond_price(0.0, c.T, c.params.rho0, c.params, c.schedule);
    const double z = z_score(est, want);
    return {z <= 3.0, fmt("P=%.10f MC=%.10f se=%.2g z=%.2f (tol 3)", want, est.value, est.std_error, z)};
}

// 3. Caplet formula against the MC payoff for three strikes, and the
// deterministic configuration against discounted intrinsic value.
Outcome caplet_vs_mc() {
    const auto c = mc_case();
    const double S = 1.2;
    const double T = 2.0;
    const auto paths = simulate(c.params, c.schedule, date_grid(c.schedule, {S}), 1'000'000, 3, {});
    // P(S, T, x) = exp(-x b - xi) with deterministic b, xi
    const double b = kernel_Bprime(S, T, c.params.beta, c.schedule);
    const double xi_ST = xi(S, T, c.params, c.schedule);
    const double fwd = forward_term_rate(0.0, S, T, c.params.rho0, c.params, c.schedule);
    bool ok = true;
    std::string detail;
    for (auto [label, K] : {std::pair{"atm", fwd}, {"itm", fwd - 0.01}, {"otm", fwd + 0.01}}) {
        const CapletSpec spec{S, T, K};
        const double analytic = caplet_price(c.params.rho0, 0.0, spec, c.params, c.schedule);
        const auto est = mc_price(
            paths,
            [&](const PathView& v) {
                const double f = (std::exp(v.rho(S) * b + xi_ST) - 1.0) / (T - S);
                return (T - S) * std::max(f - K, 0.0);
            },
            T, Discount::numeraire);
        const double z = z_score(est, analytic);
        ok = ok && z <= 3.0;
        detail += fmt("%s z=%.2f; ", label, z);
    }
    auto det = c;
    det.params.sigma = 0.0;
    for (auto& j : det.params.jumps) j.std = 0.0;
    double worst = 0.0;
    for (double K : {0.001, fwd, 0.05}) {
        const CapletSpec spec{S, T, K};
        const double g = caplet_price(det.params.rho0, 0.0, spec, det.params, det.schedule);
        const double intrinsic =
            std::max(bond_price(0.0, S, det.params.rho0, det.params, det.schedule) -
                         spec.strike_factor() * bond_price(0.0, T, det.params.rho0, det.params, det.schedule),
                     0.0);
        worst = std::max(worst, std::abs(g - intrinsic));
    }
    ok = ok && worst <= 1e-12;
    return {ok, detail + fmt("deterministic max dev %.2g (tol 1e-12)", worst)};
}

// 4. Closed-form Var(R_T) against eta x eta quadrature on random schedules.
Outcome variance_reconciliation() {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const auto c = scenario::random_case(rng);
        const double closed = R_moments(0.0, c.T, 0.0, 0.0, c.params, c.schedule).variance;
        const double brute = oracle::var_R(0.0, c.T, c.params, c.schedule);
        const double dev = brute == 0.0 ? std::abs(closed) : std::abs(closed / brute - 1.0);
        worst = std::max(worst, dev);
    }
    return {worst <= 1e-8, fmt("50 schedules, max rel dev %.3g (tol 1e-8)", worst)};
}

// 5. P(t, T) / S0_t has constant mean across 10 grid times.
Outcome discounted_bond_martingale() {
    const auto c = mc_case();
    const std::vector<double> times{0.0, 0.2, 0.5, 0.75, 0.9, 1.0, 1.25, 1.5, 1.75, 2.0};
    const auto paths = simulate(c.params, c.schedule, date_grid(c.schedule, times), 100'000, 5, {});
    const double want = bond_price(0.0, c.T, c.params.rho0, c.params, c.schedule);
    double worst = 0.0;
    for (double t : times) {
        const double e = std::exp(-xi(t, c.T, c.params, c.schedule));
        const double b = kernel_Bprime(t, c.T, c.params.beta, c.schedule);
        const auto est = mc_price(
            paths, [&](const PathView& v) { return e * std::exp(-b * v.rho(t)); }, t, Discount::numeraire);
        worst = std::max(worst, t == 0.0 ? 0.0 : z_score(est, want));
    }
    return {worst <= 3.0, fmt("10 times, max z=%.2f (tol 3)", worst)};
}

// 6. S-forward mean and variance of rho_S against weighted MC.
Outcome forward_measure() {
    const auto c = mc_case();
    const double S = 1.2;
    const auto paths = simulate(c.params, c.schedule, date_grid(c.schedule, {S}), 100'000, 6, {});
    const ForwardMeasureWeight w{S, bond_price(0.0, S, c.params.rho0, c.params, c.schedule)};
    const auto f = forward_measure_params(0.0, S, c.params, c.schedule);
    const double m = c.params.rho0 * std::exp(c.params.beta * S) + f.Gamma1;
    const auto mean = weighted_expectation(paths, [&](const PathView& v) { return v.rho(S); }, w);
    const auto var = weighted_expectation(
        paths, [&](const PathView& v) { return (v.rho(S) - m) * (v.rho(S) - m); }, w);
    const double z1 = z_score(mean.value, m);
    const double z2 = z_score(var.value, f.Gamma2);
    return {z1 <= 3.0 && z2 <= 3.0, fmt("mean z=%.2f, variance z=%.2f (tol 3)", z1, z2)};
}

// 7. Caplet delta against central differences on a 10 x 10 (rho, t) grid.
Outcome delta_identity() {
    const auto c = scenario::base();
    const CapletSpec spec{1.2, 1.7, 0.012};
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const double t = spec.S * i / 10.0;
        const CapletFormula g(t, spec, c.params, c.schedule);
        const double h = 1e-5 * std::sqrt(g.forward_params().Gamma2);
        for (int k = 0; k < 10; ++k) {
            const double x = -0.02 + 0.008 * k;
            const double fd = (g.value(x + h) - g.value(x - h)) / (2.0 * h);
            worst = std::max(worst, std::abs(g.delta(x) / fd - 1.0));
        }
    }
    return {worst <= 1e-5, fmt("100 points, max rel dev %.3g (tol 1e-5)", worst)};
}

// 8. Orthogonality of the hedging cost at each jump date, and the jump
// hedge ratio against a regression on simulated jumps.
Outcome hedge_diagnostics() {
    auto c = scenario::no_atoms();
    c.schedule = Schedule({}, {0.75, 1.0}, 1.7);
    const CapletSpec caplet{1.2, 1.7, 0.012};
    const FuturesSpec futures{1.2, 1.7, TimeFunction::constant(0.001)};
    const auto paths = simulate(c.params, c.schedule, uniform_grid(1.7, 34, c.schedule), 100'000, 8, {});
    const auto report = run_hedge(paths, caplet, futures, c.params, c.schedule);
    bool ok = report.jumps.size() == 2;
    std::string detail;
    for (const auto& j : report.jumps) {
        const double z1 = z_score(j.mean_dL, 0.0);
        const double z2 = z_score(j.cov_dL_dM, 0.0);
        ok = ok && z1 <= 3.0 && z2 <= 3.0;
        detail += fmt("s=%.2f E[dL] z=%.2f Cov z=%.2f; ", j.date, z1, z2);
    }
    double worst = 0.0;
    for (double s : {0.75, 1.0}) {
        const auto pre = column(paths, paths.node_left(s), true);
        const Estimate m = sample_mean(pre);
        const double sd = std::sqrt(sample_covariance(pre, pre).value);
        for (double y : {m.value - sd, m.value, m.value + sd}) {
            const auto r = jump_regression_check(y, s, caplet, futures, c.params, c.schedule, 100'000, 81);
            worst = std::max(worst, std::abs(r.slope - r.zeta_jump) / r.slope_se);
        }
    }
    ok = ok && worst <= 3.0;
    return {ok, detail + fmt("regression slope max z=%.2f (tol 3)", worst)};
}

// 9. Two-factor spike scenario: half-lives and deterministic CSV.
Outcome spike_scenario() {
    const auto s = example_4_4();
    const double fast50 = jump_half_life(s.factors[1], 50.0);
    const double fast100 = jump_half_life(s.factors[1], 100.0);
    const double slow150 = jump_half_life(s.factors[0], 150.0);
    const double e1 = std::max(std::abs(fast50 / (std::numbers::ln2 / 80.0) - 1.0),
                               std::abs(fast100 / (std::numbers::ln2 / 80.0) - 1.0));
    const double e2 = std::abs(slow150 / (std::numbers::ln2 / 0.2) - 1.0);
    // mean paths: the spike of 0.1 at 50 is gone by 60, while five time
    // units after 150 the level shift still holds 0.1 e^{-1}
    const auto& fast = s.factors[1];
    const double spike = rho_mean(0.0, 50.0, 0.0, fast) - rho_mean(0.0, left_of(50.0), 0.0, fast);
    const double after = rho_mean(0.0, 60.0, 0.0, fast);
    auto slow = s.factors[0];
    const double with_jump = rho_mean(left_of(150.0), 155.0, 0.05, slow);
    slow.jumps.clear();
    const double level = with_jump - rho_mean(left_of(150.0), 155.0, 0.05, slow);
    std::ostringstream a;
    std::ostringstream b;
    write_paths_csv(a, example_4_4_paths(7, 1, 4000, 1));
    write_paths_csv(b, example_4_4_paths(7, 1, 4000, 1));
    const bool same = a.str() == b.str() && !a.str().empty();
    const bool ok = e1 <= 1e-10 && e2 <= 1e-10 && std::abs(spike - 0.1) < 1e-12 && after < 1e-12 &&
                    std::abs(level - 0.1 * std::exp(-1.0)) < 1e-12 && same;
    return {ok, fmt("half-life rel err fast %.2g slow %.2g (tol 1e-10), spike %.3f, CSV %s", e1, e2, spike,
                    same ? "identical" : "DIFFERS")};
}

// 10. Backward-looking rate from fixings and from the roll-over numeraire.
Outcome backward_rate_identity() {
    const auto c = mc_case();
    const std::vector<double> roll{0.0, 0.5, 1.0, 1.5, 2.0};
    const auto paths = simulate(c.params, c.schedule, date_grid(c.schedule, {}), 10'000, 10, {});
    double worst = 0.0;
    double worst_rel = 0.0;
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        const auto v = paths.path(p);
        RollFixings fx{roll, {}};
        for (std::size_t n = 0; n + 1 < roll.size(); ++n) {
            fx.fixings.push_back(bond_price(roll[n], roll[n + 1], v.rho(roll[n]), c.params, c.schedule));
        }
        for (auto [S, T] : {std::pair{0.5, 2.0}, {0.0, 1.0}, {1.0, 1.5}}) {
            const double product = backward_rate_from_fixings(S, T, fx);
            const double numeraire =
                backward_rate_from_numeraire(S, T, rollover_numeraire(fx, S), rollover_numeraire(fx, T));
            // the same numeraire written as exp of the atom sum of log(1 / P)
            double log_growth = 0.0;
            for (std::size_t n : fx.completed_periods(S, T)) log_growth -= std::log(fx.fixings[n]);
            const double atoms = std::expm1(log_growth) / (T - S);
            const double dev = std::max(std::abs(product - numeraire), std::abs(product - atoms));
            worst = std::max(worst, dev);
            // relative figures blow up for rates near zero; reported only
            worst_rel = std::max(worst_rel, dev / std::abs(product));
        }
    }
    return {worst <= 1e-12,
            fmt("10000 paths x 3 periods, max abs dev %.3g (tol 1e-12), max rel dev %.3g", worst, worst_rel)};
}

// 11. Kolmogorov-Smirnov test of simulated rho_T and R_T at the 1% level.
Outcome distributional_exactness() {
    const auto c = mc_case();
    const std::size_t n = 100'000;
    const auto paths = simulate(c.params, c.schedule, date_grid(c.schedule, {}), n, 11, {});
    const auto law = joint_gaussian_law(0.0, c.T, c.params.rho0, 0.0, c.params, c.schedule);
    const std::size_t node = paths.node(c.T);
    const double d1 = oracle::ks_statistic(column(paths, node, true), law.mean[0], std::sqrt(law.cov[0][0]));
    const double d2 = oracle::ks_statistic(column(paths, node, false), law.mean[1], std::sqrt(law.cov[1][1]));
    const double crit = 1.628 / std::sqrt(static_cast<double>(n));
    return {d1 < crit && d2 < crit, fmt("D(rho)=%.4g D(R)=%.4g (crit %.4g)", d1, d2, crit)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria{
        {"1 bond analytic vs Riccati", bond_vs_riccati, 10.0},
        {"2 bond analytic vs MC", bond_vs_mc, 60.0},
        {"3 caplet formula vs MC", caplet_vs_mc, 0.0},
        {"4 variance reconciliation", variance_reconciliation, 0.0},
        {"5 discounted bond martingale", discounted_bond_martingale, 0.0},
        {"6 forward-measure law", forward_measure, 0.0},
        {"7 delta identity", delta_identity, 0.0},
        {"8 hedge optimality diagnostics", hedge_diagnostics, 0.0},
        {"9 spike scenario", spike_scenario, 0.0},
        {"10 backward-rate identity", backward_rate_identity, 0.0},
        {"11 distributional exactness", distributional_exactness, 0.0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0.0 && secs > c.budget_seconds) {
            o.pass = false;
            o.detail += fmt(" [over budget %.0f s]", c.budget_seconds);
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s  %-32s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
