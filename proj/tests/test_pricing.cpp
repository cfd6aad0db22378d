#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "rfr/pricing.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using Catch::Approx;
using namespace rfr;

TEST_CASE("bond prices against the Gaussian oracle") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 10; ++k) {
        const auto c = scenario::random_case(rng);
        for (double t : {0.0, 0.5 * c.T}) {
            const double x = c.params.rho0 + 0.003;
            CHECK(bond_price(t, c.T, x, c.params, c.schedule) ==
                  Approx(oracle::bond(t, c.T, x, c.params, c.schedule)).epsilon(1e-10));
        }
        CHECK(bond_price(c.T, c.T, 0.05, c.params, c.schedule) == 1.0);
    }
}

TEST_CASE("bond price multiplies across factors") {
    const auto c = scenario::base();
    HullWhiteParams second;
    second.beta = -1.5;
    second.sigma = 0.004;
    second.alpha = TimeFunction::constant(0.001);
    const std::vector<HullWhiteParams> factors{c.params, second};
    const std::vector<double> states{0.02, -0.001};
    const double joint = bond_price(0.0, 2.0, states, factors, c.schedule);
    const double split =
        bond_price(0.0, 2.0, 0.02, c.params, c.schedule) * bond_price(0.0, 2.0, -0.001, second, c.schedule);
    CHECK(joint == Approx(split).epsilon(1e-14));
}

TEST_CASE("forward-measure law of rho_S") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 10; ++k) {
        const auto c = scenario::random_case(rng);
        const double S = 0.6 * c.T;
        const double t = 0.2 * c.T;
        const auto f = forward_measure_params(t, S, c.params, c.schedule);
        // Q^S mean is the Q mean shifted by Cov(rho_S, R_S - R_t)
        const double want1 = oracle::mean_rho(t, S, 0.0, c.params) - oracle::cov_rho_R(t, S, c.params, c.schedule);
        CHECK(f.Gamma1 == Approx(want1).epsilon(1e-10).margin(1e-15));
        CHECK(f.Gamma2 == Approx(oracle::cov_rho(t, S, S, c.params)).epsilon(1e-12).margin(1e-300));
    }
}

TEST_CASE("caplet formula against payoff quadrature") {
    const auto c = scenario::base();
    for (double t : {0.0, 0.4, left_of(0.75)}) {
        const double x = 0.015;
        const double fwd = forward_term_rate(t, 1.2, 1.7, x, c.params, c.schedule);
        for (double K : {fwd, fwd - 0.01, fwd + 0.01}) {
            const CapletSpec spec{1.2, 1.7, K};
            const double got = caplet_price(x, t, spec, c.params, c.schedule);
            CHECK(got == Approx(oracle::caplet(t, 1.2, 1.7, K, x, c.params, c.schedule)).epsilon(1e-8));
            // no-arbitrage bounds
            const double intrinsic = bond_price(t, 1.2, x, c.params, c.schedule) -
                                     spec.strike_factor() * bond_price(t, 1.7, x, c.params, c.schedule);
            CHECK(got >= std::max(intrinsic, 0.0) - 1e-15);
            CHECK(got <= bond_price(t, 1.2, x, c.params, c.schedule));
        }
    }
}

TEST_CASE("caplet without volatility is the discounted intrinsic value") {
    auto c = scenario::base();
    c.params.sigma = 0.0;
    for (auto& j : c.params.jumps) j.std = 0.0;
    for (double K : {0.001, 0.01, 0.05}) {
        const CapletSpec spec{1.2, 1.7, K};
        const CapletFormula g(0.1, spec, c.params, c.schedule);
        REQUIRE(g.degenerate());
        const double ps = bond_price(0.1, 1.2, 0.02, c.params, c.schedule);
        const double pt = bond_price(0.1, 1.7, 0.02, c.params, c.schedule);
        CHECK(g.value(0.02) == Approx(std::max(ps - spec.strike_factor() * pt, 0.0)).margin(1e-15));
    }
}

TEST_CASE("caplet delta against central differences") {
    const auto c = scenario::base();
    const CapletSpec spec{1.2, 1.7, 0.012};
    for (double t : {0.0, 0.6, 1.1}) {
        const CapletFormula g(t, spec, c.params, c.schedule);
        // step scaled to the forward-measure spread of rho_S
        const double h = 1e-5 * std::sqrt(g.forward_params().Gamma2);
        for (double x : {-0.02, 0.0, 0.02, 0.05}) {
            const double fd = (g.value(x + h) - g.value(x - h)) / (2.0 * h);
            CHECK(g.delta(x) == Approx(fd).epsilon(1e-7));
        }
    }
    CHECK_THROWS_AS(CapletFormula(1.3, spec, c.params, c.schedule), DomainError);
    CHECK_THROWS_AS(CapletSpec({1.0, 1.0, 0.01}).validate(), DomainError);
    CHECK_THROWS_AS(CapletSpec({1.0, 2.0, -0.01}).validate(), DomainError);
}

TEST_CASE("futures rate under the minimal measure") {
    const auto c = scenario::no_atoms();
    const double S = 1.2;
    const double T = 1.7;
    // h = 0: expected Lebesgue-accrued rate over (S, T]
    for (double t : {0.0, 0.75, 1.0}) {
        const double x = 0.017;
        const double want =
            (R_moments(t, T, x, 0.0, c.params, c.schedule).mean - R_moments(t, S, x, 0.0, c.params, c.schedule).mean) /
            (T - S);
        CHECK(futures_rate(t, S, T, x, c.params, c.schedule, TimeFunction::constant(0.0)) ==
              Approx(want).epsilon(1e-12));
    }
    // h != 0 shifts the drift by -h / B(t, S, T)
    const auto h = TimeFunction::constant(0.3);
    const auto hat = minimal_measure_params(c.params, h, S, T);
    const double want = (R_moments(0.0, T, 0.017, 0.0, hat, c.schedule).mean -
                         R_moments(0.0, S, 0.017, 0.0, hat, c.schedule).mean) /
                        (T - S);
    CHECK(futures_rate(0.0, S, T, 0.017, c.params, c.schedule, h) == Approx(want).epsilon(1e-9));
    CHECK(hat.alpha(0.5) == Approx(c.params.alpha(0.5) - 0.3 / futures_kernel(0.5, S, T, c.params.beta)));
    // the drift stays defined past S, where B(t, S, T) is still positive
    CHECK(futures_kernel(1.5, S, T, c.params.beta) > 0.0);
    CHECK(std::isfinite(hat.alpha(1.5)));
    const auto atoms = scenario::base();
    CHECK_THROWS_AS(futures_rate(0.0, S, T, 0.0, atoms.params, atoms.schedule, h), UnsupportedError);
}

TEST_CASE("drift fitted to a discount curve reprices the pillars") {
    auto c = scenario::base();
    const DiscountCurve curve{{{0.0, 1.0}, {0.5, 0.99}, {1.0, 0.978}, {2.0, 0.95}, {3.0, 0.925}}};
    c.params.alpha = fit_drift_to_curve(curve, c.params, c.schedule);
    for (const auto& [T, df] : curve.pillars) {
        CHECK(bond_price(0.0, T, c.params.rho0, c.params, c.schedule) == Approx(df).epsilon(1e-10));
    }
    CHECK_THROWS_AS(fit_drift_to_curve(DiscountCurve{{{1.0, 0.99}, {0.5, 0.995}}}, c.params, c.schedule),
                    DomainError);
    CHECK_THROWS_AS(fit_drift_to_curve(DiscountCurve{{{1.0, -0.5}}}, c.params, c.schedule), DomainError);
}

TEST_CASE("backward-looking rate from fixings and from the numeraire") {
    const RollFixings roll{{0.0, 0.25, 0.5, 0.75, 1.0}, {0.995, 0.994, 0.9955, 0.993}};
    const double from_fixings = backward_rate_from_fixings(0.25, 1.0, roll);
    const double from_numeraire =
        backward_rate_from_numeraire(0.25, 1.0, rollover_numeraire(roll, 0.25), rollover_numeraire(roll, 1.0));
    CHECK(from_fixings == Approx(from_numeraire).epsilon(1e-12));
    CHECK(from_fixings == Approx((1.0 / (0.994 * 0.9955 * 0.993) - 1.0) / 0.75).epsilon(1e-14));
    CHECK(rollover_numeraire(roll, 0.6) == Approx(1.0 / (0.995 * 0.994)).epsilon(1e-15));

    // value at t of one unit invested at S and rolled over
    CHECK(bond_price_extended(0.25, 0.25, roll, 0.9) == 1.0);
    CHECK(bond_price_extended(0.6, 0.25, roll, 0.998) == Approx(0.998 / (0.994 * 0.9955)).epsilon(1e-15));
    CHECK_THROWS_AS(bond_price_extended(0.1, 0.25, roll, 0.9), DomainError);
    const RollFixings partial{{0.0, 0.25, 0.5}, {0.995}};
    CHECK_THROWS_AS(backward_rate_from_fixings(0.0, 0.5, partial), DataError);
    CHECK_THROWS_AS(backward_rate_from_numeraire(0.5, 0.5, 1.0, 1.0), DomainError);
}

TEST_CASE("forward term rate before and after the accrual start") {
    const auto c = scenario::base();
    const double x = 0.02;
    const double f = forward_term_rate(0.0, 1.0, 1.5, x, c.params, c.schedule);
    CHECK(f == Approx((bond_price(0.0, 1.0, x, c.params, c.schedule) / bond_price(0.0, 1.5, x, c.params, c.schedule) -
                       1.0) / 0.5));
    const RollFixings roll{{0.0, 0.5, 1.0, 1.5}, {0.99, 0.992, 0.991}};
    const double stub = bond_price(1.2, 1.5, x, c.params, c.schedule);
    const double later = forward_term_rate(1.2, 1.0, 1.5, x, c.params, c.schedule, roll, stub);
    // with t in the last period the rate is already known: 1/P(1.0, 1.5) - 1
    CHECK(later == Approx((1.0 / 0.991 - 1.0) / 0.5).epsilon(1e-14));
}
