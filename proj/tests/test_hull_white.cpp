#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "rfr/hull_white.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using Catch::Approx;
using namespace rfr;

TEST_CASE("parameter validation against the schedule") {
    auto c = scenario::base();
    CHECK_NOTHROW(validate(c.params, c.schedule));
    auto bad = c.params;
    bad.sigma = -0.01;
    CHECK_THROWS_AS(validate(bad, c.schedule), DomainError);
    bad = c.params;
    bad.jumps[0].date = 0.7;
    CHECK_THROWS_AS(validate(bad, c.schedule), DomainError);
    bad = c.params;
    bad.jumps[1].std = -1.0;
    CHECK_THROWS_AS(validate(bad, c.schedule), DomainError);
    // the factors together must cover every expected jump date
    bad = c.params;
    bad.jumps.pop_back();
    std::vector<HullWhiteParams> one{bad};
    CHECK_THROWS_AS(validate(one, c.schedule), DomainError);
    HullWhiteParams other;
    other.jumps = {{1.0, 0.0, 0.001}};
    std::vector<HullWhiteParams> two{bad, other};
    CHECK_NOTHROW(validate(two, c.schedule));
}

TEST_CASE("conditional moments of rho against direct integrals") {
    const auto c = scenario::base();
    const auto& p = c.params;
    for (auto [t, u, v] : {std::tuple{0.0, 2.0, 2.0}, {0.0, 0.75, 1.8}, {0.5, 1.0, 0.9}, {left_of(0.75), 0.75, 3.0},
                           {0.75, 0.75, 1.0}}) {
        CHECK(rho_mean(t, u, 0.013, p) == Approx(oracle::mean_rho(t, u, 0.013, p)).epsilon(1e-12));
        CHECK(rho_covariance(t, u, v, p) == Approx(oracle::cov_rho(t, u, v, p)).epsilon(1e-12).margin(1e-300));
    }
    // the jump at 0.75 is excluded from (0.75, T]
    CHECK(rho_mean(0.75, 0.8, 0.0, p) < rho_mean(0.7, 0.8, 0.0, p) + 0.002);
    CHECK_THROWS_AS(rho_mean(1.0, 0.5, 0.0, p), DomainError);
}

TEST_CASE("moments of R against eta x eta quadrature") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 8; ++k) {
        const auto c = scenario::random_case(rng);
        const auto& p = c.params;
        for (double t : {0.0, 0.37 * c.T}) {
            const RMoments m = R_moments(t, c.T, 0.011, 0.2, p, c.schedule);
            CHECK(m.mean - 0.2 == Approx(oracle::mean_R(t, c.T, 0.011, p, c.schedule)).epsilon(1e-10).margin(1e-14));
            CHECK(m.variance == Approx(oracle::var_R(t, c.T, p, c.schedule)).epsilon(1e-9).margin(1e-16));
            CHECK(rho_R_covariance(t, c.T, p, c.schedule) ==
                  Approx(oracle::cov_rho_R(t, c.T, p, c.schedule)).epsilon(1e-10).margin(1e-16));
        }
    }
}

TEST_CASE("fast mean reversion stays finite and accurate") {
    HullWhiteParams p;
    p.beta = -80.0;
    p.sigma = 0.02;
    p.alpha = TimeFunction::constant(0.4);
    p.jumps = {{50.0, 0.1, 0.4}, {100.0, 0.1, 0.4}};
    const Schedule s({}, {50.0, 100.0}, 200.0);
    const RMoments m = R_moments(0.0, 200.0, 0.0, 0.0, p, s);
    REQUIRE(std::isfinite(m.mean));
    REQUIRE(std::isfinite(m.variance));
    // stationary level alpha/|beta| over [0, 200] plus two jumps of mean 0.1/80
    CHECK(m.mean == Approx(0.005 * (200.0 - kernel_B(-80.0, 200.0)) + 2.0 * 0.1 / 80.0).epsilon(1e-12));
    // variance: 2 gamma^2 / 80^2 from the jumps plus sigma^2 int B(200 - s)^2 ds
    const double diffusion = p.sigma * p.sigma * detail::integral_B_squared(-80.0, 200.0);
    CHECK(m.variance == Approx(diffusion + 2.0 * 0.16 / 6400.0).epsilon(1e-12));
    CHECK(rho_covariance(0.0, 200.0, 200.0, p) == Approx(0.0004 / 160.0).epsilon(1e-12));
}

TEST_CASE("characteristic function of rho is Gaussian") {
    const auto c = scenario::base();
    for (double u : {0.5, -3.0}) {
        const double m = rho_mean(0.2, 1.7, 0.01, c.params);
        const double v = rho_covariance(0.2, 1.7, 1.7, c.params);
        const std::complex<double> iu(0.0, u);
        const auto got = char_fn_rho(iu, 0.2, 1.7, 0.01, c.params, c.schedule);
        const auto want = std::exp(iu * m - 0.5 * u * u * v);
        CHECK(got.real() == Approx(want.real()).epsilon(1e-13));
        CHECK(got.imag() == Approx(want.imag()).epsilon(1e-13));
        CHECK(char_fn_rho(u, 0.2, 1.7, 0.01, c.params, c.schedule).real() ==
              Approx(std::exp(u * m + 0.5 * u * u * v)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(char_fn_rho({NAN, 0.0}, 0.0, 1.0, 0.0, c.params, c.schedule), DomainError);
}

TEST_CASE("joint law of (rho_T, R_T) and the solution terms") {
    const auto c = scenario::base();
    const auto law = joint_gaussian_law(0.0, c.T, c.params.rho0, 0.0, c.params, c.schedule);
    CHECK(law.cov[0][1] == law.cov[1][0]);
    CHECK(law.cov[0][0] * law.cov[1][1] >= law.cov[0][1] * law.cov[0][1]);
    const auto terms = rho_solution_terms(0.0, c.T, c.params, c.schedule);
    double mean = terms.decay_factor * c.params.rho0 + terms.drift_term;
    double var = terms.diffusion_variance;
    for (std::size_t i = 0; i < terms.jump_contributions.size(); ++i) {
        const auto [s, e] = terms.jump_contributions[i];
        mean += e * c.params.jumps[i].mean;
        var += e * e * c.params.jumps[i].std * c.params.jumps[i].std;
    }
    CHECK(mean == Approx(law.mean[0]).epsilon(1e-14));
    CHECK(var == Approx(law.cov[0][0]).epsilon(1e-14));

    // two independent factors add up
    HullWhiteParams second = c.params;
    second.beta = -2.0;
    second.rho0 = -0.004;
    const std::vector<HullWhiteParams> factors{c.params, second};
    const std::vector<double> states{c.params.rho0, second.rho0};
    const auto both = joint_gaussian_law(0.0, c.T, states, 0.0, factors, c.schedule);
    const auto l2 = joint_gaussian_law(0.0, c.T, second.rho0, 0.0, second, c.schedule);
    CHECK(both.mean[1] == Approx(law.mean[1] + l2.mean[1]).epsilon(1e-14));
    CHECK(both.cov[1][1] == Approx(law.cov[1][1] + l2.cov[1][1]).epsilon(1e-14));
}
