#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "rfr/errors.hpp"
#include "rfr/hull_white.hpp"
#include "rfr/numerics.hpp"
#include "rfr/schedule.hpp"
#include "rfr/time_function.hpp"

namespace rfr {

// ---------------------------------------------------------------------------
// Bonds

/// Xi(t, S): the part of -log P(t, S) that does not multiply rho_t.
inline double xi(double t, double S, const HullWhiteParams& p, const Schedule& schedule) {
    require_ordered(t, S, "xi");
    const RMoments r = R_moments(t, S, 0.0, 0.0, p, schedule);
    return r.mean - 0.5 * r.variance;
}

inline double xi(double t, double S, std::span<const HullWhiteParams> factors, const Schedule& schedule) {
    double sum = 0.0;
    for (const auto& f : factors) sum += xi(t, S, f, schedule);
    return sum;
}

/// P(t, T) = exp(-rho_t B'(t, T) - Xi(t, T)).
inline double bond_price(double t, double T, double rho_t, const HullWhiteParams& p,
                         const Schedule& schedule) {
    require_ordered(t, T, "bond_price");
    return std::exp(-rho_t * kernel_Bprime(t, T, p.beta, schedule) - xi(t, T, p, schedule));
}

/// Multi-factor bond price; `rho_t` holds one state per factor.
inline double bond_price(double t, double T, std::span<const double> rho_t,
                         std::span<const HullWhiteParams> factors, const Schedule& schedule) {
    require_ordered(t, T, "bond_price");
    if (rho_t.size() != factors.size()) throw DomainError("one state per factor required");
    double log_p = 0.0;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        log_p -= rho_t[k] * kernel_Bprime(t, T, factors[k].beta, schedule) + xi(t, T, factors[k], schedule);
    }
    return std::exp(log_p);
}

// ---------------------------------------------------------------------------
// Roll-over fixings and backward-looking rates

/// Realized roll-over data along one path: dates t_0 = 0 < t_1 < ... and the
/// fixed one-period bond prices fixings[n] = P(t_n, t_{n+1}). Trailing
/// periods that have not fixed yet are simply absent.
struct RollFixings {
    std::vector<double> dates;
    std::vector<double> fixings;

    double fixing(std::size_t n) const {
        if (n >= fixings.size()) {
            throw DataError("missing roll-over fixing P(t_" + std::to_string(n) + ", t_" +
                            std::to_string(n + 1) + ")");
        }
        if (!(fixings[n] > 0.0)) throw DataError("roll-over fixings must be positive");
        return fixings[n];
    }

    /// Indices n with S <= t_n and t_{n+1} <= t.
    std::vector<std::size_t> completed_periods(double S, double t) const {
        std::vector<std::size_t> out;
        for (std::size_t n = 0; n + 1 < dates.size(); ++n) {
            if (S <= dates[n] && dates[n + 1] <= t) out.push_back(n);
        }
        return out;
    }
};

/// Numeraire of a discretely rolled-over investment,
/// prod_{t_{n+1} <= t} 1 / P(t_n, t_{n+1}).
inline double rollover_numeraire(const RollFixings& roll, double t) {
    double value = 1.0;
    for (std::size_t n = 0; n + 1 < roll.dates.size() && roll.dates[n + 1] <= t; ++n) {
        value /= roll.fixing(n);
    }
    return value;
}

/// Setting-in-arrears rate from the one-period fixings in [S, T].
inline double backward_rate_from_fixings(double S, double T, const RollFixings& roll) {
    if (!(S < T)) throw DomainError("backward rate requires S < T");
    double growth = 1.0;
    for (std::size_t n : roll.completed_periods(S, T)) growth /= roll.fixing(n);
    return (growth - 1.0) / (T - S);
}

/// Setting-in-arrears rate from numeraire values at S and T.
inline double backward_rate_from_numeraire(double S, double T, double numeraire_S, double numeraire_T) {
    if (!(S < T)) throw DomainError("backward rate requires S < T");
    if (!(numeraire_S > 0.0) || !(numeraire_T > 0.0)) throw DataError("numeraire values must be positive");
    return (numeraire_T / numeraire_S - 1.0) / (T - S);
}

/// P(t, S) for t > S: value at t of one unit paid at S and rolled over since.
/// `stub` is the current price P(t, t_{n(t)}), n(t) = inf{n : t_n > t}.
inline double bond_price_extended(double t, double S, const RollFixings& roll, double stub) {
    if (t < S) throw DomainError("bond_price_extended requires t >= S");
    if (t == S) return 1.0;
    const auto next = std::upper_bound(roll.dates.begin(), roll.dates.end(), t);
    if (next == roll.dates.begin() || next == roll.dates.end()) {
        throw DataError("roll-over dates do not bracket t");
    }
    const auto n_t = static_cast<std::size_t>(next - roll.dates.begin());
    if (!(stub > 0.0)) throw DataError("stub bond price must be positive");
    double value = stub / roll.fixing(n_t - 1);
    for (std::size_t n : roll.completed_periods(S, t)) value /= roll.fixing(n);
    return value;
}

/// Forward term rate R(t, S, T) = (P(t, S) / P(t, T) - 1) / (T - S), t <= S.
inline double forward_term_rate(double t, double S, double T, double rho_t, const HullWhiteParams& p,
                                const Schedule& schedule) {
    if (!(S < T)) throw DomainError("forward term rate requires S < T");
    if (t > S) throw DomainError("forward_term_rate: t > S needs realized roll-over fixings");
    return (bond_price(t, S, rho_t, p, schedule) / bond_price(t, T, rho_t, p, schedule) - 1.0) / (T - S);
}

/// Forward term rate inside the accrual period, S < t <= T.
inline double forward_term_rate(double t, double S, double T, double rho_t, const HullWhiteParams& p,
                                const Schedule& schedule, const RollFixings& roll, double stub) {
    if (t <= S) return forward_term_rate(t, S, T, rho_t, p, schedule);
    if (t > T) throw DomainError("forward term rate requires t <= T");
    return (bond_price_extended(t, S, roll, stub) / bond_price(t, T, rho_t, p, schedule) - 1.0) / (T - S);
}

// ---------------------------------------------------------------------------
// S-forward measure and caplets

struct ForwardMeasureParams {
    double Gamma1 = 0.0;
    double Gamma2 = 0.0;
};

/// Conditional law of rho_S under the S-forward measure:
/// N(rho_t e^{beta (S-t)} + Gamma1, Gamma2). The Brownian drift under Q^S is
/// -sigma B'(s, S), so rho picks up -sigma^2 B'(s, S).
inline ForwardMeasureParams forward_measure_params(double t, double S, const HullWhiteParams& p,
                                                   const Schedule& schedule) {
    require_ordered(t, S, "forward_measure_params");
    ForwardMeasureParams out;
    const double s2 = p.sigma * p.sigma;
    out.Gamma1 = decayed_integral(p.alpha, p.beta, t, S) -
                 s2 * detail::integral_Bprime_decay(t, S, p.beta, schedule);
    out.Gamma2 = s2 * kernel_B(2.0 * p.beta, S - t);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= S) {
            const double e = std::exp(p.beta * (S - j.date));
            const double g2 = j.std * j.std;
            out.Gamma1 += (j.mean - g2 * jump_R_weight(j.date, S, p.beta, schedule)) * e;
            out.Gamma2 += g2 * e * e;
        }
    }
    return out;
}

/// Forward-looking caplet paying (T - S)(F(S, T) - K)^+ at T.
struct CapletSpec {
    double S = 0.0;
    double T = 0.0;
    double K = 0.0;

    double strike_factor() const { return 1.0 + (T - S) * K; }

    void validate() const {
        if (!(S >= 0.0 && S < T)) throw DomainError("caplet requires 0 <= S < T");
        if (!(K > 0.0)) throw DomainError("caplet strike must be positive");
    }
};

/// Caplet pricing function G(x, t, S, T, K) at a fixed date t, with the
/// deterministic ingredients precomputed so that G and dG/dx are cheap to
/// evaluate for many states x = rho_t.
class CapletFormula {
   public:
    struct Components {
        double bond_to_start = 0.0;  // P(t, S)
        double d1 = 0.0;
        double d2 = 0.0;
        double strike_leg = 0.0;  // K' e^{mu + v/2}, with P(t,S) * strike_leg = K' P(t, T)
    };

    CapletFormula(double t, const CapletSpec& spec, const HullWhiteParams& p, const Schedule& schedule)
        : spec_(spec) {
        spec.validate();
        if (t > spec.S) throw DomainError("caplet formula requires t <= S");
        bprime_tS_ = kernel_Bprime(t, spec.S, p.beta, schedule);
        bprime_ST_ = kernel_Bprime(spec.S, spec.T, p.beta, schedule);
        xi_tS_ = xi(t, spec.S, p, schedule);
        xi_ST_ = xi(spec.S, spec.T, p, schedule);
        decay_ = std::exp(p.beta * (spec.S - t));
        fwd_ = forward_measure_params(t, spec.S, p, schedule);
        kprime_ = spec.strike_factor();
    }

    bool degenerate() const { return !(fwd_.Gamma2 > 0.0); }
    const ForwardMeasureParams& forward_params() const { return fwd_; }

    /// dQ^S-mean of rho_S given rho_t = x.
    double forward_mean(double x) const { return x * decay_ + fwd_.Gamma1; }

    Components components(double x) const {
        Components c;
        c.bond_to_start = std::exp(-x * bprime_tS_ - xi_tS_);
        const double m = forward_mean(x);
        c.strike_leg = kprime_ * std::exp(-xi_ST_ - bprime_ST_ * (m - 0.5 * bprime_ST_ * fwd_.Gamma2));
        if (degenerate()) {
            c.d1 = c.strike_leg < 1.0 ? INFINITY : -INFINITY;
            c.d2 = c.d1;
        } else {
            const double sd = std::sqrt(fwd_.Gamma2);
            c.d1 = (-std::log(kprime_) + xi_ST_) / (bprime_ST_ * sd) + m / sd;
            c.d2 = c.d1 - bprime_ST_ * sd;
        }
        return c;
    }

    /// G(x). The degenerate branch (Gamma2 = 0) is the discounted intrinsic
    /// value P(t, S)(1 - K' P(S, T))^+.
    double value(double x) const {
        const Components c = components(x);
        if (degenerate()) return c.bond_to_start * std::max(1.0 - c.strike_leg, 0.0);
        return c.bond_to_start * (normal_cdf(c.d1) - c.strike_leg * normal_cdf(c.d2));
    }

    /// dG/dx = -G B'(t, T) + B'(S, T) e^{beta (S-t)} P(t, S) Phi(d1).
    double delta(double x) const {
        const Components c = components(x);
        const double g = value(x);
        const double bprime_tT = bprime_tS_ + decay_ * bprime_ST_;
        const double phi1 = degenerate() ? (c.strike_leg < 1.0 ? 1.0 : 0.0) : normal_cdf(c.d1);
        return -g * bprime_tT + bprime_ST_ * decay_ * c.bond_to_start * phi1;
    }

   private:
    CapletSpec spec_;
    double bprime_tS_ = 0.0;
    double bprime_ST_ = 0.0;
    double xi_tS_ = 0.0;
    double xi_ST_ = 0.0;
    double decay_ = 1.0;
    double kprime_ = 1.0;
    ForwardMeasureParams fwd_;
};

/// Risk-neutral caplet price H_t = G(rho_t, t, S, T, K).
inline double caplet_price(double x, double t, const CapletSpec& spec, const HullWhiteParams& p,
                           const Schedule& schedule) {
    return CapletFormula(t, spec, p, schedule).value(x);
}

// ---------------------------------------------------------------------------
// Futures

/// B(t, S, T) = (B(T - t) - B(S - t)) / (T - S); positive for every t.
inline double futures_kernel(double t, double S, double T, double beta) {
    return (kernel_B(beta, T - t) - kernel_B(beta, S - t)) / (T - S);
}

/// Drift of rho under the minimal martingale measure,
/// alpha_hat(t) = alpha(t) - h(t) / B(t, S, T), on all of [0, T].
inline TimeFunction minimal_drift(const TimeFunction& alpha, const TimeFunction& h, double beta, double S,
                                  double T) {
    if (h.is_zero()) return alpha;
    std::vector<double> kinks = alpha.breakpoints();
    kinks.insert(kinks.end(), h.breakpoints().begin(), h.breakpoints().end());
    kinks.push_back(S);
    return TimeFunction::general(
        [alpha, h, beta, S, T](double t) { return alpha(t) - h(t) / futures_kernel(t, S, T, beta); },
        std::move(kinks));
}

inline HullWhiteParams minimal_measure_params(const HullWhiteParams& p, const TimeFunction& h, double S,
                                              double T) {
    HullWhiteParams out = p;
    out.alpha = minimal_drift(p.alpha, h, p.beta, S, T);
    return out;
}

/// Futures rate f(t, S, T) = E_hat[R_T - R_S | F_t] / (T - S) for a contract
/// settling on the Lebesgue-accrued rate; the reference window must carry
/// no roll-over atoms.
inline double futures_rate(double t, double S, double T, double rho_t, const HullWhiteParams& p,
                           const Schedule& schedule, const TimeFunction& h) {
    if (!(0.0 <= t && t <= S && S < T)) throw DomainError("futures rate requires 0 <= t <= S < T");
    if (!schedule.atoms_in(t, T).empty()) {
        throw UnsupportedError("futures rate is only defined without roll-over atoms in (t, T]");
    }
    const double len = T - S;
    const TimeFunction alpha_hat = minimal_drift(p.alpha, h, p.beta, S, T);
    double f = rho_t * futures_kernel(t, S, T, p.beta) +
               (growth_integral(alpha_hat, p.beta, t, T) - growth_integral(alpha_hat, p.beta, t, S)) / len;
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= S) {
            f += futures_kernel(j.date, S, T, p.beta) * j.mean;
        } else if (j.date > S && j.date <= T) {
            f += kernel_B(p.beta, T - j.date) / len * j.mean;
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Initial curve fitting

struct DiscountCurve {
    std::vector<std::pair<double, double>> pillars;  // (maturity, discount factor)

    void validate() const {
        if (pillars.empty()) throw DomainError("discount curve needs at least one pillar");
        for (std::size_t k = 0; k < pillars.size(); ++k) {
            const auto [T, df] = pillars[k];
            if (!std::isfinite(T) || T < 0.0) throw DomainError("curve maturities must be nonnegative");
            if (!(df > 0.0) || !std::isfinite(df)) throw DomainError("discount factors must be positive");
            if (k > 0 && !(T > pillars[k - 1].first)) {
                throw DomainError("curve maturities must be strictly increasing");
            }
            if (T == 0.0 && df != 1.0) throw DomainError("discount factor at maturity 0 must be 1");
        }
    }
};

/// Bootstraps a piecewise-constant alpha, one bucket per pillar, so that
/// bond_price(0, T_k) reproduces every pillar. Bucket k covers
/// [T_{k-1}, T_k) with T_0 = 0; the last bucket extends beyond.
inline TimeFunction fit_drift_to_curve(const DiscountCurve& curve, const HullWhiteParams& params,
                                       const Schedule& schedule) {
    curve.validate();
    std::vector<std::pair<double, double>> targets;
    for (const auto& pillar : curve.pillars) {
        if (pillar.first > 0.0) targets.push_back(pillar);
    }
    if (targets.empty()) return TimeFunction::constant(0.0);

    std::vector<double> breaks{0.0};
    std::vector<double> values;
    HullWhiteParams p = params;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto [T, df] = targets[k];
        const double target = std::log(df);
        auto residual = [&](double v) {
            std::vector<double> vals = values;
            vals.push_back(v);
            p.alpha = TimeFunction::piecewise(breaks, vals);
            return std::log(bond_price(0.0, T, p.rho0, p, schedule)) - target;
        };
        // log P is decreasing in the bucket value
        double lo = -1.0;
        double hi = 1.0;
        double f_lo = residual(lo);
        double f_hi = residual(hi);
        int expansions = 0;
        while (f_lo < 0.0 || f_hi > 0.0) {
            if (++expansions > 60 || !std::isfinite(f_lo) || !std::isfinite(f_hi)) {
                throw CalibrationError("could not bracket drift bucket for pillar T=" + std::to_string(T), k);
            }
            if (f_lo < 0.0) {
                lo *= 2.0;
                f_lo = residual(lo);
            }
            if (f_hi > 0.0) {
                hi *= 2.0;
                f_hi = residual(hi);
            }
        }
        std::uintmax_t max_iter = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(
            residual, lo, hi, f_lo, f_hi, [](double x, double y) { return std::abs(x - y) <= 1e-12; },
            max_iter);
        values.push_back(0.5 * (a + b));
        if (k + 1 < targets.size()) breaks.push_back(T);
    }
    return TimeFunction::piecewise(breaks, values);
}

}  // namespace rfr
