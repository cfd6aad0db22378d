#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfr/errors.hpp"
#include "rfr/hull_white.hpp"
#include "rfr/monte_carlo.hpp"
#include "rfr/numerics.hpp"
#include "rfr/pricing.hpp"
#include "rfr/rng.hpp"
#include "rfr/schedule.hpp"

namespace rfr {

/// Futures contract on the rate accrued over [S, T]. Under Q its rate has
/// drift h(t) dt; h = 0 makes it a Q-martingale.
struct FuturesSpec {
    double S = 0.0;
    double T = 0.0;
    TimeFunction h;

    /// Hedging with futures is set up on a schedule without roll-over atoms.
    void validate(const Schedule& schedule) const {
        if (!(S >= 0.0 && S < T)) throw DomainError("futures reference period requires 0 <= S < T");
        if (!schedule.atoms_in(0.0, T).empty() || schedule.is_roll_over(0.0)) {
            throw UnsupportedError("futures hedging requires a schedule without roll-over atoms");
        }
    }
};

/// alpha_hat(t) = alpha(t) - h(t) / B(t, S, T).
inline double minimal_measure_drift(double t, const FuturesSpec& futures, const HullWhiteParams& p) {
    if (!(t < futures.T)) throw DomainError("minimal_measure_drift requires t < T");
    const double k = futures_kernel(t, futures.S, futures.T, p.beta);
    if (k == 0.0 || !std::isfinite(k)) throw DomainError("singular futures kernel B(t, S, T)");
    return p.alpha(t) - futures.h(t) / k;
}

inline HullWhiteParams minimal_measure_params(const HullWhiteParams& p, const FuturesSpec& futures) {
    return minimal_measure_params(p, futures.h, futures.S, futures.T);
}

namespace detail {

inline void check_hedge_inputs(const CapletSpec& caplet, const FuturesSpec& futures, const Schedule& schedule) {
    caplet.validate();
    futures.validate(schedule);
    if (caplet.S != futures.S || caplet.T != futures.T) {
        throw ConfigError("caplet and futures must reference the same period [S, T]", "futures");
    }
}

inline const JumpSpec* jump_at(const HullWhiteParams& p, double s) {
    for (const auto& j : p.jumps) {
        if (j.date == s) return &j;
    }
    return nullptr;
}

// E[G(y + xi)(xi - m)] by Gauss-Hermite, doubling the node count until two
// consecutive rules agree to 1e-10 relative. nullopt if 256 nodes do not
// get there.
inline std::optional<double> jump_moment(const CapletFormula& g, double y, const JumpSpec& jump, int nodes) {
    auto integrand = [&](double x) { return g.value(y + x) * (x - jump.mean); };
    double scale = 1e-12 * jump.std * (std::abs(g.value(y + jump.mean)) + 1e-300);
    double prev = gauss_hermite_rule(nodes).expectation(integrand, jump.mean, jump.std);
    for (int n = 2 * nodes; n <= 256; n *= 2) {
        const double next = gauss_hermite_rule(n).expectation(integrand, jump.mean, jump.std);
        if (std::abs(next - prev) <= 1e-10 * std::max(std::abs(next), scale)) return prev;
        prev = next;
    }
    return std::nullopt;
}

}  // namespace detail

/// Continuous hedge ratio dG/dx / B(t, S, T) with G computed under alpha_hat.
/// `p_hat` must already carry the minimal-measure drift.
inline double zeta_continuous_hat(double rho_t, double t, const CapletSpec& caplet, const FuturesSpec& futures,
                                  const HullWhiteParams& p_hat, const Schedule& schedule) {
    const CapletFormula g(t, caplet, p_hat, schedule);
    return g.delta(rho_t) / futures_kernel(t, futures.S, futures.T, p_hat.beta);
}

/// Hedge ratio in futures at a time t in [0, S] that is not a jump date.
inline double zeta_continuous(double rho_t, double t, const CapletSpec& caplet, const FuturesSpec& futures,
                              const HullWhiteParams& p, const Schedule& schedule) {
    detail::check_hedge_inputs(caplet, futures, schedule);
    if (t < 0.0 || t > caplet.S) throw DomainError("zeta_continuous requires 0 <= t <= S");
    if (schedule.is_expected_jump(t)) throw DomainError("zeta_continuous is not defined at a jump date");
    return zeta_continuous_hat(rho_t, t, caplet, futures, minimal_measure_params(p, futures), schedule);
}

struct JumpHedgeRatio {
    double value = 0.0;
    /// "gauss-hermite", "stein" (closed form, used when quadrature does not
    /// converge) or "continuous" (degenerate jump, gamma = 0).
    std::string method;
};

/// Jump hedge ratio E[G(y + xi)(xi - m)] / (B(s, S, T) gamma^2) at a jump
/// date s in (0, S], y = rho_{s-}, G evaluated at s under alpha_hat. The
/// numeraire argument divides both G and the futures gain, and must cancel.
inline JumpHedgeRatio zeta_jump_detailed(double rho_left, double s, const CapletSpec& caplet,
                                         const FuturesSpec& futures, const HullWhiteParams& p,
                                         const Schedule& schedule, int nodes = 64, double numeraire = 1.0) {
    detail::check_hedge_inputs(caplet, futures, schedule);
    if (!(s > 0.0 && s <= caplet.S)) throw DomainError("zeta_jump requires a jump date in (0, S]");
    const JumpSpec* jump = detail::jump_at(p, s);
    if (jump == nullptr) throw DomainError("no jump of the factor at s=" + std::to_string(s));
    if (nodes < 1) throw DomainError("Gauss-Hermite node count must be positive");
    if (!(numeraire > 0.0)) throw DomainError("numeraire must be positive");
    const HullWhiteParams p_hat = minimal_measure_params(p, futures);
    const double kernel = futures_kernel(s, futures.S, futures.T, p.beta);
    if (jump->std == 0.0) {
        return {zeta_continuous_hat(rho_left + jump->mean, s, caplet, futures, p_hat, schedule), "continuous"};
    }
    const CapletFormula g(s, caplet, p_hat, schedule);
    const double var = jump->std * jump->std;
    if (const auto moment = detail::jump_moment(g, rho_left, *jump, nodes)) {
        return {(*moment / numeraire) / (kernel / numeraire * var), "gauss-hermite"};
    }
    // Stein: E[G(y + xi)(xi - m)] = gamma^2 d/dy E[G(y + xi)], and E[G(y + xi)]
    // is the caplet formula just before s.
    const CapletFormula g_left(left_of(s), caplet, p_hat, schedule);
    return {g_left.delta(rho_left) / kernel, "stein"};
}

inline double zeta_jump(double rho_left, double s, const CapletSpec& caplet, const FuturesSpec& futures,
                        const HullWhiteParams& p, const Schedule& schedule, int nodes = 64) {
    return zeta_jump_detailed(rho_left, s, caplet, futures, p, schedule, nodes).value;
}

/// Ordinary least squares slope of the caplet value change on the futures
/// gain across simulated jumps at a fixed pre-jump state.
struct RegressionCheck {
    double zeta_jump = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    std::size_t n = 0;
};

inline RegressionCheck jump_regression_check(double rho_left, double s, const CapletSpec& caplet,
                                             const FuturesSpec& futures, const HullWhiteParams& p,
                                             const Schedule& schedule, std::size_t n, std::uint64_t seed) {
    if (n < 3) throw DomainError("regression check needs at least 3 draws");
    RegressionCheck out;
    out.n = n;
    out.zeta_jump = zeta_jump(rho_left, s, caplet, futures, p, schedule);
    const JumpSpec& jump = *detail::jump_at(p, s);
    const HullWhiteParams p_hat = minimal_measure_params(p, futures);
    const CapletFormula g(s, caplet, p_hat, schedule);
    const double before = CapletFormula(left_of(s), caplet, p_hat, schedule).value(rho_left);
    const double kernel = futures_kernel(s, futures.S, futures.T, p.beta);
    PathStream rng(seed, 0);
    std::vector<double> dx(n), dh(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = jump.mean + jump.std * rng.normal();
        dx[i] = kernel * (x - jump.mean);
        dh[i] = g.value(rho_left + x) - before;
    }
    const double mx = sample_mean(dx).value;
    const double mh = sample_mean(dh).value;
    double sxx = 0.0;
    double sxh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (dx[i] - mx) * (dx[i] - mx);
        sxh += (dx[i] - mx) * (dh[i] - mh);
    }
    out.slope = sxh / sxx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = dh[i] - mh - out.slope * (dx[i] - mx);
        ssr += r * r;
    }
    out.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    return out;
}

struct JumpDiagnostics {
    double date = 0.0;
    Estimate mean_dL;
    Estimate cov_dL_dM;
    /// Pooled regression of the discounted caplet change on the futures gain.
    double slope = 0.0;
    double r_squared = 0.0;
    double mean_zeta = 0.0;
    std::size_t n = 0;
};

/// Hedge run summary. Entry k describes hedge node k; zeta_mean[k] is the
/// average ratio held over the step that starts at node k (the last entry is
/// 0), V_mean the average discounted value and cost_var the variance of the
/// cumulative cost C_k - C_0 across paths.
struct HedgeReport {
    std::vector<double> times;
    std::vector<Side> sides;
    std::vector<double> zeta_mean;
    std::vector<double> V_mean;
    std::vector<double> cost_var;
    std::vector<JumpDiagnostics> jumps;
    double initial_value = 0.0;
    /// Mean over paths of the summed squared cost increments, split by kind.
    double continuous_cost_variance = 0.0;
    double jump_cost_variance = 0.0;
    double terminal_cost_variance = 0.0;
    /// max |V_S - (1 - K' P_hat(S, T))^+ / S0_S| over paths.
    double max_terminal_error = 0.0;
    std::size_t n_paths = 0;
};

struct HedgeOptions {
    /// Rebalancing times; empty uses every path grid time up to S. Must
    /// contain 0, S and each jump date in (0, S].
    std::vector<double> rebalance;
    int hermite_nodes = 64;
    unsigned workers = 0;
};

/// Runs the locally risk-minimizing futures hedge of a caplet along
/// simulated paths: V = G(rho, t) / S0 under alpha_hat, X the S0-discounted
/// futures price, and cost increments dC = dV - zeta dX per step.
inline HedgeReport run_hedge(const PathSet& paths, const CapletSpec& caplet, const FuturesSpec& futures,
                             const HullWhiteParams& p, const Schedule& schedule, const HedgeOptions& options = {}) {
    detail::check_hedge_inputs(caplet, futures, schedule);
    validate(p, schedule);
    if (paths.n_factors() != 1) throw UnsupportedError("hedging is implemented for a single factor");
    const double S = caplet.S;
    const HullWhiteParams p_hat = minimal_measure_params(p, futures);

    std::vector<double> rebalance = options.rebalance;
    if (rebalance.empty()) {
        for (double t : paths.node_times()) {
            if (t <= S) rebalance.push_back(t);
        }
    }
    std::sort(rebalance.begin(), rebalance.end());
    rebalance.erase(std::unique(rebalance.begin(), rebalance.end()), rebalance.end());
    if (rebalance.front() != 0.0 || rebalance.back() != S) {
        throw ConfigError("rebalancing grid must start at 0 and end at S", "rebalance");
    }
    for (const auto& j : p.jumps) {
        if (j.date > 0.0 && j.date <= S && !std::binary_search(rebalance.begin(), rebalance.end(), j.date)) {
            throw ConfigError("rebalancing grid is missing jump date " + std::to_string(j.date), "rebalance");
        }
    }

    struct HedgeNode {
        double time;
        Side side;
        std::size_t path_node;
        double eval_time;
        std::optional<CapletFormula> g;
        double kernel;
        double futures_offset;  // f(t) at rho_t = 0
    };
    std::vector<HedgeNode> nodes;
    for (double t : rebalance) {
        std::vector<Side> sides{Side::none};
        if (t > 0.0 && schedule.is_expected_jump(t)) sides = {Side::pre, Side::post};
        for (Side side : sides) {
            HedgeNode n;
            n.time = t;
            n.side = side;
            n.path_node = side == Side::pre ? paths.node_left(t) : paths.node(t);
            n.eval_time = side == Side::pre ? left_of(t) : t;
            n.g.emplace(n.eval_time, caplet, p_hat, schedule);
            n.kernel = futures_kernel(n.eval_time, futures.S, futures.T, p.beta);
            n.futures_offset = futures_rate(n.eval_time, futures.S, futures.T, 0.0, p, schedule, futures.h);
            nodes.push_back(std::move(n));
        }
    }
    const std::size_t K = nodes.size();
    const std::size_t P = paths.n_paths();

    std::vector<double> zeta(P * K, 0.0), value(P * K, 0.0), cost(P * K, 0.0);
    std::vector<std::size_t> jump_steps;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        if (nodes[k].side == Side::pre) jump_steps.push_back(k);
    }
    const std::size_t J = jump_steps.size();
    std::vector<double> dL(P * J), dM(P * J), dV(P * J);
    std::vector<double> cont_sq(P, 0.0), jump_sq(P, 0.0), term_err(P, 0.0);
    const double kprime = caplet.strike_factor();

    detail::parallel_for(P, options.workers, [&](std::size_t path) {
        double c = 0.0;
        std::size_t jump_idx = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const auto& n = nodes[k];
            const double rho = paths.rho(path, n.path_node);
            const double s0 = paths.S0(path, n.path_node);
            const double v = n.g->value(rho) / s0;
            value[path * K + k] = v;
            if (k == 0) {
                c = v;
            } else {
                const auto& prev = nodes[k - 1];
                const double rho_prev = paths.rho(path, prev.path_node);
                const double s0_prev = paths.S0(path, prev.path_node);
                const double f_prev = prev.futures_offset + prev.kernel * rho_prev;
                const double f_now = n.futures_offset + n.kernel * rho;
                const double dx = (f_now - f_prev) / s0_prev;
                const double dv = v - value[path * K + k - 1];
                const double dc = dv - zeta[path * K + k - 1] * dx;
                c += dc;
                if (prev.side == Side::pre) {
                    dL[path * J + jump_idx] = dc;
                    dM[path * J + jump_idx] = dx;
                    dV[path * J + jump_idx] = dv;
                    ++jump_idx;
                    jump_sq[path] += dc * dc;
                } else {
                    cont_sq[path] += dc * dc;
                }
            }
            cost[path * K + k] = c;
            if (k + 1 < K) {
                if (n.side == Side::pre) {
                    const JumpSpec* jump = detail::jump_at(p, n.time);
                    double z = 0.0;
                    if (jump->std == 0.0) {
                        z = nodes[k + 1].g->delta(rho + jump->mean) / nodes[k + 1].kernel;
                    } else if (const auto m = detail::jump_moment(*nodes[k + 1].g, rho, *jump, options.hermite_nodes)) {
                        z = *m / (nodes[k + 1].kernel * jump->std * jump->std);
                    } else {
                        z = n.g->delta(rho) / nodes[k + 1].kernel;
                    }
                    zeta[path * K + k] = z;
                } else {
                    zeta[path * K + k] = n.g->delta(rho) / n.kernel;
                }
            } else {
                const double bond = bond_price(S, futures.T, rho, p_hat, schedule);
                term_err[path] = std::abs(v - std::max(1.0 - kprime * bond, 0.0) / s0);
            }
        }
    });

    HedgeReport report;
    report.n_paths = P;
    for (std::size_t k = 0; k < K; ++k) {
        report.times.push_back(nodes[k].time);
        report.sides.push_back(nodes[k].side);
        std::vector<double> z(P), v(P), c(P);
        for (std::size_t path = 0; path < P; ++path) {
            z[path] = zeta[path * K + k];
            v[path] = value[path * K + k];
            c[path] = cost[path * K + k] - cost[path * K];
        }
        report.zeta_mean.push_back(sample_mean(z).value);
        report.V_mean.push_back(sample_mean(v).value);
        const Estimate ce = sample_mean(c);
        report.cost_var.push_back(ce.std_error * ce.std_error * static_cast<double>(P));
    }
    report.initial_value = value[0];
    report.terminal_cost_variance = report.cost_var.back();
    report.continuous_cost_variance = sample_mean(cont_sq).value;
    report.jump_cost_variance = sample_mean(jump_sq).value;
    report.max_terminal_error = *std::max_element(term_err.begin(), term_err.end());

    for (std::size_t j = 0; j < J; ++j) {
        std::vector<double> l(P), m(P), hv(P), z(P);
        for (std::size_t path = 0; path < P; ++path) {
            l[path] = dL[path * J + j];
            m[path] = dM[path * J + j];
            hv[path] = dV[path * J + j];
            z[path] = zeta[path * K + jump_steps[j]];
        }
        JumpDiagnostics d;
        d.date = nodes[jump_steps[j]].time;
        d.n = P;
        d.mean_dL = sample_mean(l);
        d.cov_dL_dM = sample_covariance(l, m);
        d.mean_zeta = sample_mean(z).value;
        const double cov_vm = sample_covariance(hv, m).value;
        const double var_m = sample_covariance(m, m).value;
        const double var_v = sample_covariance(hv, hv).value;
        d.slope = var_m > 0.0 ? cov_vm / var_m : 0.0;
        d.r_squared = var_m > 0.0 && var_v > 0.0 ? cov_vm * cov_vm / (var_m * var_v) : 0.0;
        report.jumps.push_back(d);
    }
    return report;
}

}  // namespace rfr
