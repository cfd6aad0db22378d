#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "rfr/errors.hpp"
#include "rfr/hull_white.hpp"
#include "rfr/numerics.hpp"
#include "rfr/pricing.hpp"
#include "rfr/rng.hpp"
#include "rfr/schedule.hpp"

namespace rfr {

enum class Scheme { exact, euler };

/// Discontinuity dates are stored twice: `pre` is the left limit and `post`
/// the value after jumps and atom accrual. Every other grid time is `none`.
enum class Side { none, pre, post };

inline const char* to_string(Side side) {
    switch (side) {
        case Side::pre:
            return "pre";
        case Side::post:
            return "post";
        default:
            return "none";
    }
}

inline const char* to_string(Scheme scheme) { return scheme == Scheme::exact ? "exact" : "euler"; }

/// Uniform grid on [0, horizon] with every discontinuity date merged in.
inline std::vector<double> uniform_grid(double horizon, std::size_t steps, const Schedule& schedule) {
    if (steps == 0 || !(horizon > 0.0)) throw ConfigError("uniform grid needs steps >= 1 and horizon > 0", "grid");
    std::vector<double> times;
    for (std::size_t i = 0; i <= steps; ++i) {
        times.push_back(i == steps ? horizon : horizon * static_cast<double>(i) / static_cast<double>(steps));
    }
    for (double d : schedule.discontinuity_dates()) {
        if (d > 0.0 && d <= horizon) times.push_back(d);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return times;
}

/// Smallest grid that carries every discontinuity date and the given
/// observation times.
inline std::vector<double> date_grid(const Schedule& schedule, std::vector<double> extra) {
    extra.push_back(0.0);
    extra.push_back(schedule.horizon());
    for (double d : schedule.discontinuity_dates()) extra.push_back(d);
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    return extra;
}

struct SimulationOptions {
    Scheme scheme = Scheme::exact;
    /// Keep the Brownian increments, needed for minimal-measure weights.
    bool keep_increments = false;
    /// Worker threads; 0 uses the hardware concurrency. Output does not
    /// depend on this value.
    unsigned workers = 0;
};

class PathSet;

/// Read access to one simulated path by time; off-grid times throw.
class PathView {
   public:
    PathView(const PathSet& set, std::size_t path) : set_(&set), path_(path) {}
    std::size_t index() const { return path_; }
    /// Right-continuous value (post-jump at discontinuity dates).
    double rho(double t) const;
    /// Left limit at t.
    double rho_left(double t) const;
    double factor_rho(double t, std::size_t k) const;
    double R(double t) const;
    double R_left(double t) const;
    double S0(double t) const { return std::exp(R(t)); }

   private:
    const PathSet* set_;
    std::size_t path_;
};

/// Immutable result of a simulation: paths x nodes matrices of rho, R and
/// optionally per-factor states and Brownian increments.
class PathSet {
   public:
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_nodes() const { return times_.size(); }
    std::size_t n_factors() const { return n_factors_; }
    std::uint64_t seed() const { return seed_; }
    Scheme scheme() const { return scheme_; }
    bool has_increments() const { return !dW_.empty(); }

    const std::vector<double>& node_times() const { return times_; }
    const std::vector<Side>& node_sides() const { return sides_; }

    double rho(std::size_t p, std::size_t i) const { return rho_[p * n_nodes() + i]; }
    double R(std::size_t p, std::size_t i) const { return R_[p * n_nodes() + i]; }
    double S0(std::size_t p, std::size_t i) const { return std::exp(R(p, i)); }
    double factor_rho(std::size_t p, std::size_t i, std::size_t k) const {
        if (k >= n_factors_) throw DomainError("factor index out of range");
        if (n_factors_ == 1) return rho(p, i);
        return factor_rho_[(p * n_nodes() + i) * n_factors_ + k];
    }
    /// Brownian increment of factor k over the step ending at node i
    /// (zero at post nodes).
    double dW(std::size_t p, std::size_t i, std::size_t k) const {
        if (!has_increments()) throw ConfigError("Brownian increments were not retained", "keep_increments");
        return dW_[(p * n_nodes() + i) * n_factors_ + k];
    }

    /// Node holding the right value at t.
    std::size_t node(double t) const { return find(t, false); }
    /// Node holding the left limit at t.
    std::size_t node_left(double t) const { return find(t, true); }

    PathView path(std::size_t p) const { return {*this, p}; }

    // Raw storage, exposed for byte-level reproducibility checks.
    const std::vector<double>& rho_data() const { return rho_; }
    const std::vector<double>& R_data() const { return R_; }
    const std::vector<double>& factor_rho_data() const { return factor_rho_; }
    const std::vector<double>& dW_data() const { return dW_; }

   private:
    friend PathSet simulate(std::vector<HullWhiteParams>, const Schedule&, std::vector<double>, std::size_t,
                            std::uint64_t, const SimulationOptions&);

    std::size_t find(double t, bool left) const {
        const auto it = std::lower_bound(times_.begin(), times_.end(), t);
        if (it == times_.end() || *it != t) {
            throw DataError("time " + std::to_string(t) + " is not on the simulation grid (no interpolation)");
        }
        auto i = static_cast<std::size_t>(it - times_.begin());
        if (!left && sides_[i] == Side::pre) ++i;
        return i;
    }

    std::vector<double> times_;
    std::vector<Side> sides_;
    std::size_t n_paths_ = 0;
    std::size_t n_factors_ = 1;
    std::uint64_t seed_ = 0;
    Scheme scheme_ = Scheme::exact;
    std::vector<double> rho_;
    std::vector<double> R_;
    std::vector<double> factor_rho_;
    std::vector<double> dW_;
};

inline double PathView::rho(double t) const { return set_->rho(path_, set_->node(t)); }
inline double PathView::rho_left(double t) const { return set_->rho(path_, set_->node_left(t)); }
inline double PathView::factor_rho(double t, std::size_t k) const {
    return set_->factor_rho(path_, set_->node(t), k);
}
inline double PathView::R(double t) const { return set_->R(path_, set_->node(t)); }
inline double PathView::R_left(double t) const { return set_->R(path_, set_->node_left(t)); }

namespace detail {

// Deterministic coefficients of one step [a, b] for one factor.
struct StepCoefficients {
    double dt = 0.0;
    double decay = 1.0;     // e^{beta dt}
    double growth = 0.0;    // B(dt)
    double drift_rho = 0.0; // a(a, b)
    double drift_R = 0.0;   // A(a, b)
    double alpha_left = 0.0;
    Matrix<3> chol{};       // of Cov(W_b - W_a, I1, I2)
};

inline StepCoefficients step_coefficients(double a, double b, const HullWhiteParams& p) {
    StepCoefficients c;
    c.dt = b - a;
    c.decay = std::exp(p.beta * c.dt);
    c.growth = kernel_B(p.beta, c.dt);
    c.drift_rho = decayed_integral(p.alpha, p.beta, a, b);
    c.drift_R = growth_integral(p.alpha, p.beta, a, b);
    c.alpha_left = p.alpha(a);
    // I1 = int sigma e^{beta (b-s)} dW, I2 = int sigma B(b-s) dW
    const double s = p.sigma;
    Matrix<3> v{};
    v[0][0] = c.dt;
    v[1][1] = s * s * kernel_B(2.0 * p.beta, c.dt);
    v[2][2] = s * s * integral_B_squared(p.beta, c.dt);
    v[0][1] = v[1][0] = s * c.growth;
    v[0][2] = v[2][0] = s * integral_B(p.beta, c.dt);
    v[1][2] = v[2][1] = s * s * integral_expB(p.beta, c.dt);
    c.chol = cholesky_psd(v);
    return c;
}

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

/// Simulates independent Hull-White factors rho = sum_k rho^k and
/// R_t = int_(0,t] rho d eta. The exact scheme samples each step from the
/// joint Gaussian law of (W, rho, R) increments; the Euler scheme exists
/// for cross-checks. At a discontinuity date the jumps are added first and
/// the atom then accrues the post-jump rate.
inline PathSet simulate(std::vector<HullWhiteParams> factors, const Schedule& schedule, std::vector<double> times,
                        std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options = {}) {
    if (n_paths == 0) throw ConfigError("n_paths must be at least 1", "n_paths");
    try {
        validate(factors, schedule);
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), "params");
    }
    if (times.size() < 2 || times.front() != 0.0) throw ConfigError("grid must start at 0 and have a step", "grid");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw ConfigError("grid times must be strictly increasing", "grid");
    }
    if (times.back() < schedule.horizon()) throw ConfigError("grid does not cover the schedule horizon", "grid");
    const auto dates = schedule.discontinuity_dates();
    for (double d : dates) {
        if (d > 0.0 && !std::binary_search(times.begin(), times.end(), d)) {
            throw ConfigError("grid is missing discontinuity date " + std::to_string(d), "grid");
        }
    }

    const std::size_t d = factors.size();
    PathSet out;
    out.n_paths_ = n_paths;
    out.n_factors_ = d;
    out.seed_ = seed;
    out.scheme_ = options.scheme;

    // node layout
    std::vector<std::size_t> step_node(times.size());
    std::vector<bool> is_date(times.size(), false);
    for (std::size_t j = 0; j < times.size(); ++j) {
        is_date[j] = j > 0 && std::binary_search(dates.begin(), dates.end(), times[j]);
        step_node[j] = out.times_.size();
        out.times_.push_back(times[j]);
        out.sides_.push_back(is_date[j] ? Side::pre : Side::none);
        if (is_date[j]) {
            out.times_.push_back(times[j]);
            out.sides_.push_back(Side::post);
        }
    }
    const std::size_t nodes = out.times_.size();

    std::vector<std::vector<detail::StepCoefficients>> coef(times.size(), std::vector<detail::StepCoefficients>(d));
    for (std::size_t j = 1; j < times.size(); ++j) {
        for (std::size_t k = 0; k < d; ++k) coef[j][k] = detail::step_coefficients(times[j - 1], times[j], factors[k]);
    }
    struct DateJump {
        std::size_t factor;
        double mean;
        double std;
    };
    std::vector<std::vector<DateJump>> jumps_at(times.size());
    std::vector<bool> atom_at(times.size(), false);
    for (std::size_t j = 1; j < times.size(); ++j) {
        if (!is_date[j]) continue;
        atom_at[j] = schedule.is_roll_over(times[j]);
        for (std::size_t k = 0; k < d; ++k) {
            for (const auto& jump : factors[k].jumps) {
                if (jump.date == times[j]) jumps_at[j].push_back({k, jump.mean, jump.std});
            }
        }
    }

    out.rho_.assign(n_paths * nodes, 0.0);
    out.R_.assign(n_paths * nodes, 0.0);
    if (d > 1) out.factor_rho_.assign(n_paths * nodes * d, 0.0);
    if (options.keep_increments) out.dW_.assign(n_paths * nodes * d, 0.0);

    const bool exact = options.scheme == Scheme::exact;
    auto run_path = [&](std::size_t p) {
        PathStream rng(seed, p);
        std::vector<double> x(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = factors[k].rho0;
        double R = 0.0;
        auto store = [&](std::size_t node) {
            double total = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                total += x[k];
                if (d > 1) out.factor_rho_[(p * nodes + node) * d + k] = x[k];
            }
            out.rho_[p * nodes + node] = total;
            out.R_[p * nodes + node] = R;
        };
        store(0);
        for (std::size_t j = 1; j < times.size(); ++j) {
            const std::size_t node = step_node[j];
            for (std::size_t k = 0; k < d; ++k) {
                const auto& c = coef[j][k];
                const double z0 = rng.normal();
                const double z1 = rng.normal();
                const double z2 = rng.normal();
                double dw = 0.0;
                if (exact) {
                    const auto& l = c.chol;
                    dw = l[0][0] * z0;
                    const double i1 = l[1][0] * z0 + l[1][1] * z1;
                    const double i2 = l[2][0] * z0 + l[2][1] * z1 + l[2][2] * z2;
                    R += x[k] * c.growth + c.drift_R + i2;
                    x[k] = c.decay * x[k] + c.drift_rho + i1;
                } else {
                    dw = std::sqrt(c.dt) * z0;
                    R += x[k] * c.dt;
                    x[k] += (c.alpha_left + factors[k].beta * x[k]) * c.dt + factors[k].sigma * dw;
                }
                if (options.keep_increments) out.dW_[(p * nodes + node) * d + k] = dw;
            }
            store(node);
            if (is_date[j]) {
                for (const auto& jump : jumps_at[j]) x[jump.factor] += jump.mean + jump.std * rng.normal();
                if (atom_at[j]) {
                    for (std::size_t k = 0; k < d; ++k) R += x[k];
                }
                store(node + 1);
            }
        }
    };
    detail::parallel_for(n_paths, options.workers, run_path);
    return out;
}

inline PathSet simulate(const HullWhiteParams& params, const Schedule& schedule, std::vector<double> times,
                        std::size_t n_paths, std::uint64_t seed, const SimulationOptions& options = {}) {
    return simulate(std::vector<HullWhiteParams>{params}, schedule, std::move(times), n_paths, seed, options);
}

// ---------------------------------------------------------------------------
// Estimators

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Sample mean and standard error of per-path values.
inline Estimate sample_mean(std::span<const double> values) {
    Estimate e;
    e.n = values.size();
    if (e.n == 0) return e;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(e.n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    e.value = mean;
    e.std_error = e.n > 1 ? std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n)) : 0.0;
    return e;
}

/// Sample covariance with its standard error (delta method on the
/// centred products).
inline Estimate sample_covariance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("sample_covariance: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) return {0.0, 0.0, n};
    const double mx = sample_mean(x).value;
    const double my = sample_mean(y).value;
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = (x[i] - mx) * (y[i] - my);
    Estimate e = sample_mean(prod);
    e.value *= static_cast<double>(n) / static_cast<double>(n - 1);
    return e;
}

enum class Discount { none, numeraire };

using Payoff = std::function<double(const PathView&)>;

/// Monte Carlo value of a payoff paid at `pay_time`, optionally divided by
/// the numeraire S0 at that time.
inline Estimate mc_price(const PathSet& paths, const Payoff& payoff, double pay_time, Discount discount) {
    const std::size_t pay_node = paths.node(pay_time);
    std::vector<double> values(paths.n_paths());
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        double v = payoff(paths.path(p));
        if (discount == Discount::numeraire) v /= paths.S0(p, pay_node);
        values[p] = v;
    }
    return sample_mean(values);
}

/// dQ^S/dQ = 1 / (S0_S P(0, S)).
struct ForwardMeasureWeight {
    double S = 0.0;
    double bond_price_0S = 1.0;
};

/// Minimal martingale measure density for a futures contract on [S, T]:
/// exp(-int lambda dW - 1/2 int lambda^2 du), lambda = h / (sigma B(u,S,T)),
/// accumulated up to `until` with lambda frozen at step midpoints.
struct MinimalMeasureWeight {
    TimeFunction h;
    double S = 0.0;
    double T = 0.0;
    double until = 0.0;
};

using MeasureWeight = std::variant<ForwardMeasureWeight, MinimalMeasureWeight>;

struct WeightedEstimate {
    Estimate value;
    Estimate weight;
};

inline std::vector<double> measure_weights(const PathSet& paths, const MeasureWeight& weight,
                                           std::span<const HullWhiteParams> factors) {
    std::vector<double> w(paths.n_paths());
    if (const auto* fw = std::get_if<ForwardMeasureWeight>(&weight)) {
        if (!(fw->bond_price_0S > 0.0)) throw ConfigError("forward measure needs P(0, S) > 0", "weight");
        const std::size_t node = paths.node(fw->S);
        for (std::size_t p = 0; p < paths.n_paths(); ++p) w[p] = 1.0 / (paths.S0(p, node) * fw->bond_price_0S);
        return w;
    }
    const auto& mw = std::get<MinimalMeasureWeight>(weight);
    if (!paths.has_increments()) throw ConfigError("minimal measure weights need Brownian increments", "keep_increments");
    if (factors.size() != paths.n_factors()) throw ConfigError("factor list does not match the paths", "params");
    if (factors.size() != 1) throw UnsupportedError("minimal measure weights are implemented for one factor");
    if (!(mw.S < mw.T) || mw.until > mw.T) throw ConfigError("minimal measure needs S < T and until <= T", "weight");
    const auto& f = factors[0];
    const auto& times = paths.node_times();
    const std::size_t last = paths.node(mw.until);
    std::vector<double> lambda(last + 1, 0.0);
    std::vector<double> dt(last + 1, 0.0);
    double prev = 0.0;
    for (std::size_t i = 1; i <= last; ++i) {
        if (paths.node_sides()[i] == Side::post) continue;
        const double mid = 0.5 * (prev + times[i]);
        const double hv = mw.h(mid);
        if (hv != 0.0) {
            if (!(f.sigma > 0.0)) throw ConfigError("minimal measure with h != 0 needs sigma > 0", "h");
            lambda[i] = hv / (f.sigma * futures_kernel(mid, mw.S, mw.T, f.beta));
        }
        dt[i] = times[i] - prev;
        prev = times[i];
    }
    for (std::size_t p = 0; p < paths.n_paths(); ++p) {
        double log_z = 0.0;
        for (std::size_t i = 1; i <= last; ++i) {
            if (lambda[i] == 0.0) continue;
            log_z -= lambda[i] * paths.dW(p, i, 0) + 0.5 * lambda[i] * lambda[i] * dt[i];
        }
        w[p] = std::exp(log_z);
    }
    return w;
}

/// Radon-Nikodym weighted sample mean of a payoff, with the weight mean as
/// a diagnostic (it should be 1 within its standard error).
inline WeightedEstimate weighted_expectation(const PathSet& paths, const Payoff& payoff,
                                             const MeasureWeight& weight,
                                             std::span<const HullWhiteParams> factors = {}) {
    const std::vector<double> w = measure_weights(paths, weight, factors);
    std::vector<double> values(paths.n_paths());
    for (std::size_t p = 0; p < paths.n_paths(); ++p) values[p] = w[p] * payoff(paths.path(p));
    return {sample_mean(values), sample_mean(w)};
}

// ---------------------------------------------------------------------------
// Output

/// CSV with columns path,time,side,rho,R,S0, 17 significant digits.
inline void write_paths_csv(std::ostream& os, const PathSet& paths, std::size_t max_paths = SIZE_MAX) {
    os << "path,time,side,rho,R,S0\n";
    char buf[160];
    const std::size_t n = std::min(paths.n_paths(), max_paths);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t i = 0; i < paths.n_nodes(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%s,%.17g,%.17g,%.17g\n", p, paths.node_times()[i],
                          to_string(paths.node_sides()[i]), paths.rho(p, i), paths.R(p, i), paths.S0(p, i));
            os << buf;
        }
    }
}

// ---------------------------------------------------------------------------
// Two-factor spike/jump scenario

struct Scenario {
    std::vector<HullWhiteParams> factors;
    Schedule schedule;
};

/// rho = rho^1 + rho^2: a slowly reverting factor with a level jump at 150
/// and a fast reverting one that spikes at 50 and 100. Mean reversion is
/// encoded as negative beta. No roll-over atoms.
inline Scenario example_4_4() {
    HullWhiteParams slow;
    slow.rho0 = 0.01875;
    slow.beta = -0.2;
    slow.alpha = TimeFunction::constant(0.01);
    slow.sigma = 0.012;
    slow.jumps = {{150.0, 0.1, 0.4}};
    HullWhiteParams fast;
    fast.rho0 = 0.0;
    fast.beta = -80.0;
    fast.alpha = TimeFunction::constant(0.0);
    fast.sigma = 0.0;
    fast.jumps = {{50.0, 0.1, 0.4}, {100.0, 0.1, 0.4}};
    return {{slow, fast}, Schedule({}, {50.0, 100.0, 150.0}, 200.0)};
}

inline PathSet example_4_4_paths(std::uint64_t seed, std::size_t n_paths = 1, std::size_t steps = 4000,
                                 unsigned workers = 0) {
    const Scenario s = example_4_4();
    SimulationOptions opt;
    opt.workers = workers;
    return simulate(s.factors, s.schedule, uniform_grid(s.schedule.horizon(), steps, s.schedule), n_paths, seed, opt);
}

/// Time after the jump at s for the conditional-mean deviation it causes to
/// halve, found by root finding on the analytic conditional mean.
inline double jump_half_life(const HullWhiteParams& factor, double s) {
    const auto it = std::find_if(factor.jumps.begin(), factor.jumps.end(), [s](const JumpSpec& j) { return j.date == s; });
    if (it == factor.jumps.end()) throw DomainError("factor has no jump at the requested date");
    if (it->mean == 0.0) throw DomainError("half-life needs a nonzero mean jump");
    if (!(factor.beta < 0.0)) throw DomainError("half-life needs mean reversion (beta < 0)");
    HullWhiteParams without = factor;
    without.jumps.erase(without.jumps.begin() + (it - factor.jumps.begin()));
    const double start = left_of(s);
    const double y = rho_mean(0.0, start, factor.rho0, factor);
    auto deviation = [&](double lag) {
        return rho_mean(start, s + lag, y, factor) - rho_mean(start, s + lag, y, without);
    };
    const double initial = deviation(0.0);
    auto f = [&](double lag) { return deviation(lag) / initial - 0.5; };
    // bracket before any later jump date could interfere: deviation is e^{beta lag}
    double hi = 1.0 / -factor.beta;
    while (f(hi) > 0.0) hi *= 2.0;
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(
        f, 0.0, hi, [](double x, double z) { return std::abs(x - z) <= 4e-16 * std::max(x, z); }, iters);
    return 0.5 * (a + b);
}

}  // namespace rfr
