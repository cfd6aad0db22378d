#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rfr/errors.hpp"
#include "rfr/numerics.hpp"
#include "rfr/schedule.hpp"
#include "rfr/time_function.hpp"

namespace rfr {

/// Scheduled jump xi ~ N(mean, std^2) of the overnight rate at `date`.
struct JumpSpec {
    double date = 0.0;
    double mean = 0.0;
    double std = 0.0;
};

/// Hull-White factor with scheduled Gaussian jumps:
///   d rho_t = (alpha(t) + beta rho_t) dt + sigma dW_t + dJ_t.
/// beta enters as written, so mean reversion needs beta < 0; the library
/// never flips its sign.
struct HullWhiteParams {
    double rho0 = 0.0;
    double beta = 0.0;
    double sigma = 0.0;
    TimeFunction alpha;
    std::vector<JumpSpec> jumps;
};

/// Checks one factor against the schedule: sigma >= 0, std >= 0, jump dates
/// strictly increasing and each one an expected jump date.
inline void validate(const HullWhiteParams& p, const Schedule& schedule) {
    if (!std::isfinite(p.rho0) || !std::isfinite(p.beta) || !std::isfinite(p.sigma)) {
        throw DomainError("Hull-White parameters must be finite");
    }
    if (p.sigma < 0.0) throw DomainError("sigma must be nonnegative");
    for (std::size_t i = 0; i < p.jumps.size(); ++i) {
        const JumpSpec& j = p.jumps[i];
        if (!std::isfinite(j.mean) || !std::isfinite(j.std) || j.std < 0.0) {
            throw DomainError("jump mean must be finite and jump std nonnegative");
        }
        if (i > 0 && !(j.date > p.jumps[i - 1].date)) {
            throw DomainError("jump dates must be strictly increasing");
        }
        if (!schedule.is_expected_jump(j.date)) {
            throw DomainError("jump date " + std::to_string(j.date) +
                              " is not an expected jump date of the schedule");
        }
    }
}

/// Checks a set of independent factors: each is valid and together they use
/// exactly the schedule's expected jump dates.
inline void validate(std::span<const HullWhiteParams> factors, const Schedule& schedule) {
    if (factors.empty()) throw DomainError("model needs at least one factor");
    for (const auto& f : factors) validate(f, schedule);
    for (double s : schedule.expected_jumps()) {
        bool used = false;
        for (const auto& f : factors) {
            for (const auto& j : f.jumps) used = used || j.date == s;
        }
        if (!used) {
            throw DomainError("expected jump date " + std::to_string(s) + " has no jump specification");
        }
    }
}

/// Weight of the jump at s in R_T - R_t: B'(s, T) + 1{s is a roll-over date},
/// i.e. the atom at s integrates the post-jump rate.
inline double jump_R_weight(double s, double T, double beta, const Schedule& schedule) {
    return kernel_Bprime(s, T, beta, schedule) + (schedule.is_roll_over(s) ? 1.0 : 0.0);
}

/// A'(t, T) = int_{(t,T]} a(t, u) eta(du).
inline double kernel_Aprime(double t, double T, const HullWhiteParams& p, const Schedule& schedule) {
    require_ordered(t, T, "kernel_Aprime");
    double sum = growth_integral(p.alpha, p.beta, t, T);
    for (double tj : schedule.atoms_in(t, T)) sum += decayed_integral(p.alpha, p.beta, t, tj);
    return sum;
}

namespace detail {

// Calls fn(a, b, K_b) over the pieces of [t, T] split at roll-over dates,
// right to left, where K_b = sum_{t_j in [b, T]} e^{beta (t_j - b)}.
template <class Fn>
void for_each_atom_piece(double t, double T, double beta, const Schedule& schedule, Fn&& fn) {
    const auto atoms = schedule.atoms_in(t, T);
    double b = T;
    double k = (!atoms.empty() && atoms.back() == T) ? 1.0 : 0.0;
    std::size_t idx = atoms.size();
    if (k > 0.0) --idx;
    while (true) {
        const double a = idx > 0 ? atoms[idx - 1] : t;
        if (b > a) fn(a, b, k);
        if (idx == 0) break;
        // a is an atom: K_a = 1 + e^{beta (b - a)} K_b
        k = 1.0 + std::exp(beta * (b - a)) * k;
        b = a;
        --idx;
    }
}

// int_t^T B'(s, T)^2 ds.
inline double integral_Bprime_squared(double t, double T, double beta, const Schedule& schedule) {
    double sum = 0.0;
    for_each_atom_piece(t, T, beta, schedule, [&](double a, double b, double k) {
        const double x0 = T - b;
        const double d = b - a;
        const double bx = kernel_B(beta, x0);
        const double ex = std::exp(beta * x0);
        sum += bx * bx * d + 2.0 * bx * ex * integral_B(beta, d) + ex * ex * integral_B_squared(beta, d);
        if (k != 0.0) {
            sum += 2.0 * k * (bx * kernel_B(beta, d) + ex * integral_expB(beta, d));
            sum += k * k * kernel_B(2.0 * beta, d);
        }
    });
    return sum;
}

// int_t^T e^{beta (T - s)} B'(s, T) ds.
inline double integral_Bprime_decay(double t, double T, double beta, const Schedule& schedule) {
    double sum = 0.0;
    for_each_atom_piece(t, T, beta, schedule, [&](double a, double b, double k) {
        const double x0 = T - b;
        const double d = b - a;
        const double ex = std::exp(beta * x0);
        sum += ex * kernel_B(beta, x0) * kernel_B(beta, d) + ex * ex * integral_expB(beta, d);
        if (k != 0.0) sum += ex * k * kernel_B(2.0 * beta, d);
    });
    return sum;
}

}  // namespace detail

/// Pieces of the explicit solution of the SDE between t and T.
struct RhoSolutionTerms {
    double decay_factor = 1.0;        // e^{beta (T - t)}
    double drift_term = 0.0;          // a(t, T)
    double diffusion_variance = 0.0;  // sigma^2 (e^{2 beta (T-t)} - 1) / (2 beta)
    std::vector<std::pair<double, double>> jump_contributions;  // (s_i, e^{beta (T - s_i)})
};

inline RhoSolutionTerms rho_solution_terms(double t, double T, const HullWhiteParams& p,
                                           const Schedule& schedule) {
    require_ordered(t, T, "rho_solution_terms");
    RhoSolutionTerms out;
    out.decay_factor = std::exp(p.beta * (T - t));
    out.drift_term = decayed_integral(p.alpha, p.beta, t, T);
    out.diffusion_variance = p.sigma * p.sigma * kernel_B(2.0 * p.beta, T - t);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= T) out.jump_contributions.emplace_back(j.date, std::exp(p.beta * (T - j.date)));
    }
    (void)schedule;
    return out;
}

/// m(t, T) = E[rho_T | rho_t].
inline double rho_mean(double t, double T, double rho_t, const HullWhiteParams& p) {
    require_ordered(t, T, "rho_mean");
    double m = rho_t * std::exp(p.beta * (T - t)) + decayed_integral(p.alpha, p.beta, t, T);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= T) m += j.mean * std::exp(p.beta * (T - j.date));
    }
    return m;
}

/// c(t, T1, T2) = Cov(rho_T1, rho_T2 | rho_t).
inline double rho_covariance(double t, double T1, double T2, const HullWhiteParams& p) {
    const double lo = std::min(T1, T2);
    require_ordered(t, lo, "rho_covariance");
    const double gap = std::abs(T1 - T2);
    double c = p.sigma * p.sigma * std::exp(p.beta * gap) * kernel_B(2.0 * p.beta, lo - t);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= lo) {
            c += j.std * j.std * std::exp(p.beta * (T1 + T2 - 2.0 * j.date));
        }
    }
    return c;
}

struct RhoMoments {
    double mean_at_T1 = 0.0;
    double mean_at_T2 = 0.0;
    double covariance = 0.0;
};

inline RhoMoments rho_moments(double t, double T1, double T2, double rho_t, const HullWhiteParams& p,
                              const Schedule& schedule) {
    (void)schedule;
    return {rho_mean(t, T1, rho_t, p), rho_mean(t, T2, rho_t, p), rho_covariance(t, T1, T2, p)};
}

struct RMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Conditional mean and variance of R_T given (rho_t, R_t). The variance is
/// the eta x eta double integral of c(t, ., .), evaluated in closed form as
/// sigma^2 int_t^T B'(s,T)^2 ds plus the jump terms.
inline RMoments R_moments(double t, double T, double rho_t, double R_t, const HullWhiteParams& p,
                          const Schedule& schedule) {
    require_ordered(t, T, "R_moments");
    RMoments out;
    out.mean = R_t + rho_t * kernel_Bprime(t, T, p.beta, schedule) + kernel_Aprime(t, T, p, schedule);
    out.variance = p.sigma * p.sigma * detail::integral_Bprime_squared(t, T, p.beta, schedule);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= T) {
            const double w = jump_R_weight(j.date, T, p.beta, schedule);
            out.mean += j.mean * w;
            out.variance += j.std * j.std * w * w;
        }
    }
    return out;
}

/// Cov(rho_T, R_T | rho_t, R_t) = int_{(t,T]} c(t, u, T) eta(du).
inline double rho_R_covariance(double t, double T, const HullWhiteParams& p, const Schedule& schedule) {
    require_ordered(t, T, "rho_R_covariance");
    double c = p.sigma * p.sigma * detail::integral_Bprime_decay(t, T, p.beta, schedule);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= T) {
            c += j.std * j.std * std::exp(p.beta * (T - j.date)) * jump_R_weight(j.date, T, p.beta, schedule);
        }
    }
    return c;
}

/// E[e^{u rho_T} | rho_t] = exp(phi + u e^{beta (T-t)} rho_t) for Gaussian jumps.
inline std::complex<double> char_fn_rho(std::complex<double> u, double t, double T, double rho_t,
                                        const HullWhiteParams& p, const Schedule& schedule) {
    require_ordered(t, T, "char_fn_rho");
    if (!std::isfinite(u.real()) || !std::isfinite(u.imag()) || !std::isfinite(rho_t)) {
        throw DomainError("char_fn_rho: non-finite input");
    }
    const double tau = T - t;
    std::complex<double> phi = u * decayed_integral(p.alpha, p.beta, t, T) +
                               0.5 * u * u * p.sigma * p.sigma * kernel_B(2.0 * p.beta, tau);
    for (const auto& j : p.jumps) {
        if (j.date > t && j.date <= T) {
            const double e = std::exp(p.beta * (T - j.date));
            phi += u * e * j.mean + 0.5 * u * u * e * e * j.std * j.std;
        }
    }
    (void)schedule;
    return std::exp(phi + u * std::exp(p.beta * tau) * rho_t);
}

/// Bivariate normal law, here of (rho_T, R_T).
struct GaussianLaw2 {
    std::array<double, 2> mean{};
    Matrix<2> cov{};
};

inline GaussianLaw2 joint_gaussian_law(double t, double T, double rho_t, double R_t,
                                       const HullWhiteParams& p, const Schedule& schedule) {
    const RMoments r = R_moments(t, T, rho_t, R_t, p, schedule);
    GaussianLaw2 law;
    law.mean = {rho_mean(t, T, rho_t, p), r.mean};
    const double cross = rho_R_covariance(t, T, p, schedule);
    law.cov = {{{rho_covariance(t, T, T, p), cross}, {cross, r.variance}}};
    return law;
}

/// Law of (sum_k rho^k_T, sum_k R^k_T) for independent factors; `rho_t`
/// holds the per-factor states and R_t the aggregate.
inline GaussianLaw2 joint_gaussian_law(double t, double T, std::span<const double> rho_t, double R_t,
                                       std::span<const HullWhiteParams> factors,
                                       const Schedule& schedule) {
    if (rho_t.size() != factors.size()) throw DomainError("one state per factor required");
    GaussianLaw2 law;
    law.mean[1] = R_t;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        const GaussianLaw2 part = joint_gaussian_law(t, T, rho_t[k], 0.0, factors[k], schedule);
        for (int i = 0; i < 2; ++i) {
            law.mean[static_cast<std::size_t>(i)] += part.mean[static_cast<std::size_t>(i)];
            for (int j = 0; j < 2; ++j) {
                law.cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                    part.cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        }
    }
    return law;
}

}  // namespace rfr
