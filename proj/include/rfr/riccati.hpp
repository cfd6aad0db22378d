#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rfr/errors.hpp"
#include "rfr/hull_white.hpp"
#include "rfr/schedule.hpp"
#include "rfr/time_function.hpp"

namespace rfr {

using Complex = std::complex<double>;

/// Affine semimartingale X of dimension d together with the affine map
/// rho = ell(t) + <Lambda, X>, which is all that is needed to write the
/// generalized Riccati equations of the joint process (X, R), R = int rho d eta.
///
/// F and R are the Levy-Khintchine exponents of the continuous part of X
/// (constant and linear coefficients); gamma0 and gamma_bar give the jump
/// transform at the fixed discontinuity dates. Null gamma_bar and ell mean
/// identically zero.
struct AffineSpec {
    using ScalarMap = std::function<Complex(double, std::span<const Complex>)>;
    using VectorMap = std::function<void(double, std::span<const Complex>, std::span<Complex>)>;

    std::size_t dimension = 1;
    ScalarMap F;
    VectorMap R;
    ScalarMap gamma0;
    VectorMap gamma_bar;
    std::function<double(double)> ell;
    std::vector<double> Lambda;
    /// Fixed discontinuity dates: roll-over dates plus jump dates of X.
    std::vector<double> jump_dates;
    /// Roll-over dates, which switch on the v-dependent jump branch.
    std::vector<double> roll_over_dates;
    /// Points where F or R are not smooth in t; used as integration knots.
    std::vector<double> knots;
    /// Dates that are both roll-over and jump dates of X (reported only).
    std::vector<double> coincident_dates;

    bool is_roll_over(double t) const {
        return std::binary_search(roll_over_dates.begin(), roll_over_dates.end(), t);
    }

    double ell_at(double t) const { return ell ? ell(t) : 0.0; }

    /// F^Y(t, u, v) = F(t, u) + ell(t) v.
    Complex F_Y(double t, std::span<const Complex> u, Complex v) const { return F(t, u) + ell_at(t) * v; }

    /// R^Y_i(t, u, v) = R_i(t, u) + Lambda_i v.
    void R_Y(double t, std::span<const Complex> u, Complex v, std::span<Complex> out) const {
        R(t, u, out);
        for (std::size_t i = 0; i < dimension; ++i) out[i] += Lambda[i] * v;
    }

    struct JumpUpdate {
        Complex dPhi;
        std::vector<Complex> dPsi;
    };

    /// Right-minus-left jumps (Delta Phi, Delta Psi) at a discontinuity date.
    JumpUpdate jump_update(double tau, std::span<const Complex> psi, Complex v) const {
        JumpUpdate out{Complex{}, std::vector<Complex>(dimension)};
        std::vector<Complex> arg(psi.begin(), psi.end());
        const bool roll = is_roll_over(tau);
        if (roll) {
            for (std::size_t i = 0; i < dimension; ++i) arg[i] += Lambda[i] * v;
        }
        out.dPhi = gamma0 ? -gamma0(tau, arg) : Complex{};
        if (gamma_bar) {
            gamma_bar(tau, arg, out.dPsi);
            for (auto& x : out.dPsi) x = -x;
        }
        if (roll) {
            out.dPhi -= v * ell_at(tau);
            for (std::size_t i = 0; i < dimension; ++i) out.dPsi[i] -= Lambda[i] * v;
        }
        return out;
    }
};

/// Backward solution (Phi, Psi) of the generalized Riccati equations on a
/// grid running down from T. Discontinuity dates appear twice: first the
/// right value, then the left limit.
struct RiccatiSolution {
    struct Node {
        double time = 0.0;
        bool left_limit = false;
        Complex Phi;
        std::vector<Complex> Psi;
    };

    double T = 0.0;
    std::vector<Complex> u;
    Complex v;
    std::vector<Node> nodes;
    std::vector<double> coincident_dates;

    /// Right value at the earliest time of the solution.
    const Node& initial() const { return nodes.back(); }

    /// Right value at a grid time.
    const Node& at(double t) const {
        for (const auto& n : nodes) {
            if (n.time == t && !n.left_limit) return n;
        }
        throw DomainError("time " + std::to_string(t) + " is not on the Riccati grid");
    }
};

/// Classical RK4 between consecutive discontinuity dates and knots, with
/// `step` as the maximum step; each discontinuity in (t_min, T] is crossed
/// from the right as Phi_{tau-} = Phi_tau - Delta Phi_tau, same for Psi.
inline RiccatiSolution solve_riccati(const AffineSpec& spec, double T, std::span<const Complex> u, Complex v,
                                     double t_min, double step) {
    if (!(t_min <= T)) throw DomainError("solve_riccati requires t_min <= T");
    if (!(step > 0.0)) throw DomainError("solve_riccati requires a positive step");
    if (u.size() != spec.dimension || spec.Lambda.size() != spec.dimension) {
        throw DomainError("terminal u and Lambda must match the spec dimension");
    }
    const std::size_t d = spec.dimension;

    std::vector<double> cuts{t_min, T};
    for (double x : spec.jump_dates) {
        if (x > t_min && x < T) cuts.push_back(x);
    }
    for (double x : spec.knots) {
        if (x > t_min && x < T) cuts.push_back(x);
    }
    std::sort(cuts.begin(), cuts.end(), std::greater<>());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    RiccatiSolution sol;
    sol.T = T;
    sol.u.assign(u.begin(), u.end());
    sol.v = v;
    sol.coincident_dates = spec.coincident_dates;

    Complex phi{};
    std::vector<Complex> psi(u.begin(), u.end());
    auto record = [&](double t, bool left) {
        if (!std::isfinite(phi.real()) || !std::isfinite(phi.imag())) {
            throw NumericalError("Riccati solution blew up below t=" + std::to_string(t), t);
        }
        for (const auto& x : psi) {
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) {
                throw NumericalError("Riccati solution blew up below t=" + std::to_string(t), t);
            }
        }
        sol.nodes.push_back({t, left, phi, psi});
    };
    auto is_jump = [&](double t) {
        return std::binary_search(spec.jump_dates.begin(), spec.jump_dates.end(), t);
    };
    auto cross_jump = [&](double t) {
        const auto upd = spec.jump_update(t, psi, v);
        phi -= upd.dPhi;
        for (std::size_t i = 0; i < d; ++i) psi[i] -= upd.dPsi[i];
        record(t, true);
    };

    record(T, false);
    if (T > t_min && is_jump(T)) cross_jump(T);

    std::vector<Complex> k1(d), k2(d), k3(d), k4(d), tmp(d);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double hi = cuts[c];
        const double lo = cuts[c + 1];
        const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step - 1e-9));
        const double h = (hi - lo) / static_cast<double>(std::max<std::size_t>(n, 1));
        const double t_top = left_of(hi);
        // derivative in backward time s = -t: d/ds (Phi, Psi) = (F^Y, R^Y)
        auto eval = [&](double t, std::span<const Complex> y, std::span<Complex> dpsi) {
            const double te = std::clamp(t, lo, t_top);
            spec.R_Y(te, y, v, dpsi);
            return spec.F_Y(te, y, v);
        };
        for (std::size_t i = 1; i <= std::max<std::size_t>(n, 1); ++i) {
            const double t0 = hi - static_cast<double>(i - 1) * h;
            const Complex f1 = eval(t0, psi, k1);
            for (std::size_t j = 0; j < d; ++j) tmp[j] = psi[j] + 0.5 * h * k1[j];
            const Complex f2 = eval(t0 - 0.5 * h, tmp, k2);
            for (std::size_t j = 0; j < d; ++j) tmp[j] = psi[j] + 0.5 * h * k2[j];
            const Complex f3 = eval(t0 - 0.5 * h, tmp, k3);
            for (std::size_t j = 0; j < d; ++j) tmp[j] = psi[j] + h * k3[j];
            const Complex f4 = eval(t0 - h, tmp, k4);
            phi += h / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
            for (std::size_t j = 0; j < d; ++j) psi[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            const double t1 = i == n ? lo : hi - static_cast<double>(i) * h;
            record(t1, false);
        }
        if (lo > t_min && is_jump(lo)) cross_jump(lo);
    }
    return sol;
}

/// E[exp(<u, X_T> + v R_T) | F_t] = exp(Phi_t + <Psi_t, x_t> + v r_t).
inline Complex transform(const AffineSpec& spec, double t, double T, std::span<const Complex> u, Complex v,
                         std::span<const double> x_t, double r_t, double step) {
    if (x_t.size() != spec.dimension) throw DomainError("state dimension mismatch");
    const RiccatiSolution sol = solve_riccati(spec, T, u, v, t, step);
    const auto& n = sol.initial();
    Complex expo = n.Phi + v * r_t;
    for (std::size_t i = 0; i < spec.dimension; ++i) expo += n.Psi[i] * x_t[i];
    return std::exp(expo);
}

/// Spec of the joint process for independent Gaussian Hull-White factors
/// X = (rho^1, ..., rho^d): F(t, u) = sum_k alpha_k(t) u_k + sigma_k^2 u_k^2 / 2,
/// R_k(t, u) = beta_k u_k, gamma0(s, u) = sum over jumps at s of
/// m u_k + gamma^2 u_k^2 / 2, gamma_bar = 0.
inline AffineSpec build_gaussian_hw_spec(std::vector<HullWhiteParams> factors, const Schedule& schedule,
                                         TimeFunction ell = TimeFunction::constant(0.0),
                                         std::vector<double> Lambda = {}) {
    validate(factors, schedule);
    const std::size_t d = factors.size();
    if (Lambda.empty()) Lambda.assign(d, 1.0);
    if (Lambda.size() != d) throw DomainError("Lambda must have one entry per factor");

    AffineSpec spec;
    spec.dimension = d;
    spec.Lambda = Lambda;
    spec.F = [factors](double t, std::span<const Complex> u) {
        Complex sum{};
        for (std::size_t k = 0; k < factors.size(); ++k) {
            const auto& f = factors[k];
            sum += f.alpha(t) * u[k] + 0.5 * f.sigma * f.sigma * u[k] * u[k];
        }
        return sum;
    };
    spec.R = [factors](double, std::span<const Complex> u, std::span<Complex> out) {
        for (std::size_t k = 0; k < factors.size(); ++k) out[k] = factors[k].beta * u[k];
    };
    spec.gamma0 = [factors](double s, std::span<const Complex> u) {
        Complex sum{};
        for (std::size_t k = 0; k < factors.size(); ++k) {
            for (const auto& j : factors[k].jumps) {
                if (j.date == s) sum += j.mean * u[k] + 0.5 * j.std * j.std * u[k] * u[k];
            }
        }
        return sum;
    };
    if (!ell.is_zero()) spec.ell = [ell](double t) { return ell(t); };
    spec.jump_dates = schedule.discontinuity_dates();
    spec.roll_over_dates = schedule.roll_over();
    for (const auto& f : factors) {
        spec.knots.insert(spec.knots.end(), f.alpha.breakpoints().begin(), f.alpha.breakpoints().end());
    }
    spec.knots.insert(spec.knots.end(), ell.breakpoints().begin(), ell.breakpoints().end());
    spec.coincident_dates = schedule.coincident_dates();
    return spec;
}

}  // namespace rfr
