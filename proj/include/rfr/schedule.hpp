#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rfr/errors.hpp"
#include "rfr/numerics.hpp"

namespace rfr {

/// The two deterministic date sets of the model: roll-over dates, which are
/// the atoms of eta(du) = du + sum_n delta_{t_n}(du), and the expected jump
/// dates of the overnight rate. Times are dimensionless (year fractions by
/// convention). Every interval in the library is half-open on the left,
/// (a, b], so an atom or jump at exactly a is excluded and one at b included.
class Schedule {
   public:
    Schedule() = default;

    Schedule(std::vector<double> roll_over, std::vector<double> expected_jumps, double horizon)
        : roll_over_(std::move(roll_over)),
          expected_jumps_(std::move(expected_jumps)),
          horizon_(horizon) {
        if (!std::isfinite(horizon_) || horizon_ < 0.0) {
            throw DomainError("schedule horizon must be finite and nonnegative");
        }
        check_dates(roll_over_, "roll_over");
        check_dates(expected_jumps_, "expected_jumps");
    }

    const std::vector<double>& roll_over() const { return roll_over_; }
    const std::vector<double>& expected_jumps() const { return expected_jumps_; }
    double horizon() const { return horizon_; }

    /// Roll-over dates in (a, b].
    std::span<const double> atoms_in(double a, double b) const { return in_interval(roll_over_, a, b); }
    /// Expected jump dates in (a, b].
    std::span<const double> jumps_in(double a, double b) const {
        return in_interval(expected_jumps_, a, b);
    }

    bool is_roll_over(double t) const {
        return std::binary_search(roll_over_.begin(), roll_over_.end(), t);
    }
    bool is_expected_jump(double t) const {
        return std::binary_search(expected_jumps_.begin(), expected_jumps_.end(), t);
    }

    /// Dates that are both roll-over and expected jump dates.
    std::vector<double> coincident_dates() const {
        std::vector<double> out;
        std::set_intersection(roll_over_.begin(), roll_over_.end(), expected_jumps_.begin(),
                              expected_jumps_.end(), std::back_inserter(out));
        return out;
    }

    /// Sorted union of both date sets.
    std::vector<double> discontinuity_dates() const {
        std::vector<double> out;
        std::set_union(roll_over_.begin(), roll_over_.end(), expected_jumps_.begin(),
                       expected_jumps_.end(), std::back_inserter(out));
        return out;
    }

   private:
    static std::span<const double> in_interval(const std::vector<double>& dates, double a, double b) {
        const auto lo = std::upper_bound(dates.begin(), dates.end(), a);
        const auto hi = std::upper_bound(lo, dates.end(), b);
        return {lo, hi};
    }

    void check_dates(const std::vector<double>& dates, const std::string& name) const {
        for (std::size_t k = 0; k < dates.size(); ++k) {
            if (!std::isfinite(dates[k]) || dates[k] < 0.0) {
                throw DomainError(name + " dates must be finite and nonnegative");
            }
            if (dates[k] > horizon_) throw DomainError(name + " dates must not exceed the horizon");
            if (k > 0 && !(dates[k] > dates[k - 1])) {
                throw DomainError(name + " dates must be strictly increasing");
            }
        }
    }

    std::vector<double> roll_over_;
    std::vector<double> expected_jumps_;
    double horizon_ = 0.0;
};

inline void require_ordered(double a, double b, const char* op) {
    if (!(a <= b)) throw DomainError(std::string(op) + ": requires t <= T");
}

/// int_{(a,b]} f d eta: Lebesgue part by adaptive quadrature plus the atom sum.
inline double eta_integrate(const std::function<double(double)>& f, double a, double b,
                            const Schedule& schedule) {
    require_ordered(a, b, "eta_integrate");
    double sum = integrate(f, a, b);
    for (double tj : schedule.atoms_in(a, b)) sum += f(tj);
    return sum;
}

/// As above with a closed-form antiderivative for the Lebesgue part.
inline double eta_integrate(const std::function<double(double)>& f,
                            const std::function<double(double)>& antiderivative, double a, double b,
                            const Schedule& schedule) {
    require_ordered(a, b, "eta_integrate");
    double sum = antiderivative(b) - antiderivative(a);
    for (double tj : schedule.atoms_in(a, b)) sum += f(tj);
    return sum;
}

/// B'(t, T) = int_{(t,T]} e^{beta (u - t)} eta(du).
inline double kernel_Bprime(double t, double T, double beta, const Schedule& schedule) {
    require_ordered(t, T, "kernel_Bprime");
    double sum = kernel_B(beta, T - t);
    for (double tj : schedule.atoms_in(t, T)) sum += std::exp(beta * (tj - t));
    return sum;
}

/// Bbar(t, T) = int_{(t,T]} e^{2 beta (u - t)} eta(du).
inline double kernel_Bbar(double t, double T, double beta, const Schedule& schedule) {
    require_ordered(t, T, "kernel_Bbar");
    double sum = kernel_B(2.0 * beta, T - t);
    for (double tj : schedule.atoms_in(t, T)) sum += std::exp(2.0 * beta * (tj - t));
    return sum;
}

/// Largest double strictly below t. Evaluating a time-t quantity at
/// left_of(t) counts every date equal to t as still in the future, which is
/// the left limit of the (t, T] conventions.
inline double left_of(double t) { return std::nextafter(t, -INFINITY); }

}  // namespace rfr
