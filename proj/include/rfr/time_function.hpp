#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "rfr/errors.hpp"
#include "rfr/numerics.hpp"

namespace rfr {

/// Deterministic function of time. The canonical form is piecewise
/// constant, value[k] on [breakpoint[k], breakpoint[k+1]) with the first and
/// last pieces extended to -inf and +inf; integrals against it are closed
/// form. A general callable is also accepted and integrated by quadrature,
/// split at the declared kinks.
class TimeFunction {
   public:
    TimeFunction() : breakpoints_{0.0}, values_{0.0} {}

    static TimeFunction constant(double value) { return piecewise({0.0}, {value}); }

    static TimeFunction piecewise(std::vector<double> breakpoints, std::vector<double> values) {
        if (breakpoints.empty() || breakpoints.size() != values.size()) {
            throw DomainError("piecewise function needs matching, non-empty breakpoints and values");
        }
        for (std::size_t k = 1; k < breakpoints.size(); ++k) {
            if (!(breakpoints[k] > breakpoints[k - 1])) {
                throw DomainError("piecewise function breakpoints must be strictly increasing");
            }
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw DomainError("piecewise function values must be finite");
        }
        TimeFunction f;
        f.breakpoints_ = std::move(breakpoints);
        f.values_ = std::move(values);
        f.general_ = nullptr;
        return f;
    }

    static TimeFunction general(std::function<double(double)> fn, std::vector<double> kinks = {}) {
        TimeFunction f;
        std::sort(kinks.begin(), kinks.end());
        f.breakpoints_ = std::move(kinks);
        f.values_.clear();
        f.general_ = std::make_shared<const std::function<double(double)>>(std::move(fn));
        return f;
    }

    bool is_piecewise() const { return general_ == nullptr; }

    bool is_zero() const {
        return is_piecewise() &&
               std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    }

    double operator()(double t) const {
        if (general_) return (*general_)(t);
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        const auto k = it == breakpoints_.begin() ? 0 : (it - breakpoints_.begin()) - 1;
        return values_[static_cast<std::size_t>(k)];
    }

    /// Breakpoints (piecewise) or declared kinks (general).
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    /// Piece values; empty for a general function.
    const std::vector<double>& values() const { return values_; }

    /// Calls fn(lo, hi, value) for each constant piece intersecting [a, b].
    template <class Fn>
    void for_each_piece(double a, double b, Fn&& fn) const {
        const std::size_t n = values_.size();
        for (std::size_t k = 0; k < n; ++k) {
            const double left = k == 0 ? -INFINITY : breakpoints_[k];
            const double right = k + 1 == n ? INFINITY : breakpoints_[k + 1];
            const double lo = std::max(a, left);
            const double hi = std::min(b, right);
            if (hi > lo) fn(lo, hi, values_[k]);
        }
    }

   private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
    std::shared_ptr<const std::function<double(double)>> general_;
};

/// a(t, u) = int_t^u e^{beta (u - s)} f(s) ds.
inline double decayed_integral(const TimeFunction& f, double beta, double t, double u) {
    if (u < t) throw DomainError("decayed_integral requires t <= u");
    if (u == t) return 0.0;
    if (f.is_piecewise()) {
        double sum = 0.0;
        f.for_each_piece(t, u, [&](double lo, double hi, double v) {
            if (v != 0.0) sum += v * std::exp(beta * (u - hi)) * kernel_B(beta, hi - lo);
        });
        return sum;
    }
    return integrate_piecewise([&](double s) { return std::exp(beta * (u - s)) * f(s); }, t, u,
                               f.breakpoints());
}

/// A(t, T) = int_t^T a(t, u) du = int_t^T f(s) B(T - s) ds.
inline double growth_integral(const TimeFunction& f, double beta, double t, double T) {
    if (T < t) throw DomainError("growth_integral requires t <= T");
    if (T == t) return 0.0;
    if (f.is_piecewise()) {
        double sum = 0.0;
        f.for_each_piece(t, T, [&](double lo, double hi, double v) {
            if (v == 0.0) return;
            // int_{x0}^{x0+d} B(x) dx with x0 = T - hi, via B(x0 + y) = B(x0) + e^{beta x0} B(y)
            const double x0 = T - hi;
            const double d = hi - lo;
            sum += v * (kernel_B(beta, x0) * d + std::exp(beta * x0) * detail::integral_B(beta, d));
        });
        return sum;
    }
    return integrate_piecewise([&](double s) { return f(s) * kernel_B(beta, T - s); }, t, T,
                               f.breakpoints());
}

}  // namespace rfr
