#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <queue>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rfr/errors.hpp"

namespace rfr {

/// Below this |beta * tau| the growth kernel switches to its Taylor series.
inline constexpr double kGrowthSeriesThreshold = 1e-4;

/// B(tau) = (e^{beta tau} - 1) / beta, with the removable singularity at
/// beta = 0 handled by a truncated series.
inline double kernel_B(double beta, double tau) {
    const double x = beta * tau;
    if (std::abs(x) < kGrowthSeriesThreshold) {
        return tau * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0 * (1.0 + x / 5.0))));
    }
    return std::expm1(x) / beta;
}

namespace detail {

// Series switch for the integrated kernels below; both branches are
// accurate to a few ulp at the switch.
inline constexpr double kIntegralSeriesThreshold = 0.5;

// C(tau) = int_0^tau B(y) dy = (e^{x} - 1 - x) / beta^2.
inline double integral_B(double beta, double tau) {
    const double x = beta * tau;
    if (std::abs(x) < kIntegralSeriesThreshold) {
        // tau^2 * sum_n x^n / (n + 2)!
        double term = 0.5;
        double sum = term;
        for (int n = 1; n < 40; ++n) {
            term *= x / static_cast<double>(n + 2);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return tau * tau * sum;
    }
    return (std::expm1(x) - x) / (beta * beta);
}

// D(tau) = int_0^tau B(y)^2 dy.
inline double integral_B_squared(double beta, double tau) {
    const double x = beta * tau;
    if (std::abs(x) < kIntegralSeriesThreshold) {
        // tau^3 * sum_n 2 (2^{n+1} - 1) x^n / (n + 3)!
        double xpow_over_fact = 1.0 / 6.0;  // x^n / (n+3)!
        double two_pow = 2.0;               // 2^{n+1}
        double sum = 2.0 * (two_pow - 1.0) * xpow_over_fact;
        for (int n = 1; n < 60; ++n) {
            xpow_over_fact *= x / static_cast<double>(n + 3);
            two_pow *= 2.0;
            const double term = 2.0 * (two_pow - 1.0) * xpow_over_fact;
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return tau * tau * tau * sum;
    }
    return 2.0 * (integral_B(2.0 * beta, tau) - integral_B(beta, tau)) / beta;
}

// E(tau) = int_0^tau e^{beta y} B(y) dy.
inline double integral_expB(double beta, double tau) {
    return 2.0 * integral_B(2.0 * beta, tau) - integral_B(beta, tau);
}

}  // namespace detail

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Target absolute accuracy of every adaptive quadrature in the library.
inline constexpr double kQuadratureTolerance = 1e-10;

namespace detail {

// Globally adaptive Gauss-Kronrod: keeps bisecting the piece with the largest
// error estimate until the total is within tolerance, every piece is at its
// rounding floor, or the piece budget is spent.
inline double adaptive_gk(const std::function<double(double)>& f, double a, double b, double tol,
                          double& error) {
    struct Piece {
        double lo, hi, value, err, floor;
        bool operator<(const Piece& o) const { return err - floor < o.err - o.floor; }
    };
    auto eval = [&](double lo, double hi) {
        Piece p{lo, hi, 0.0, 0.0, 0.0};
        double l1 = 0.0;
        p.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0.0, &p.err, &l1);
        p.floor = 1e-14 * l1;
        return p;
    };
    std::priority_queue<Piece> queue;
    queue.push(eval(a, b));
    double total_err = queue.top().err;
    double total_floor = queue.top().floor;
    constexpr int kMaxPieces = 2000;
    for (int pieces = 1; pieces < kMaxPieces; ++pieces) {
        if (total_err <= tol || total_err <= total_floor) break;
        const Piece worst = queue.top();
        if (worst.err <= worst.floor) break;
        queue.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {
            queue.push(worst);
            break;
        }
        const Piece left = eval(worst.lo, mid);
        const Piece right = eval(mid, worst.hi);
        total_err += left.err + right.err - worst.err;
        total_floor += left.floor + right.floor - worst.floor;
        queue.push(left);
        queue.push(right);
    }
    double value = 0.0;
    error = 0.0;
    while (!queue.empty()) {
        value += queue.top().value;
        error += queue.top().err;
        queue.pop();
    }
    return value;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integral of f over [a, b]; throws NumericalError
/// when the accumulated error estimate exceeds `abs_tol` (plus rounding).
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double abs_tol = kQuadratureTolerance) {
    if (b == a) return 0.0;
    double error = 0.0;
    const double value = detail::adaptive_gk(f, a, b, abs_tol, error);
    if (!std::isfinite(value) || error > abs_tol + 1e-13 * std::abs(value)) {
        std::ostringstream msg;
        msg << "quadrature on [" << a << ", " << b << "] did not converge, error estimate "
            << error;
        throw NumericalError(msg.str(), error);
    }
    return value;
}

/// As `integrate`, but splits [a, b] at the given interior points, which
/// should contain every kink or discontinuity of f.
inline double integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                                  const std::vector<double>& cuts,
                                  double abs_tol = kQuadratureTolerance) {
    double total = 0.0;
    double lo = a;
    for (double c : cuts) {
        if (c <= lo || c >= b) continue;
        total += integrate(f, lo, c, abs_tol);
        lo = c;
    }
    total += integrate(f, lo, b, abs_tol);
    return total;
}

/// Gauss-Hermite rule for int e^{-x^2} f(x) dx (physicists' weight), from
/// the eigen-decomposition of the Jacobi matrix (Golub-Welsch).
class GaussHermiteRule {
   public:
    explicit GaussHermiteRule(int n) {
        if (n < 1) throw DomainError("Gauss-Hermite rule needs at least one node");
        const auto m = static_cast<Eigen::Index>(n);
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd sub(std::max<Eigen::Index>(m - 1, 0));
        for (Eigen::Index k = 0; k + 1 < m; ++k) sub[k] = std::sqrt(0.5 * static_cast<double>(k + 1));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        if (solver.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigen-decomposition failed", 0.0);
        nodes_.resize(static_cast<std::size_t>(n));
        weights_.resize(nodes_.size());
        const double mu0 = std::sqrt(std::numbers::pi);
        for (Eigen::Index k = 0; k < m; ++k) {
            const double v = solver.eigenvectors()(0, k);
            nodes_[static_cast<std::size_t>(k)] = solver.eigenvalues()[k];
            weights_[static_cast<std::size_t>(k)] = mu0 * v * v;
        }
        // enforce the exact symmetry of the rule
        for (std::size_t i = 0, j = nodes_.size() - 1; i < j; ++i, --j) {
            const double x = 0.5 * (nodes_[j] - nodes_[i]);
            const double w = 0.5 * (weights_[i] + weights_[j]);
            nodes_[i] = -x;
            nodes_[j] = x;
            weights_[i] = weights_[j] = w;
        }
        if (n % 2 == 1) nodes_[nodes_.size() / 2] = 0.0;
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    /// E[g(Z)] for Z ~ N(mean, sd^2).
    template <class F>
    double expectation(F&& g, double mean, double sd) const {
        double sum = 0.0;
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            sum += weights_[k] * g(mean + std::numbers::sqrt2 * sd * nodes_[k]);
        }
        return sum / std::sqrt(std::numbers::pi);
    }

   private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Shared, lazily built rule with n nodes; safe to call from several threads.
inline const GaussHermiteRule& gauss_hermite_rule(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussHermiteRule>(n);
    return *slot;
}

template <std::size_t N>
using Matrix = std::array<std::array<double, N>, N>;

/// Lower Cholesky factor of a symmetric positive-semidefinite matrix.
/// A pivot below `clamp` times its own diagonal entry is treated as zero,
/// which zeroes the corresponding column; a clearly negative one throws.
template <std::size_t N>
Matrix<N> cholesky_psd(const Matrix<N>& a, double clamp = 1e-12) {
    Matrix<N> l{};
    for (std::size_t j = 0; j < N; ++j) {
        if (a[j][j] < 0.0) throw NumericalError("matrix has a negative diagonal entry", a[j][j]);
        double d = a[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
        if (d < -1e-8 * a[j][j]) throw NumericalError("matrix is not positive semidefinite", d);
        if (d <= clamp * a[j][j]) continue;
        const double ljj = std::sqrt(d);
        l[j][j] = ljj;
        for (std::size_t i = j + 1; i < N; ++i) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            l[i][j] = s / ljj;
        }
    }
    return l;
}

}  // namespace rfr
