#ifndef STURM_HEAT_NUMERICS_HPP
#define STURM_HEAT_NUMERICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sturm_heat/errors.hpp"

namespace sturm_heat {

/// Uniform grid on a closed interval [start, end].
class Grid {
public:
    Grid() = default;

    Grid(double start, double end, std::size_t count) : start_(start), end_(end), count_(count) {
        if (count < 3) {
            throw std::invalid_argument("Grid: at least 3 points required");
        }
        if (!(end > start) || !std::isfinite(start) || !std::isfinite(end)) {
            throw std::invalid_argument("Grid: interval must be finite and non-empty");
        }
        h_ = (end - start) / static_cast<double>(count - 1);
    }

    static Grid unit(std::size_t count) { return Grid(0.0, 1.0, count); }

    double start() const { return start_; }
    double end() const { return end_; }
    double spacing() const { return h_; }
    std::size_t size() const { return count_; }

    /// The last point is exactly `end` so both endpoints are represented without rounding.
    double operator[](std::size_t i) const {
        return i + 1 == count_ ? end_ : start_ + static_cast<double>(i) * h_;
    }

    std::vector<double> points() const {
        std::vector<double> out(count_);
        for (std::size_t i = 0; i < count_; ++i) out[i] = (*this)[i];
        return out;
    }

    bool operator==(const Grid& other) const {
        return count_ == other.count_ && start_ == other.start_ && end_ == other.end_;
    }

private:
    double start_ = 0.0;
    double end_ = 1.0;
    std::size_t count_ = 0;
    double h_ = 0.0;
};

/// Real samples on a Grid. All values are finite.
struct SampledFunction {
    Grid grid;
    std::vector<double> values;

    SampledFunction() = default;

    SampledFunction(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) {
            throw std::invalid_argument("SampledFunction: value count does not match grid");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i])) {
                std::ostringstream msg;
                msg << "SampledFunction: non-finite value at x=" << grid[i];
                throw std::invalid_argument(msg.str());
            }
        }
    }

    template <class F>
    static SampledFunction sample(const Grid& g, F&& f) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g[i]);
        return SampledFunction(g, std::move(v));
    }

    static SampledFunction constant(const Grid& g, double c) {
        return SampledFunction(g, std::vector<double>(g.size(), c));
    }

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

inline void require_same_grid(const SampledFunction& a, const SampledFunction& b, const char* where) {
    if (!(a.grid == b.grid)) {
        throw std::invalid_argument(std::string(where) + ": functions live on different grids");
    }
}

/// Weighted sum over the grid. Composite Simpson for an odd number of points,
/// composite trapezoid otherwise.
inline double integrate(std::span<const double> values, double h) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("integrate: non-finite integrand sample");
    }
    if (n % 2 == 1) {
        double odd = 0.0, even = 0.0;
        for (std::size_t i = 1; i + 1 < n; i += 2) odd += values[i];
        for (std::size_t i = 2; i + 1 < n; i += 2) even += values[i];
        return h / 3.0 * (values.front() + values.back() + 4.0 * odd + 2.0 * even);
    }
    double inner = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) inner += values[i];
    return h * (0.5 * (values.front() + values.back()) + inner);
}

inline double integrate(const SampledFunction& f) { return integrate(f.values, f.grid.spacing()); }

/// Quadrature weights matching integrate(), so that integrate(f) == sum w_i f_i.
inline std::vector<double> quadrature_weights(const Grid& g) {
    const std::size_t n = g.size();
    const double h = g.spacing();
    std::vector<double> w(n);
    if (n % 2 == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = (i == 0 || i + 1 == n) ? h / 3.0 : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) w[i] = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    }
    return w;
}

inline double inner_product(const SampledFunction& a, const SampledFunction& b) {
    require_same_grid(a, b, "inner_product");
    std::vector<double> prod(a.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = a[i] * b[i];
    return integrate(prod, a.grid.spacing());
}

inline double l2_norm(const SampledFunction& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double sup_norm(const SampledFunction& f) { return sup_norm(f.values); }

inline SampledFunction operator-(const SampledFunction& a, const SampledFunction& b) {
    require_same_grid(a, b, "subtract");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] - b[i];
    return SampledFunction(a.grid, std::move(v));
}

inline SampledFunction operator+(const SampledFunction& a, const SampledFunction& b) {
    require_same_grid(a, b, "add");
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + b[i];
    return SampledFunction(a.grid, std::move(v));
}

inline SampledFunction operator*(double s, const SampledFunction& a) {
    std::vector<double> v(a.values);
    for (double& x : v) x *= s;
    return SampledFunction(a.grid, std::move(v));
}

/// Running trapezoid integral F(x_i) = int_{x_0}^{x_i} f, F(x_0) = 0.
inline std::vector<double> cumulative_trapezoid(std::span<const double> values, double h) {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 1; i < values.size(); ++i) {
        out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
    }
    return out;
}

/// Running integral with fourth-order accurate cell contributions (cubic
/// interpolation through the four nearest samples of each cell).
inline std::vector<double> cumulative_integral(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    std::vector<double> out(n, 0.0);
    if (n < 4) return cumulative_trapezoid(f, h);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double cell;
        if (i == 0) {
            cell = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
        } else if (i + 2 == n) {
            cell = h / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]);
        } else {
            cell = h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
        }
        out[i + 1] = out[i] + cell;
    }
    return out;
}

/// Piecewise-linear interpolation of uniform samples; clamps outside the grid.
inline double interpolate_linear(const Grid& g, std::span<const double> v, double x) {
    if (x <= g.start()) return v.front();
    if (x >= g.end()) return v.back();
    const double s = (x - g.start()) / g.spacing();
    std::size_t i = static_cast<std::size_t>(s);
    if (i + 1 >= g.size()) i = g.size() - 2;
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * v[i] + w * v[i + 1];
}

/// Four-point Lagrange interpolation on uniform samples (fourth order for smooth data).
inline double interpolate_cubic(const Grid& g, std::span<const double> v, double x) {
    const std::size_t n = g.size();
    if (x <= g.start()) return v.front();
    if (x >= g.end()) return v.back();
    const double s = (x - g.start()) / g.spacing();
    std::size_t i = static_cast<std::size_t>(s);
    if (i + 1 >= n) i = n - 2;
    std::size_t base = i == 0 ? 0 : i - 1;
    if (base + 3 >= n) base = n - 4;
    const double t = s - static_cast<double>(base);
    const double f0 = v[base], f1 = v[base + 1], f2 = v[base + 2], f3 = v[base + 3];
    return -f0 * (t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0 + f1 * t * (t - 2.0) * (t - 3.0) / 2.0 -
           f2 * t * (t - 1.0) * (t - 3.0) / 2.0 + f3 * t * (t - 1.0) * (t - 2.0) / 6.0;
}

// ---------------------------------------------------------------------------
// Fixed-step RK4

template <std::size_t Dim>
using State = std::array<double, Dim>;

template <std::size_t Dim>
struct IvpResult {
    std::vector<State<Dim>> trajectory;
    /// Step-doubling estimate of the endpoint error (zero unless requested).
    double error_estimate = 0.0;
    bool within_tolerance = true;
};

namespace detail {

template <std::size_t Dim>
State<Dim> axpy(const State<Dim>& y, double a, const State<Dim>& k) {
    State<Dim> out;
    for (std::size_t d = 0; d < Dim; ++d) out[d] = y[d] + a * k[d];
    return out;
}

template <std::size_t Dim, class Rhs>
std::vector<State<Dim>> rk4_march(Rhs& rhs, const State<Dim>& y0, double x0, double step, std::size_t steps) {
    std::vector<State<Dim>> traj;
    traj.reserve(steps + 1);
    traj.push_back(y0);
    State<Dim> y = y0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double x = x0 + static_cast<double>(i) * step;
        const State<Dim> k1 = rhs(x, y);
        const State<Dim> k2 = rhs(x + 0.5 * step, axpy(y, 0.5 * step, k1));
        const State<Dim> k3 = rhs(x + 0.5 * step, axpy(y, 0.5 * step, k2));
        const State<Dim> k4 = rhs(x + step, axpy(y, step, k3));
        for (std::size_t d = 0; d < Dim; ++d) {
            y[d] += step / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            if (!std::isfinite(y[d])) {
                std::ostringstream msg;
                msg << "solve_ivp: non-finite state at x=" << x + step;
                throw SolverError(msg.str());
            }
        }
        traj.push_back(y);
    }
    return traj;
}

}  // namespace detail

/// Classical RK4 on the uniform grid x0, x0+step, ..., x1. `rhs(x, y)` returns y'.
/// With tolerance > 0 the run is repeated at twice the step and the endpoint
/// difference /15 is reported as the error estimate.
template <std::size_t Dim, class Rhs>
IvpResult<Dim> solve_ivp(Rhs&& rhs, const State<Dim>& y0, double x0, double x1, double step,
                         double tolerance = 0.0) {
    if (!(step > 0.0) || !(x1 > x0)) throw std::invalid_argument("solve_ivp: need step > 0 and x1 > x0");
    const double ratio = (x1 - x0) / step;
    const auto steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps == 0 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * ratio) {
        throw std::invalid_argument("solve_ivp: step must divide the span");
    }
    IvpResult<Dim> result;
    result.trajectory = detail::rk4_march<Dim>(rhs, y0, x0, step, steps);
    if (tolerance > 0.0 && steps % 2 == 0) {
        const auto coarse = detail::rk4_march<Dim>(rhs, y0, x0, 2.0 * step, steps / 2);
        double err = 0.0;
        for (std::size_t d = 0; d < Dim; ++d) {
            err = std::max(err, std::abs(coarse.back()[d] - result.trajectory.back()[d]) / 15.0);
        }
        result.error_estimate = err;
        result.within_tolerance = err <= tolerance;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Bracketed root finding

struct RootResult {
    double root;
    double residual;
    int iterations;
};

/// Illinois-modified false position inside [lo, hi], falling back to bisection
/// whenever an interpolated step does not at least halve the bracket over two
/// iterations. Stops when the bracket is narrower than `tolerance` or f hits 0.
template <class F>
RootResult find_root(F&& f, double lo, double hi, double tolerance, int max_iterations = 200) {
    if (!(hi > lo)) throw std::invalid_argument("find_root: empty bracket");
    double f_lo = f(lo);
    double f_hi = f(hi);
    if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) {
        throw SolverError("find_root: non-finite function value at bracket end");
    }
    if (f_lo == 0.0) return {lo, 0.0, 0};
    if (f_hi == 0.0) return {hi, 0.0, 0};
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw BracketError("find_root: no sign change on bracket", lo, hi, f_lo, f_hi);
    }
    int side = 0;  // end retained by the previous step (-1 lo, +1 hi)
    double reference_width = hi - lo;
    int interpolated = 0;
    int it = 0;
    for (; it < max_iterations && hi - lo > tolerance; ++it) {
        if (interpolated == 2) {
            if (hi - lo <= 0.5 * reference_width) {
                reference_width = hi - lo;
                interpolated = 0;
            }
        }
        const bool bisect = interpolated == 2;
        double x = 0.5 * (lo + hi);
        if (!bisect) {
            const double trial = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if (trial > lo && trial < hi) x = trial;
            ++interpolated;
        }
        const double fx = f(x);
        if (!std::isfinite(fx)) throw SolverError("find_root: non-finite function value inside bracket");
        if (fx == 0.0) return {x, 0.0, it + 1};
        if ((fx > 0.0) == (f_hi > 0.0)) {
            hi = x;
            f_hi = fx;
            if (side == -1) f_lo *= 0.5;
            side = -1;
        } else {
            lo = x;
            f_lo = fx;
            if (side == +1) f_hi *= 0.5;
            side = +1;
        }
        if (bisect) {
            reference_width = hi - lo;
            interpolated = 0;
            side = 0;
        }
    }
    const double root = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
    return {root, std::min(std::abs(f_lo), std::abs(f_hi)), it};
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussLegendre gauss_legendre(std::size_t n) {
    GaussLegendre rule{std::vector<double>(n), std::vector<double>(n)};
    const double pi = std::acos(-1.0);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

/// Composite Gauss-Legendre integral of f over [a, b] with `panels` equal panels.
template <class F>
double integrate_gauss(F&& f, double a, double b, const GaussLegendre& rule, std::size_t panels) {
    if (!(b > a)) return 0.0;
    const double width = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = a + (static_cast<double>(p) + 0.5) * width;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            total += rule.weights[k] * f(mid + 0.5 * width * rule.nodes[k]);
        }
    }
    return 0.5 * width * total;
}

// ---------------------------------------------------------------------------
// Linear algebra helpers

/// Thomas algorithm for a tridiagonal system; sub[0] and super[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                             std::span<const double> super, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n), d(n);
    double denom = diag[0];
    if (denom == 0.0) throw SolverError("solve_tridiagonal: zero pivot");
    c[0] = n > 1 ? super[0] / denom : 0.0;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = diag[i] - sub[i] * c[i - 1];
        if (denom == 0.0 || !std::isfinite(denom)) throw SolverError("solve_tridiagonal: singular system");
        c[i] = i + 1 < n ? super[i] / denom : 0.0;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

/// Least-squares line y = intercept + slope * x.
struct LineFit {
    double slope;
    double intercept;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    const double slope = (n * sxy - sx * sy) / denom;
    return {slope, (sy - slope * sx) / n};
}

}  // namespace sturm_heat

#endif
