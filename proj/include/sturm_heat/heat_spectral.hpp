#ifndef STURM_HEAT_HEAT_SPECTRAL_HPP
#define STURM_HEAT_HEAT_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sturm_heat/errors.hpp"
#include "sturm_heat/numerics.hpp"
#include "sturm_heat/regularization.hpp"
#include "sturm_heat/sturm_liouville.hpp"

namespace sturm_heat {

/// a(t) on the time grid [0, T] with its running integral A(t).
struct TimeCoefficient {
    SampledFunction a;
    double a_floor = 0.0;
    SampledFunction A;

    const Grid& grid() const { return a.grid; }
    double horizon() const { return a.grid.end(); }
    double a_at(double t) const { return interpolate_linear(a.grid, a.values, t); }
    double A_at(double t) const { return interpolate_linear(A.grid, A.values, t); }
};

inline TimeCoefficient accumulate(const SampledFunction& a, double a_floor) {
    if (!(a_floor > 0.0)) throw ConfigError("a_floor must be positive");
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (a[i] < a_floor * (1.0 - 1e-12)) {  // quadrature round-off of a mollified constant
            std::ostringstream msg;
            msg << "a(t) = " << a[i] << " drops below a_floor = " << a_floor << " at t = " << a.grid[i];
            throw ConfigError(msg.str());
        }
    }
    SampledFunction A(a.grid, cumulative_trapezoid(a.values, a.grid.spacing()));
    return {a, a_floor, std::move(A)};
}

inline TimeCoefficient constant_coefficient(double value, double horizon, std::size_t points) {
    return accumulate(SampledFunction::constant(Grid(0.0, horizon, points), value), value);
}

/// f(t, x); an empty function means f == 0.
using Source = std::function<double(double, double)>;

struct Projection {
    std::vector<double> coefficients;
    double tail = 0.0;  // ||u0||^2 - sum c_n^2
};

inline Projection project(const SampledFunction& u0, const std::vector<EigenPair>& pairs) {
    Projection p;
    for (const auto& pair : pairs) {
        require_same_grid(u0, pair.phi, "project");
        p.coefficients.push_back(inner_product(u0, pair.phi));
    }
    double s = 0.0;
    for (double c : p.coefficients) s += c * c;
    p.tail = inner_product(u0, u0) - s;
    return p;
}

struct SpectralSolution {
    std::shared_ptr<const std::vector<EigenPair>> pairs;
    SampledFunction q;
    SampledFunction nu;
    std::vector<SampledFunction> dphi;  // phi_n'
    std::vector<double> B;
    double tail = 0.0;
    TimeCoefficient time_coeff;
    Source source;
    std::vector<std::vector<double>> f_coeffs;  // [mode][time node], empty when f == 0
    std::vector<std::vector<double>> duhamel;   // Duhamel integral from 0 at each node
    double origin = 0.0;                        // restarted problems start here

    const Grid& grid() const { return q.grid; }
    std::size_t modes() const { return B.size(); }
    double horizon() const { return time_coeff.horizon(); }
    bool has_source() const { return !f_coeffs.empty(); }
    std::vector<double> lambdas() const {
        std::vector<double> l;
        for (const auto& p : *pairs) l.push_back(p.lambda);
        return l;
    }
};

namespace detail {

/// Integral over a cell of length d of exp(-mu tau) (f_end + (f_start - f_end) tau/d), tau = distance
/// to the cell end. Exact for f and A linear on the cell.
inline double exp_weighted_cell(double mu, double d, double f_start, double f_end) {
    const double x = mu * d;
    double e0, e1;
    if (std::abs(x) < 1e-3) {
        e0 = d * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        e1 = d * d * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
    } else {
        const double em = std::exp(-x);
        e0 = -std::expm1(-x) / mu;
        e1 = (-std::expm1(-x) - x * em) / (mu * mu);
    }
    return f_end * e0 + (f_start - f_end) * e1 / d;
}

inline void check_time(const SpectralSolution& sol, double t) {
    if (!(t >= sol.origin - 1e-12 && t <= sol.horizon() + 1e-12)) {
        std::ostringstream msg;
        msg << "time " << t << " outside [" << sol.origin << ", " << sol.horizon() << "]";
        throw std::invalid_argument(msg.str());
    }
}

/// Duhamel integral from 0 to t for one mode.
inline double duhamel_at(const SpectralSolution& sol, std::size_t n, double t) {
    const Grid& tg = sol.time_coeff.grid();
    const double lambda = (*sol.pairs)[n].lambda;
    const double dt = tg.spacing();
    const std::size_t j = std::min(tg.size() - 2, static_cast<std::size_t>(std::max(0.0, (t - tg.start()) / dt)));
    const double tj = tg[j];
    const double d = t - tj;
    if (d <= 0.0) return sol.duhamel[n][j];
    const auto& f = sol.f_coeffs[n];
    const double A_j = sol.time_coeff.A[j];
    const double A_t = sol.time_coeff.A_at(t);
    const double f_t = f[j] + (f[j + 1] - f[j]) * d / dt;
    const double mu = lambda * (A_t - A_j) / d;
    return std::exp(-lambda * (A_t - A_j)) * sol.duhamel[n][j] + exp_weighted_cell(mu, d, f[j], f_t);
}

inline std::vector<double> source_coefficients_at(const SpectralSolution& sol, double t) {
    std::vector<double> out(sol.modes(), 0.0);
    if (!sol.has_source()) return out;
    const Grid& tg = sol.time_coeff.grid();
    for (std::size_t n = 0; n < sol.modes(); ++n) out[n] = interpolate_linear(tg, sol.f_coeffs[n], t);
    return out;
}

}  // namespace detail

/// Builds the truncated series solution on precomputed eigenpairs.
inline SpectralSolution assemble(std::shared_ptr<const std::vector<EigenPair>> pairs, const RegularizedPotential& pot,
                                 TimeCoefficient time_coeff, const SampledFunction& u0, const Source& f = {}) {
    if (!pairs || pairs->empty()) throw std::invalid_argument("assemble: no eigenpairs");
    SpectralSolution sol;
    sol.pairs = std::move(pairs);
    sol.q = pot.q;
    sol.nu = pot.nu;
    sol.time_coeff = std::move(time_coeff);
    Projection p = project(u0, *sol.pairs);
    sol.B = std::move(p.coefficients);
    sol.tail = p.tail;
    for (const auto& pair : *sol.pairs) sol.dphi.push_back(eigenfunction_derivative(pair, pot.nu));

    if (f) {
        sol.source = f;
        const Grid& tg = sol.time_coeff.grid();
        const Grid& g = sol.grid();
        const std::vector<double> w = quadrature_weights(g);
        const std::size_t N = sol.modes();
        sol.f_coeffs.assign(N, std::vector<double>(tg.size()));
        std::vector<double> fx(g.size());
        for (std::size_t j = 0; j < tg.size(); ++j) {
            for (std::size_t i = 0; i < g.size(); ++i) fx[i] = f(tg[j], g[i]) * w[i];
            for (std::size_t n = 0; n < N; ++n) {
                const auto& phi = (*sol.pairs)[n].phi.values;
                double s = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) s += fx[i] * phi[i];
                sol.f_coeffs[n][j] = s;
            }
        }
        sol.duhamel.assign(N, std::vector<double>(tg.size(), 0.0));
        const auto& A = sol.time_coeff.A.values;
        const double dt = tg.spacing();
        for (std::size_t n = 0; n < N; ++n) {
            const double lambda = (*sol.pairs)[n].lambda;
            auto& D = sol.duhamel[n];
            const auto& fn = sol.f_coeffs[n];
            for (std::size_t j = 0; j + 1 < tg.size(); ++j) {
                const double dA = A[j + 1] - A[j];
                D[j + 1] = std::exp(-lambda * dA) * D[j] + detail::exp_weighted_cell(lambda * dA / dt, dt, fn[j], fn[j + 1]);
            }
        }
    }
    return sol;
}

inline SpectralSolution assemble(const RegularizedPotential& pot, TimeCoefficient time_coeff,
                                 const SampledFunction& u0, int n_max, const Source& f = {}, int threads = 1) {
    require_same_grid(pot.q, u0, "assemble");
    auto pairs = std::make_shared<const std::vector<EigenPair>>(compute_spectrum(pot.nu, n_max, threads));
    return assemble(std::move(pairs), pot, std::move(time_coeff), u0, f);
}

/// Mode amplitudes u_n(t), including the Duhamel term when a source is present.
inline std::vector<double> mode_amplitudes(const SpectralSolution& sol, double t, bool with_source = true) {
    detail::check_time(sol, t);
    t = std::clamp(t, sol.origin, sol.horizon());
    const double shift = sol.time_coeff.A_at(t) - sol.time_coeff.A_at(sol.origin);
    std::vector<double> u(sol.modes());
    for (std::size_t n = 0; n < sol.modes(); ++n) {
        const double decay = std::exp(-(*sol.pairs)[n].lambda * shift);
        u[n] = sol.B[n] * decay;
        if (with_source && sol.has_source()) {
            double d = detail::duhamel_at(sol, n, t);
            if (sol.origin > 0.0) d -= decay * detail::duhamel_at(sol, n, sol.origin);
            u[n] += d;
        }
    }
    return u;
}

/// sum_n c_n g_n for basis functions g_n on one grid.
inline SampledFunction synthesize(const std::vector<double>& c, const std::vector<SampledFunction>& basis) {
    std::vector<double> v(basis.front().values.size(), 0.0);
    for (std::size_t n = 0; n < c.size(); ++n) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += c[n] * basis[n][i];
    }
    return SampledFunction(basis.front().grid, std::move(v));
}

inline std::vector<SampledFunction> eigenfunctions(const SpectralSolution& sol) {
    std::vector<SampledFunction> out;
    for (const auto& p : *sol.pairs) out.push_back(p.phi);
    return out;
}

inline SampledFunction evolve_homogeneous(const SpectralSolution& sol, double t) {
    return synthesize(mode_amplitudes(sol, t, false), eigenfunctions(sol));
}

inline SampledFunction evolve_nonhomogeneous(const SpectralSolution& sol, double t) {
    if (!sol.has_source()) throw std::invalid_argument("evolve_nonhomogeneous: no source coefficients");
    return synthesize(mode_amplitudes(sol, t), eigenfunctions(sol));
}

inline SampledFunction evolve(const SpectralSolution& sol, double t) {
    return synthesize(mode_amplitudes(sol, t), eigenfunctions(sol));
}

/// Coefficients of d/dt u in the eigenbasis: -a(t) lambda_n u_n + f_n(t).
inline std::vector<double> time_derivative_coefficients(const SpectralSolution& sol, double t) {
    std::vector<double> u = mode_amplitudes(sol, t);
    const std::vector<double> fc = detail::source_coefficients_at(sol, t);
    const double a = sol.time_coeff.a_at(t);
    for (std::size_t n = 0; n < u.size(); ++n) u[n] = -a * (*sol.pairs)[n].lambda * u[n] + fc[n];
    return u;
}

inline SampledFunction time_derivative(const SpectralSolution& sol, double t) {
    return synthesize(time_derivative_coefficients(sol, t), eigenfunctions(sol));
}

/// d/dx u via phi_n' = quasi-derivative / ||phi_tilde|| + nu phi_n.
inline SampledFunction space_derivative(const SpectralSolution& sol, double t) {
    return synthesize(mode_amplitudes(sol, t), sol.dphi);
}

/// (q - lambda_n) phi_n, the second derivatives of the eigenfunctions.
inline std::vector<SampledFunction> second_derivative_basis(const SpectralSolution& sol) {
    std::vector<SampledFunction> out;
    for (const auto& p : *sol.pairs) {
        std::vector<double> v(p.phi.values.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (sol.q[i] - p.lambda) * p.phi[i];
        out.emplace_back(p.phi.grid, std::move(v));
    }
    return out;
}

inline SampledFunction second_space_derivative(const SpectralSolution& sol, double t) {
    return synthesize(mode_amplitudes(sol, t), second_derivative_basis(sol));
}

/// (sum lambda_n^k c_n^2)^(1/2).
inline double sobolev_norm(const std::vector<double>& coeffs, const std::vector<double>& lambdas, double k) {
    if (coeffs.size() > lambdas.size()) throw std::invalid_argument("sobolev_norm: more coefficients than eigenvalues");
    const bool integer_k = k == std::floor(k) && k >= 0.0;
    double s = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
        if (!integer_k && !(lambdas[n] > 0.0)) {
            throw std::invalid_argument("sobolev_norm: fractional power of a non-positive eigenvalue");
        }
        s += std::pow(lambdas[n], k) * coeffs[n] * coeffs[n];
    }
    return std::sqrt(std::max(0.0, s));
}

using GramMatrix = std::vector<std::vector<double>>;

inline GramMatrix gram_of(const std::vector<SampledFunction>& basis) {
    const std::size_t N = basis.size();
    GramMatrix G(N, std::vector<double>(N));
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = i; j < N; ++j) G[i][j] = G[j][i] = inner_product(basis[i], basis[j]);
    }
    return G;
}

/// ||sum c_n g_n|| from the Gram matrix of the g_n.
inline double quadratic_norm(const GramMatrix& G, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) row += G[i][j] * c[j];
        s += c[i] * row;
    }
    return std::sqrt(std::max(0.0, s));
}

/// Restarted problem: project u(t1) back onto the eigenbasis and evolve with A(t) - A(t1).
inline SpectralSolution restart(const SpectralSolution& sol, double t1) {
    SpectralSolution next = sol;
    const Projection p = project(evolve(sol, t1), *sol.pairs);
    next.B = p.coefficients;
    next.tail = p.tail;
    next.origin = t1;
    return next;
}

struct ResidualCheck {
    double t = 0.0;
    double residual = 0.0;
    double bound = 0.0;
    bool pass = false;
};

/// ||d/dt u + a(t)(-u_xx + q u) - f|| with u_xx by centred differences on the interior.
inline ResidualCheck pde_residual(const SpectralSolution& sol, double t) {
    const SampledFunction u = evolve(sol, t);
    const SampledFunction ut = time_derivative(sol, t);
    const Grid& g = sol.grid();
    const double h = g.spacing();
    const double a = sol.time_coeff.a_at(t);
    std::vector<double> r(g.size(), 0.0);
    std::vector<double> fx(g.size(), 0.0);
    if (sol.has_source()) fx = synthesize(detail::source_coefficients_at(sol, t), eigenfunctions(sol)).values;
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        const double uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
        r[i] = ut[i] + a * (-uxx + sol.q[i] * u[i]) - fx[i];
    }
    ResidualCheck c;
    c.t = t;
    c.residual = l2_norm(SampledFunction(g, std::move(r)));
    const double lmax = sol.pairs->back().lambda;
    c.bound = 100.0 * (h * h * lmax * lmax + std::max(0.0, sol.tail));
    c.pass = std::isfinite(c.residual) && c.residual <= c.bound;
    return c;
}

/// Theta = 1/2 implicit stepping of u_t = -a(t)(-u_xx + q u) + f with Dirichlet ends.
inline std::vector<SampledFunction> crank_nicolson_oracle(const SampledFunction& q, const TimeCoefficient& time_coeff,
                                                          const SampledFunction& u0, const Source& f,
                                                          const std::vector<double>& t_out, double dt = 1e-4) {
    require_same_grid(q, u0, "crank_nicolson_oracle");
    if (!(dt > 0.0)) throw std::invalid_argument("crank_nicolson_oracle: dt must be positive");
    if (!std::is_sorted(t_out.begin(), t_out.end())) throw std::invalid_argument("crank_nicolson_oracle: unsorted times");
    const Grid& g = q.grid;
    const std::size_t m = g.size() - 2;
    const double h = g.spacing();
    const double inv_h2 = 1.0 / (h * h);
    std::vector<double> u(u0.values.begin() + 1, u0.values.end() - 1);
    std::vector<double> sub(m), diag(m), sup(m), rhs(m), f_now(m, 0.0), f_next(m, 0.0);

    auto sample_source = [&](double t, std::vector<double>& out) {
        if (!f) return;
        for (std::size_t i = 0; i < m; ++i) out[i] = f(t, g[i + 1]);
    };
    auto apply_L = [&](const std::vector<double>& v, std::size_t i) {
        const double left = i > 0 ? v[i - 1] : 0.0;
        const double right = i + 1 < m ? v[i + 1] : 0.0;
        return (2.0 * v[i] - left - right) * inv_h2 + q[i + 1] * v[i];
    };
    auto pack = [&](const std::vector<double>& v) {
        std::vector<double> full(g.size(), 0.0);
        std::copy(v.begin(), v.end(), full.begin() + 1);
        return SampledFunction(g, std::move(full));
    };

    std::vector<SampledFunction> out;
    double t = 0.0;
    sample_source(t, f_now);
    for (double target : t_out) {
        if (target < 0.0 || target > time_coeff.horizon() + 1e-12) {
            throw std::invalid_argument("crank_nicolson_oracle: output time outside [0, T]");
        }
        const double span = target - t;
        const auto steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
        const double k = steps > 0 ? span / static_cast<double>(steps) : 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const double t_next = t + k;
            const double a0 = time_coeff.a_at(t), a1 = time_coeff.a_at(std::min(t_next, time_coeff.horizon()));
            sample_source(t_next, f_next);
            for (std::size_t i = 0; i < m; ++i) {
                rhs[i] = u[i] - 0.5 * k * a0 * apply_L(u, i) + 0.5 * k * (f_now[i] + f_next[i]);
                diag[i] = 1.0 + 0.5 * k * a1 * (2.0 * inv_h2 + q[i + 1]);
                sub[i] = sup[i] = -0.5 * k * a1 * inv_h2;
            }
            u = solve_tridiagonal(sub, diag, sup, rhs);
            for (double v : u) {
                if (!std::isfinite(v)) throw SolverError("crank_nicolson_oracle: non-finite state");
            }
            std::swap(f_now, f_next);
            t = t_next;
        }
        t = target;
        out.push_back(pack(u));
    }
    return out;
}

}  // namespace sturm_heat

#endif
