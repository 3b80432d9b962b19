#ifndef STURM_HEAT_STURM_LIOUVILLE_HPP
#define STURM_HEAT_STURM_LIOUVILLE_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>
#include <vector>

#include "sturm_heat/errors.hpp"
#include "sturm_heat/numerics.hpp"

namespace sturm_heat {

/// Smallest spectral parameter accepted by the phase equation (guards lambda^-1/2).
inline constexpr double kLambdaMin = 0.25;

/// Phase/amplitude pair of the modified Pruefer substitution
/// y = r sin(theta), y^[1] = sqrt(lambda) r cos(theta), with y^[1] = y' - nu y.
struct PruferTrajectory {
    double lambda = 0.0;
    SampledFunction theta;
    SampledFunction r;
    SampledFunction eta;  // theta - sqrt(lambda) x
};

struct EigenPair {
    int index = 0;
    double lambda = 0.0;
    SampledFunction phi;  // L2-normalized
    double phi_tilde_norm = 0.0;
    /// y^[1] = sqrt(lambda) r cos(theta) of the unnormalized eigenfunction.
    SampledFunction quasi_derivative;
    PruferTrajectory trajectory;
};

/// Phase equation theta' = sqrt(l) + nu^2 sin^2(theta)/sqrt(l) + nu sin(2 theta) for a
/// fixed sampled nu. Midpoint values of nu are interpolated once (cubic) so RK4
/// keeps fourth order on the sample grid.
class PruferSystem {
public:
    explicit PruferSystem(SampledFunction nu) : nu_(std::move(nu)) {
        const Grid& g = nu_.grid;
        mid_.resize(g.size() - 1);
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            mid_[i] = interpolate_cubic(g, nu_.values, g[i] + 0.5 * g.spacing());
        }
    }

    const SampledFunction& nu() const { return nu_; }
    const Grid& grid() const { return nu_.grid; }

    /// theta(1, lambda) without storing the trajectory.
    double theta_end(double lambda) const {
        check_lambda(lambda);
        double theta = 0.0;
        march(lambda, [&](std::size_t, double th) { theta = th; });
        return theta;
    }

    PruferTrajectory trajectory(double lambda) const {
        check_lambda(lambda);
        const Grid& g = grid();
        std::vector<double> theta(g.size());
        march(lambda, [&](std::size_t i, double th) { theta[i] = th; });

        // r from the closed-form exponential of running integrals along theta.
        const double root = std::sqrt(lambda);
        std::vector<double> integrand(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = nu_[i];
            integrand[i] = v * std::cos(2.0 * theta[i]) + 0.5 / root * v * v * std::sin(2.0 * theta[i]);
        }
        const std::vector<double> exponent = cumulative_integral(integrand, g.spacing());
        std::vector<double> r(g.size()), eta(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            r[i] = std::exp(-exponent[i]);
            eta[i] = theta[i] - root * g[i];
        }
        r[0] = 1.0;
        return {lambda, SampledFunction(g, std::move(theta)), SampledFunction(g, std::move(r)),
                SampledFunction(g, std::move(eta))};
    }

private:
    static void check_lambda(double lambda) {
        if (!(lambda >= kLambdaMin)) {
            std::ostringstream msg;
            msg << "Pruefer phase equation: lambda=" << lambda << " below lambda_min=" << kLambdaMin;
            throw std::invalid_argument(msg.str());
        }
    }

    template <class Sink>
    void march(double lambda, Sink&& sink) const {
        const Grid& g = grid();
        const double h = g.spacing();
        const double root = std::sqrt(lambda);
        const double inv_root = 1.0 / root;
        auto rhs = [&](double v, double th) {
            const double s = std::sin(th);
            const double c = std::cos(th);
            return root + inv_root * v * v * s * s + 2.0 * v * s * c;
        };
        double theta = 0.0;
        sink(0, theta);
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            const double v0 = nu_[i], vm = mid_[i], v1 = nu_[i + 1];
            const double k1 = rhs(v0, theta);
            const double k2 = rhs(vm, theta + 0.5 * h * k1);
            const double k3 = rhs(vm, theta + 0.5 * h * k2);
            const double k4 = rhs(v1, theta + h * k3);
            theta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!std::isfinite(theta)) {
                std::ostringstream msg;
                msg << "Pruefer phase blew up at x=" << g[i + 1] << " for lambda=" << lambda;
                throw SolverError(msg.str());
            }
            sink(i + 1, theta);
        }
    }

    SampledFunction nu_;
    std::vector<double> mid_;
};

inline PruferTrajectory integrate_prufer(const SampledFunction& nu, double lambda) {
    return PruferSystem(nu).trajectory(lambda);
}

/// Default half-width of the initial shooting bracket around (pi n)^2.
inline double default_bracket_width(const SampledFunction& nu, int n) {
    return std::max(20.0, 4.0 * sup_norm(nu) * std::numbers::pi * n);
}

/// lambda_n with theta(1, lambda_n) = pi n. The bracket starts centred at
/// (pi n)^2 and doubles (at most 10 times) until theta(1,.) - pi n changes sign.
inline double shoot_eigenvalue(const PruferSystem& system, int n, double bracket_width = 0.0) {
    if (n < 1) throw std::invalid_argument("shoot_eigenvalue: n must be >= 1");
    const double target = std::numbers::pi * n;
    const double centre = target * target;
    double width = bracket_width > 0.0 ? bracket_width : default_bracket_width(system.nu(), n);
    std::vector<std::pair<double, double>> samples;
    auto g = [&](double lambda) {
        const double th = system.theta_end(lambda);
        samples.emplace_back(lambda, th);
        return th - target;
    };
    for (int doubling = 0; doubling <= 10; ++doubling) {
        const double lo = std::max(kLambdaMin, centre - width);
        const double hi = centre + width;
        const double g_lo = g(lo);
        const double g_hi = g(hi);
        if (g_lo > 0.0 && lo == kLambdaMin) {
            std::ostringstream msg;
            msg << "eigenvalue " << n << " lies below lambda_min=" << kLambdaMin
                << " (potential too negative for the phase equation)";
            throw ShootingError(msg.str(), samples);
        }
        if (g_lo <= 0.0 && g_hi >= 0.0) {
            const auto root = find_root(g, lo, hi, 1e-12 * centre);
            return root.root;
        }
        width *= 2.0;
    }
    std::ostringstream msg;
    msg << "shooting for eigenvalue " << n << " failed after 10 bracket doublings";
    throw ShootingError(msg.str(), samples);
}

inline double shoot_eigenvalue(const SampledFunction& nu, int n, double bracket_width = 0.0) {
    return shoot_eigenvalue(PruferSystem(nu), n, bracket_width);
}

inline EigenPair build_eigenpair(const PruferSystem& system, int n, double bracket_width = 0.0) {
    const double lambda = shoot_eigenvalue(system, n, bracket_width);
    PruferTrajectory traj = system.trajectory(lambda);
    const Grid& g = system.grid();
    const double root = std::sqrt(lambda);
    std::vector<double> tilde(g.size()), quasi(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        tilde[i] = traj.r[i] * std::sin(traj.theta[i]);
        quasi[i] = root * traj.r[i] * std::cos(traj.theta[i]);
    }
    SampledFunction phi_tilde(g, std::move(tilde));
    const double norm = l2_norm(phi_tilde);
    if (!(norm > 0.0)) throw SolverError("build_eigenpair: eigenfunction has zero norm");
    EigenPair pair;
    pair.index = n;
    pair.lambda = lambda;
    pair.phi = (1.0 / norm) * phi_tilde;
    pair.phi_tilde_norm = norm;
    pair.quasi_derivative = SampledFunction(g, std::move(quasi));
    pair.trajectory = std::move(traj);
    return pair;
}

inline EigenPair build_eigenpair(const SampledFunction& nu, int n) { return build_eigenpair(PruferSystem(nu), n); }

/// Classical derivative phi_n' = (y^[1] + nu phi_tilde) / ||phi_tilde||.
inline SampledFunction eigenfunction_derivative(const EigenPair& pair, const SampledFunction& nu) {
    require_same_grid(pair.phi, nu, "eigenfunction_derivative");
    std::vector<double> d(pair.phi.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = pair.quasi_derivative[i] / pair.phi_tilde_norm + nu[i] * pair.phi[i];
    }
    return SampledFunction(pair.phi.grid, std::move(d));
}

/// Eigenpairs 1..count. Modes are independent; `threads` > 1 splits them across workers.
inline std::vector<EigenPair> compute_spectrum(const SampledFunction& nu, int count, int threads = 1) {
    if (count < 1) throw std::invalid_argument("compute_spectrum: need at least one mode");
    const PruferSystem system(nu);
    std::vector<EigenPair> pairs(static_cast<std::size_t>(count));
    if (threads <= 1) {
        for (int n = 1; n <= count; ++n) pairs[n - 1] = build_eigenpair(system, n);
        return pairs;
    }
    std::atomic<int> next{1};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> workers;
    for (int w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (int n = next++; n <= count; n = next++) pairs[n - 1] = build_eigenpair(system, n);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

struct MatrixSpectrum {
    std::vector<double> lambdas;
    std::vector<SampledFunction> eigenvectors;
};

namespace detail {

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) below x.
inline std::size_t sturm_count(const std::vector<double>& diag, double off, double x) {
    std::size_t count = 0;
    double pivot = 1.0;
    const double off2 = off * off;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        pivot = diag[i] - x - (i == 0 ? 0.0 : off2 / pivot);
        if (pivot == 0.0) pivot = -1e-300;
        if (pivot < 0.0) ++count;
    }
    return count;
}

}  // namespace detail

/// Lowest `count_modes` eigenpairs of -D2 + diag(q) with Dirichlet rows removed.
/// Eigenvalues by Sturm-sequence bisection, eigenvectors by inverse iteration;
/// vectors are L2-normalized on the grid and have positive initial slope.
inline MatrixSpectrum matrix_oracle(const SampledFunction& q, int count_modes) {
    const Grid& g = q.grid;
    const std::size_t m = g.size() - 2;
    if (count_modes < 1 || static_cast<std::size_t>(count_modes) > m / 4) {
        throw std::invalid_argument("matrix_oracle: count_modes must be small against the grid");
    }
    const double h = g.spacing();
    const double off = -1.0 / (h * h);
    std::vector<double> diag(m);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < m; ++i) {
        diag[i] = 2.0 / (h * h) + q[i + 1];
        lo = std::min(lo, diag[i] - 2.0 * std::abs(off));
        hi = std::max(hi, diag[i] + 2.0 * std::abs(off));
    }
    MatrixSpectrum out;
    for (int k = 0; k < count_modes; ++k) {
        double a = lo, b = hi;
        while (b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b))) {
            const double mid = 0.5 * (a + b);
            if (mid == a || mid == b) break;
            if (detail::sturm_count(diag, off, mid) > static_cast<std::size_t>(k)) b = mid;
            else a = mid;
        }
        const double lambda = 0.5 * (a + b);
        out.lambdas.push_back(lambda);

        const double shift = lambda + 1e-10 * std::max(1.0, std::abs(lambda));
        std::vector<double> sub(m, off), sup(m, off), dd(m);
        for (std::size_t i = 0; i < m; ++i) dd[i] = diag[i] - shift;
        std::vector<double> v(m, 1.0);
        for (int it = 0; it < 3; ++it) {
            v = solve_tridiagonal(sub, dd, sup, v);
            double norm = 0.0;
            for (double x : v) norm = std::max(norm, std::abs(x));
            for (double& x : v) x /= norm;
        }
        std::vector<double> full(g.size(), 0.0);
        std::copy(v.begin(), v.end(), full.begin() + 1);
        SampledFunction vec(g, std::move(full));
        double norm = l2_norm(vec);
        if (vec[1] < 0.0) norm = -norm;
        out.eigenvectors.push_back((1.0 / norm) * vec);
    }
    return out;
}

/// Matrix of quadrature inner products <phi_m, phi_n>.
inline std::vector<std::vector<double>> gram_matrix(const std::vector<EigenPair>& pairs) {
    const std::size_t n = pairs.size();
    for (const auto& p : pairs) {
        if (!(p.phi.grid == pairs.front().phi.grid)) {
            throw std::invalid_argument("gram_matrix: eigenpairs live on different grids");
        }
    }
    std::vector<std::vector<double>> gram(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            gram[i][j] = gram[j][i] = inner_product(pairs[i].phi, pairs[j].phi);
        }
    }
    return gram;
}

/// ||-phi'' + q phi - lambda phi||_L2 over interior points, phi'' by centred differences.
inline double eigen_residual(const EigenPair& pair, const SampledFunction& q) {
    const Grid& g = pair.phi.grid;
    const double h = g.spacing();
    std::vector<double> res(g.size(), 0.0);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        const double d2 = (pair.phi[i + 1] - 2.0 * pair.phi[i] + pair.phi[i - 1]) / (h * h);
        res[i] = -d2 + q[i] * pair.phi[i] - pair.lambda * pair.phi[i];
    }
    return l2_norm(SampledFunction(g, std::move(res)));
}

}  // namespace sturm_heat

#endif
