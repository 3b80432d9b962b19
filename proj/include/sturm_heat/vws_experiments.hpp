#ifndef STURM_HEAT_VWS_EXPERIMENTS_HPP
#define STURM_HEAT_VWS_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sturm_heat/estimates.hpp"
#include "sturm_heat/heat_spectral.hpp"
#include "sturm_heat/regularization.hpp"

namespace sturm_heat {

struct RegularizationChoice {
    Mollifier mollifier = Mollifier::bump();
    std::vector<double> epsilon_net = dyadic_net(3, 10);
    std::string label = "bump";

    void validate(std::size_t min_entries = 4) const {
        if (epsilon_net.size() < min_entries) {
            throw ConfigError("epsilon net for '" + label + "' needs at least " + std::to_string(min_entries) +
                              " entries");
        }
        for (std::size_t i = 0; i < epsilon_net.size(); ++i) {
            const double e = epsilon_net[i];
            if (!(e > 0.0 && e <= 1.0)) throw ConfigError("epsilon net entries must lie in (0, 1]");
            if (i > 0 && !(e < epsilon_net[i - 1])) throw ConfigError("epsilon net must be strictly decreasing");
        }
    }
};

/// Data of the heat problem before regularization.
struct ProblemSpec {
    DistributionSpec q = DistributionSpec::constant(0.0);
    DistributionSpec a = DistributionSpec::constant(1.0);
    DistributionSpec u0 = DistributionSpec::constant(0.0);
    Source f;
    double a_floor = 1.0;
    double T = 1.0;
};

struct NumericsOptions {
    std::size_t spatial_points = 2001;
    std::size_t time_points = 2001;
    int n_max = 40;
    /// Existence runs use max(n_max, kernel_modes/eps) modes so that d/dt u_eps, which
    /// carries q_eps u_eps, is resolved at the kernel scale; 0 keeps n_max fixed.
    double kernel_modes = 2.0;
    int threads = 1;

    int modes_for(double epsilon) const {
        if (kernel_modes <= 0.0) return n_max;
        return std::max(n_max, static_cast<int>(std::ceil(kernel_modes / epsilon)));
    }
    std::size_t max_points = 200001;  // memory cap for automatic grid refinement
};

/// Grid size that keeps h <= epsilon/10 (odd count for Simpson), capped.
inline std::size_t points_for(double epsilon, std::size_t base, std::size_t cap, double length = 1.0) {
    std::size_t m = std::max(base, static_cast<std::size_t>(std::ceil(10.0 * length / epsilon)) + 1);
    if (m % 2 == 0) ++m;
    if (m > cap) {
        std::ostringstream msg;
        msg << "epsilon = " << epsilon << " needs " << m << " grid points, above the cap of " << cap;
        throw ConfigError(msg.str());
    }
    return m;
}

/// One regularized problem (q_eps, a_eps, u0_eps) on its grids.
struct RegularizedProblem {
    RegularizedPotential potential;
    TimeCoefficient time_coeff;
    SampledFunction u0;
    bool floor_added = false;
};

inline RegularizedProblem regularize_problem(const ProblemSpec& p, const Mollifier& kernel, double epsilon,
                                             const Grid& grid, const NumericsOptions& opt,
                                             Diagnostics* diag = nullptr) {
    validate_spec(p.q, grid.start(), grid.end());
    validate_spec(p.u0, grid.start(), grid.end());
    validate_spec(p.a, 0.0, p.T);
    RegularizedProblem r{regularize_potential(p.q, kernel, epsilon, grid, diag), {},
                         mollify(p.u0, kernel, epsilon, grid, diag, Extension::Odd), false};
    const bool impulsive = p.a.has_delta();
    const std::size_t nt = impulsive ? points_for(epsilon, opt.time_points, opt.max_points, p.T)
                                     : std::max(opt.time_points, static_cast<std::size_t>(std::ceil(p.T / epsilon)) + 1);
    const Grid tg(0.0, p.T, nt);
    SampledFunction a = mollify(p.a, kernel, epsilon, tg, nullptr, Extension::Clamp);
    if (impulsive) {
        // a_eps = a_floor + mollified a keeps a_eps >= a_floor
        for (double& v : a.values) v += p.a_floor;
        r.floor_added = true;
    }
    r.time_coeff = accumulate(a, p.a_floor);
    return r;
}

/// Classical data sampled directly (no mollification); q and a must be functions.
inline RegularizedProblem sample_problem(const ProblemSpec& p, const Grid& grid, const NumericsOptions& opt) {
    if (p.q.has_delta() || p.a.has_delta() || p.u0.has_delta()) {
        throw ConfigError("classical reference needs function-valued q, a and u0");
    }
    auto eval = [](const DistributionSpec& s) { return [&s](double x) { return s.evaluate(x); }; };
    const Grid tg(0.0, p.T, opt.time_points);
    return {potential_from_samples(SampledFunction::sample(grid, eval(p.q))),
            accumulate(SampledFunction::sample(tg, eval(p.a)), p.a_floor), SampledFunction::sample(grid, eval(p.u0)),
            false};
}

inline SpectralSolution solve_problem(const RegularizedProblem& r, const ProblemSpec& p, int n_max) {
    auto pairs = std::make_shared<const std::vector<EigenPair>>(compute_spectrum(r.potential.nu, n_max, 1));
    return assemble(std::move(pairs), r.potential, r.time_coeff, r.u0, p.f);
}

struct EpsilonRecord {
    double epsilon = 0.0;
    std::size_t grid_points = 0;
    double sup_u = 0.0;       // max_t ||u_eps(t)||
    double sup_ut = 0.0;      // max_t ||d/dt u_eps(t)||
    double difference = 0.0;  // D(eps) or E(eps)
    double mass_term = 0.0;   // max_t |a_eps - a~_eps| ||u~_xx|| (uniqueness only)
    double q_sup = 0.0;
    double a_prime_sup = 0.0;
    std::string failure;
    bool ok() const { return failure.empty(); }
};

struct ExperimentReport {
    std::string kind;  // existence | uniqueness | consistency
    std::string label;
    std::vector<EpsilonRecord> records;
    std::optional<ModerateNet> u_net;
    std::optional<ModerateNet> ut_net;
    std::optional<NegligibilityReport> negligibility;
    double slope = 0.0;  // log-log slope of the difference net
    bool pass = false;
    std::string verdict;
    std::vector<std::string> notes;
};

namespace detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers; rethrows the first exception.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline double sup_derivative(const SampledFunction& a) {
    double m = 0.0;
    const double h = a.grid.spacing();
    for (std::size_t i = 0; i + 1 < a.values.size(); ++i) m = std::max(m, std::abs(a[i + 1] - a[i]) / h);
    return m;
}

/// max over the time grid of ||u(t)|| and ||d/dt u(t)||.
inline std::pair<double, double> sup_norms(const SpectralSolution& sol) {
    const GramMatrix G = gram_of(eigenfunctions(sol));
    double su = 0.0, sut = 0.0;
    const Grid& tg = sol.time_coeff.grid();
    for (std::size_t j = 0; j < tg.size(); ++j) {
        su = std::max(su, quadratic_norm(G, mode_amplitudes(sol, tg[j])));
        sut = std::max(sut, quadratic_norm(G, time_derivative_coefficients(sol, tg[j])));
    }
    return {su, sut};
}

/// max_t ||u(t) - v(t)|| over the time grid of `u`. Shared eigenbases are compared through
/// coefficients, otherwise the fields are synthesized; v is evaluated at the same times.
inline double sup_difference(const SpectralSolution& u, const SpectralSolution& v) {
    require_same_grid(u.q, v.q, "sup_difference");
    const Grid& tg = u.time_coeff.grid();
    double m = 0.0;
    if (u.pairs == v.pairs) {
        const GramMatrix G = gram_of(eigenfunctions(u));
        for (std::size_t j = 0; j < tg.size(); ++j) {
            auto cu = mode_amplitudes(u, tg[j]);
            const auto cv = mode_amplitudes(v, std::min(tg[j], v.horizon()));
            for (std::size_t n = 0; n < cu.size(); ++n) cu[n] -= cv[n];
            m = std::max(m, quadratic_norm(G, cu));
        }
        return m;
    }
    const auto bu = eigenfunctions(u);
    const auto bv = eigenfunctions(v);
    for (std::size_t j = 0; j < tg.size(); ++j) {
        const double t = tg[j];
        m = std::max(m, l2_norm(synthesize(mode_amplitudes(u, t), bu) -
                                synthesize(mode_amplitudes(v, std::min(t, v.horizon())), bv)));
    }
    return m;
}

inline std::vector<double> ok_values(const std::vector<EpsilonRecord>& recs, double EpsilonRecord::*field,
                                     std::vector<double>* eps) {
    std::vector<double> out;
    for (const auto& r : recs) {
        if (!r.ok()) continue;
        out.push_back(r.*field);
        if (eps) eps->push_back(r.epsilon);
    }
    return out;
}

inline bool monotone_decreasing(const std::vector<double>& v, double slack) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[i - 1] * (1.0 + slack)) return false;
    }
    return true;
}

inline std::string failure_text(const std::exception& e) { return e.what(); }

/// Verdict for nets the fits cannot use, empty when the net is usable.
inline std::string short_net_verdict(const std::vector<double>& eps) {
    if (eps.size() < 4) return "inconclusive (fewer than 4 successful epsilon points)";
    const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
    if (*hi / *lo < 10.0 - 1e-9) return "inconclusive (epsilon net spans less than one decade)";
    return {};
}

}  // namespace detail

/// Solution net u_eps for one regularization; moderateness of sup_t ||u_eps|| and sup_t ||d/dt u_eps||.
inline ExperimentReport run_existence(const ProblemSpec& problem, const RegularizationChoice& choice,
                                      const NumericsOptions& opt = {}) {
    choice.validate();
    ExperimentReport rep;
    rep.kind = "existence";
    rep.label = choice.label;
    rep.records.resize(choice.epsilon_net.size());
    std::vector<std::string> floor_notes(choice.epsilon_net.size());
    detail::parallel_for(choice.epsilon_net.size(), opt.threads, [&](std::size_t i) {
        EpsilonRecord& rec = rep.records[i];
        rec.epsilon = choice.epsilon_net[i];
        try {
            const Grid g = Grid::unit(points_for(rec.epsilon, opt.spatial_points, opt.max_points));
            rec.grid_points = g.size();
            const auto reg = regularize_problem(problem, choice.mollifier, rec.epsilon, g, opt);
            if (reg.floor_added) floor_notes[i] = "a is impulsive: a_eps = a_floor + mollified a";
            rec.q_sup = sup_norm(reg.potential.q);
            rec.a_prime_sup = detail::sup_derivative(reg.time_coeff.a);
            const auto sol = solve_problem(reg, problem, opt.modes_for(rec.epsilon));
            std::tie(rec.sup_u, rec.sup_ut) = detail::sup_norms(sol);
        } catch (const SolverError& e) {
            rec.failure = detail::failure_text(e);
        }
    });
    for (const auto& n : floor_notes) {
        if (!n.empty()) {
            rep.notes.push_back(n);
            break;
        }
    }
    std::vector<double> eps;
    const auto su = detail::ok_values(rep.records, &EpsilonRecord::sup_u, &eps);
    const auto sut = detail::ok_values(rep.records, &EpsilonRecord::sup_ut, nullptr);
    if (rep.verdict = detail::short_net_verdict(eps); !rep.verdict.empty()) return rep;
    rep.u_net = fit_moderateness(eps, su);
    rep.ut_net = fit_moderateness(eps, sut);
    if (rep.u_net->short_span) rep.notes.push_back("epsilon net spans fewer than 2 decades");
    rep.pass = rep.u_net->residual <= 0.5 && rep.ut_net->residual <= 0.5;
    std::ostringstream v;
    v << (rep.pass ? "moderate" : "not moderate") << ": sup_t||u_eps|| ~ eps^-" << rep.u_net->N
      << ", sup_t||d/dt u_eps|| ~ eps^-" << rep.ut_net->N;
    rep.verdict = v.str();
    return rep;
}

/// Optional perturbation added to the second u0-net: u0~_eps = u0_eps + perturb(eps, x).
using NetPerturbation = std::function<double(double, double)>;

/// D(eps) = sup_t ||u_eps - u~_eps|| for two regularizations of the same data.
inline ExperimentReport run_uniqueness(const ProblemSpec& problem, const RegularizationChoice& first,
                                       const RegularizationChoice& second, const NumericsOptions& opt = {},
                                       const NetPerturbation& perturb = {}) {
    first.validate();
    second.validate();
    if (first.epsilon_net != second.epsilon_net) throw ConfigError("uniqueness: both choices must share the epsilon net");
    const bool same_kernel = first.mollifier == second.mollifier;
    ExperimentReport rep;
    rep.kind = "uniqueness";
    rep.label = first.label + " vs " + second.label;
    rep.records.resize(first.epsilon_net.size());
    detail::parallel_for(first.epsilon_net.size(), opt.threads, [&](std::size_t i) {
        EpsilonRecord& rec = rep.records[i];
        rec.epsilon = first.epsilon_net[i];
        try {
            const Grid g = Grid::unit(points_for(rec.epsilon, opt.spatial_points, opt.max_points));
            rec.grid_points = g.size();
            const auto ra = regularize_problem(problem, first.mollifier, rec.epsilon, g, opt);
            auto rb = same_kernel ? ra : regularize_problem(problem, second.mollifier, rec.epsilon, g, opt);
            if (perturb) {
                for (std::size_t k = 0; k < g.size(); ++k) rb.u0.values[k] += perturb(rec.epsilon, g[k]);
            }
            rec.q_sup = sup_norm(ra.potential.q);
            rec.a_prime_sup = detail::sup_derivative(ra.time_coeff.a);
            const auto ua = solve_problem(ra, problem, opt.n_max);
            const auto ub = same_kernel ? assemble(ua.pairs, rb.potential, rb.time_coeff, rb.u0, problem.f)
                                        : solve_problem(rb, problem, opt.n_max);
            std::tie(rec.sup_u, rec.sup_ut) = detail::sup_norms(ua);
            rec.difference = detail::sup_difference(ua, ub);
            // (a_eps - a~_eps) d^2/dx^2 u~_eps, the source term of the difference equation
            if (ra.time_coeff.grid() == rb.time_coeff.grid()) {
                const GramMatrix G2 = gram_of(second_derivative_basis(ub));
                const Grid& tg = ra.time_coeff.grid();
                for (std::size_t j = 0; j < tg.size(); ++j) {
                    const double da = std::abs(ra.time_coeff.a[j] - rb.time_coeff.a[j]);
                    if (da > 0.0) rec.mass_term = std::max(rec.mass_term, da * quadratic_norm(G2, mode_amplitudes(ub, tg[j])));
                }
            }
        } catch (const SolverError& e) {
            rec.failure = detail::failure_text(e);
        }
    });
    std::vector<double> eps;
    const auto d = detail::ok_values(rep.records, &EpsilonRecord::difference, &eps);
    if (rep.verdict = detail::short_net_verdict(eps); !rep.verdict.empty()) return rep;
    rep.negligibility = check_negligibility(eps, d);
    rep.slope = rep.negligibility->slope;
    const bool monotone = detail::monotone_decreasing(d, 0.10);
    const bool decayed = rep.negligibility->identically_zero || d.back() <= 1e-2 * d.front();
    rep.pass = monotone && decayed;
    std::ostringstream v;
    if (rep.negligibility->identically_zero) {
        v << "consistent with uniqueness: the two nets coincide";
    } else {
        v << (rep.pass ? "consistent with uniqueness" : "inconclusive") << ": D(eps) slope " << rep.slope
          << (monotone ? ", monotone" : ", not monotone") << ", final/initial " << d.back() / d.front();
    }
    rep.verdict = v.str();
    rep.notes.push_back("negligibility tested for orders 1..3 only");
    return rep;
}

/// E(eps) = sup_t ||u - u_eps|| against the classical solution on the same grid.
inline ExperimentReport run_consistency(const ProblemSpec& problem, const RegularizationChoice& choice,
                                        const NumericsOptions& opt = {}) {
    choice.validate(1);
    ExperimentReport rep;
    rep.kind = "consistency";
    rep.label = choice.label;
    const double eps_min = *std::min_element(choice.epsilon_net.begin(), choice.epsilon_net.end());
    const Grid g = Grid::unit(points_for(eps_min, opt.spatial_points, opt.max_points));
    NumericsOptions fine = opt;
    fine.time_points = std::max(opt.time_points, static_cast<std::size_t>(std::ceil(problem.T / eps_min)) + 1);
    const auto ref_problem = sample_problem(problem, g, fine);
    const auto reference = solve_problem(ref_problem, problem, opt.n_max);
    rep.records.resize(choice.epsilon_net.size());
    detail::parallel_for(choice.epsilon_net.size(), opt.threads, [&](std::size_t i) {
        EpsilonRecord& rec = rep.records[i];
        rec.epsilon = choice.epsilon_net[i];
        rec.grid_points = g.size();
        try {
            const auto reg = regularize_problem(problem, choice.mollifier, rec.epsilon, g, fine);
            rec.q_sup = sup_norm(reg.potential.q);
            rec.a_prime_sup = detail::sup_derivative(reg.time_coeff.a);
            const auto sol = solve_problem(reg, problem, opt.n_max);
            std::tie(rec.sup_u, rec.sup_ut) = detail::sup_norms(sol);
            rec.difference = detail::sup_difference(reference, sol);
        } catch (const SolverError& e) {
            rec.failure = detail::failure_text(e);
        }
    });
    std::vector<double> eps;
    const auto e = detail::ok_values(rep.records, &EpsilonRecord::difference, &eps);
    if (eps.size() < 2) {
        rep.verdict = "inconclusive (net too short)";
        return rep;
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        lx.push_back(std::log(eps[i]));
        ly.push_back(std::log(std::max(e[i], 1e-300)));
    }
    rep.slope = fit_line(lx, ly).slope;
    const bool decreasing = detail::monotone_decreasing(e, 0.0);
    rep.pass = decreasing && e.back() <= e.front() / 10.0;
    std::ostringstream v;
    v << (rep.pass ? "consistent" : "not consistent") << ": E(eps) slope " << rep.slope << ", E(last)/E(first) "
      << e.back() / e.front();
    rep.verdict = v.str();
    return rep;
}

}  // namespace sturm_heat

#endif
