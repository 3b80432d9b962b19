#ifndef STURM_HEAT_ESTIMATES_HPP
#define STURM_HEAT_ESTIMATES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "sturm_heat/heat_spectral.hpp"

namespace sturm_heat {

struct EstimateReport {
    std::string id;  // T1.1 .. T1.5[k=2], C1.1 .., T2.1 .., C2.1 ..
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double t_at_max = 0.0;
    std::string inputs_digest;
    bool skipped = false;
    std::string note;
};

inline double estimate_ratio(double lhs, double rhs) {
    if (rhs > 0.0) return lhs / rhs;
    return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

/// Running maximum of a quantity over the time grid.
struct TimeMax {
    double value = -1.0;
    double t = 0.0;
    void update(double v, double time) {
        if (v > value) {
            value = v;
            t = time;
        }
    }
};

/// max over the time grid of every left-hand side used by the estimate families.
struct LhsSeries {
    TimeMax u, ut, ux, uxx;
    TimeMax sobolev[3];  // k = 0, 1, 2
};

inline LhsSeries measure_lhs(const SpectralSolution& sol) {
    const auto phi = eigenfunctions(sol);
    const GramMatrix G0 = gram_of(phi);
    const GramMatrix G1 = gram_of(sol.dphi);
    const GramMatrix G2 = gram_of(second_derivative_basis(sol));
    const std::vector<double> lambdas = sol.lambdas();
    LhsSeries s;
    const Grid& tg = sol.time_coeff.grid();
    for (std::size_t j = 0; j < tg.size(); ++j) {
        const double t = tg[j];
        if (t < sol.origin) continue;
        const auto u = mode_amplitudes(sol, t);
        s.u.update(quadratic_norm(G0, u), t);
        s.ut.update(quadratic_norm(G0, time_derivative_coefficients(sol, t)), t);
        s.ux.update(quadratic_norm(G1, u), t);
        s.uxx.update(quadratic_norm(G2, u), t);
        for (int k = 0; k < 3; ++k) s.sobolev[k].update(sobolev_norm(u, lambdas, k), t);
    }
    return s;
}

/// Norms of the data entering the right-hand sides.
struct DataNorms {
    double u0 = 0.0;           // ||u0||_{L2}
    double u0_w[3] = {};       // ||u0||_{W^k}, k = 0, 1, 2 (truncated spectral)
    double u0_second = 0.0;    // ||u0''||_{L2}
    double u0_second_error = 0.0;
    double q_sup = 0.0;
    double nu_l2 = 0.0;
    double nu_sup = 0.0;
    double a_sup = 0.0;
    double a_floor = 0.0;
    double T = 0.0;
    double f_c0 = 0.0;   // max_t ||f(t)||
    double f_c1 = 0.0;   // max_t (||f(t)|| + ||d/dt f(t)||)
    double f_cw1 = 0.0;  // max_t ||f(t)||_{W^1}
};

/// ||u0''|| by centred differences; error estimated against spacing 2h.
inline std::pair<double, double> second_derivative_norm(const SampledFunction& u0) {
    const Grid& g = u0.grid;
    const double h = g.spacing();
    auto norm_at = [&](std::size_t step) {
        const double hs = h * static_cast<double>(step);
        double s = 0.0;
        std::size_t count = 0;
        for (std::size_t i = step; i + step < g.size(); i += 1) {
            const double d = (u0[i + step] - 2.0 * u0[i] + u0[i - step]) / (hs * hs);
            s += d * d;
            ++count;
        }
        return std::sqrt(s / static_cast<double>(count) * (g.end() - g.start()));
    };
    const double fine = norm_at(1);
    const double coarse = norm_at(2);
    return {fine, std::abs(coarse - fine) / 3.0};
}

inline DataNorms data_norms(const SpectralSolution& sol, const SampledFunction& u0,
                            std::optional<double> u0_second_norm = std::nullopt) {
    DataNorms d;
    d.u0 = l2_norm(u0);
    const auto lambdas = sol.lambdas();
    const auto c = project(u0, *sol.pairs).coefficients;
    for (int k = 0; k < 3; ++k) d.u0_w[k] = sobolev_norm(c, lambdas, k);
    if (u0_second_norm) {
        d.u0_second = *u0_second_norm;
    } else {
        std::tie(d.u0_second, d.u0_second_error) = second_derivative_norm(u0);
    }
    d.q_sup = sup_norm(sol.q);
    d.nu_l2 = l2_norm(sol.nu);
    d.nu_sup = sup_norm(sol.nu);
    d.a_sup = sup_norm(sol.time_coeff.a);
    d.a_floor = sol.time_coeff.a_floor;
    d.T = sol.horizon();
    if (sol.source) {
        const Grid& tg = sol.time_coeff.grid();
        const Grid& g = sol.grid();
        const double dt = tg.spacing();
        auto sample = [&](double t) { return SampledFunction::sample(g, [&](double x) { return sol.source(t, x); }); };
        const std::size_t last = tg.size() - 1;
        // second-order differences, one-sided at the ends
        auto dfdt = [&](std::size_t j, const SampledFunction& fj) {
            if (j == 0) return (0.5 / dt) * (-3.0 * fj + 4.0 * sample(tg[1]) - sample(tg[2]));
            if (j == last) return (0.5 / dt) * (3.0 * fj - 4.0 * sample(tg[last - 1]) + sample(tg[last - 2]));
            return (0.5 / dt) * (sample(tg[j + 1]) - sample(tg[j - 1]));
        };
        for (std::size_t j = 0; j < tg.size(); ++j) {
            const SampledFunction fj = sample(tg[j]);
            const double fn = l2_norm(fj);
            d.f_c0 = std::max(d.f_c0, fn);
            d.f_c1 = std::max(d.f_c1, fn + l2_norm(dfdt(j, fj)));
            std::vector<double> fc(sol.modes());
            for (std::size_t n = 0; n < sol.modes(); ++n) fc[n] = sol.f_coeffs[n][j];
            d.f_cw1 = std::max(d.f_cw1, sobolev_norm(fc, lambdas, 1.0));
        }
    }
    return d;
}

namespace detail {

inline EstimateReport make_report(std::string id, const TimeMax& lhs, double rhs, const std::string& digest) {
    EstimateReport r;
    r.id = std::move(id);
    r.lhs = lhs.value;
    r.rhs = rhs;
    r.ratio = estimate_ratio(lhs.value, rhs);
    r.t_at_max = lhs.t;
    r.inputs_digest = digest;
    return r;
}

}  // namespace detail

inline std::vector<EstimateReport> theorem1_reports(const LhsSeries& s, const DataNorms& d, const std::string& digest) {
    std::vector<EstimateReport> out;
    out.push_back(detail::make_report("T1.1", s.u, d.u0, digest));
    out.push_back(detail::make_report("T1.2", s.ut, d.a_sup * d.u0_w[2], digest));
    out.push_back(detail::make_report("T1.3", s.ux, d.u0_w[1] * (1.0 + d.nu_l2) + d.u0 * d.nu_sup, digest));
    // printed with d/dx on the left; the proof bounds d^2/dx^2
    out.push_back(detail::make_report("T1.4", s.uxx, d.q_sup * d.u0 + d.u0_w[2], digest));
    for (int k = 0; k < 3; ++k) {
        out.push_back(detail::make_report("T1.5[k=" + std::to_string(k) + "]", s.sobolev[k], d.u0_w[k], digest));
    }
    return out;
}

inline std::vector<EstimateReport> corollary1_reports(const LhsSeries& s, const DataNorms& d,
                                                      const std::string& digest) {
    const double w2 = d.u0_second + d.q_sup * d.u0;
    std::vector<EstimateReport> out;
    out.push_back(detail::make_report("C1.1", s.u, d.u0, digest));
    out.push_back(detail::make_report("C1.2", s.ut, d.a_sup * w2, digest));
    out.push_back(detail::make_report("C1.3", s.ux, w2 * (1.0 + d.nu_l2) + d.u0 * d.nu_sup, digest));
    out.push_back(detail::make_report("C1.4", s.uxx, w2, digest));
    if (d.u0_second_error > 0.0) {
        for (auto& r : out) r.note = "u0'' by centred differences, error ~" + std::to_string(d.u0_second_error);
    }
    return out;
}

inline std::vector<EstimateReport> theorem2_reports(const LhsSeries& s, const DataNorms& d, const std::string& digest) {
    const double Ta = d.T / d.a_floor;
    std::vector<EstimateReport> out;
    out.push_back(detail::make_report("T2.1", s.u, d.u0 + d.T * d.f_c0, digest));
    out.push_back(detail::make_report("T2.2", s.ut, d.a_sup * (d.u0_w[1] + Ta * d.f_c1), digest));
    out.push_back(detail::make_report("T2.3", s.ux, (1.0 + d.nu_l2) * (d.u0_w[1] + d.T * d.f_cw1), digest));
    out.push_back(
        detail::make_report("T2.4", s.uxx, d.q_sup * (d.u0 + d.T * d.f_c0) + d.u0_w[2] + Ta * d.f_c1, digest));
    return out;
}

inline std::vector<EstimateReport> corollary2_reports(const LhsSeries& s, const DataNorms& d,
                                                      const std::string& digest) {
    const double Ta = d.T / d.a_floor;
    const double w2 = d.u0_second + d.q_sup * d.u0;
    const double c0 = d.u0 + d.T * d.f_c0;
    std::vector<EstimateReport> out;
    out.push_back(detail::make_report("C2.1", s.u, c0, digest));
    out.push_back(detail::make_report("C2.2", s.ut, d.a_sup * (w2 + Ta * d.f_c1), digest));
    out.push_back(detail::make_report(
        "C2.3", s.ux, w2 * (1.0 + d.nu_l2) + Ta * (1.0 + d.nu_l2) * d.f_c1 + d.nu_sup * c0, digest));
    out.push_back(detail::make_report("C2.4", s.uxx, d.u0_second + Ta * d.f_c1 + d.q_sup * c0, digest));
    return out;
}

inline std::vector<EstimateReport> verify_theorem1(const SpectralSolution& sol, const SampledFunction& u0,
                                                   const std::string& digest = {}) {
    if (sol.has_source()) throw std::invalid_argument("verify_theorem1: requires f == 0");
    return theorem1_reports(measure_lhs(sol), data_norms(sol, u0, 0.0), digest);
}

inline std::vector<EstimateReport> verify_corollary1(const SpectralSolution& sol, const SampledFunction& u0,
                                                     std::optional<double> u0_second_norm = std::nullopt,
                                                     const std::string& digest = {}) {
    if (sol.has_source()) throw std::invalid_argument("verify_corollary1: requires f == 0");
    return corollary1_reports(measure_lhs(sol), data_norms(sol, u0, u0_second_norm), digest);
}

inline std::vector<EstimateReport> verify_theorem2(const SpectralSolution& sol, const SampledFunction& u0,
                                                   const std::string& digest = {}) {
    return theorem2_reports(measure_lhs(sol), data_norms(sol, u0, 0.0), digest);
}

inline std::vector<EstimateReport> verify_corollary2(const SpectralSolution& sol, const SampledFunction& u0,
                                                     std::optional<double> u0_second_norm = std::nullopt,
                                                     const std::string& digest = {}) {
    return corollary2_reports(measure_lhs(sol), data_norms(sol, u0, u0_second_norm), digest);
}

/// All applicable reports for one solution: T1/C1 when f == 0, T2/C2 always.
inline std::vector<EstimateReport> verify_all(const SpectralSolution& sol, const SampledFunction& u0,
                                              std::optional<double> u0_second_norm = std::nullopt,
                                              const std::string& digest = {}) {
    const LhsSeries s = measure_lhs(sol);
    const DataNorms d = data_norms(sol, u0, u0_second_norm);
    std::vector<EstimateReport> out;
    auto append = [&](std::vector<EstimateReport> r) { out.insert(out.end(), r.begin(), r.end()); };
    if (!sol.has_source()) {
        append(theorem1_reports(s, d, digest));
        append(corollary1_reports(s, d, digest));
    }
    append(theorem2_reports(s, d, digest));
    append(corollary2_reports(s, d, digest));
    return out;
}

/// One row of the estimate input matrix.
struct EstimateCase {
    std::string name;
    DistributionSpec q;
    double epsilon = 0.05;
    ScalarFunction u0;
    std::optional<double> u0_second_norm;
    ScalarFunction a;
    double a_floor = 1.0;
    Source f;
    double T = 1.0;
};

inline std::vector<EstimateCase> standard_estimate_cases() {
    using std::numbers::pi;
    const ScalarFunction sine = [](double x) { return std::sin(pi * x); };
    const ScalarFunction parabola = [](double x) { return x * (1.0 - x); };
    const ScalarFunction one = [](double) { return 1.0; };
    const ScalarFunction ramp = [](double t) { return 1.0 + 0.5 * t; };
    const double sine_second = pi * pi / std::sqrt(2.0);
    std::vector<EstimateCase> cases;
    cases.push_back({"q=0 u0=sin a=1", DistributionSpec::constant(0.0), 0.05, sine, sine_second, one, 1.0, {}, 1.0});
    cases.push_back({"q=0.3 u0=x(1-x) a=1+t/2", DistributionSpec::constant(0.3), 0.05, parabola, 2.0, ramp, 1.0, {}, 1.0});
    cases.push_back({"q=delta(0.5) u0=x(1-x) a=1", DistributionSpec::delta(0.5), 0.05, parabola, 2.0, one, 1.0, {}, 1.0});
    cases.push_back({"q=3x u0=sin(2pi x) a=2+sin(3t)", DistributionSpec::smooth([](double x) { return 3.0 * x; }), 0.05,
                     [](double x) { return std::sin(2 * pi * x); }, 4 * pi * pi / std::sqrt(2.0),
                     [](double t) { return 2.0 + std::sin(3 * t); }, 1.0, {}, 1.0});
    cases.push_back({"q=0 u0=sin a=1 f=exp(-t)sin", DistributionSpec::constant(0.0), 0.05, sine, sine_second, one, 1.0,
                     [](double t, double x) { return std::exp(-t) * std::sin(pi * x); }, 1.0});
    cases.push_back({"q=delta(0.5) u0=x(1-x) a=1 f=sin", DistributionSpec::delta(0.5), 0.05, parabola, 2.0, one, 1.0,
                     [](double, double x) { return std::sin(pi * x); }, 1.0});
    cases.push_back({"q=0.3 u0=0 a=1+t/2 f=cos(2t)x(1-x)", DistributionSpec::constant(0.3), 0.05,
                     [](double) { return 0.0; }, 0.0, ramp, 1.0,
                     [](double t, double x) { return std::cos(2 * t) * x * (1.0 - x); }, 1.0});
    return cases;
}

struct EstimateRunOptions {
    std::size_t spatial_points = 2001;
    std::size_t time_points = 2001;
    int n_max = 40;
    int threads = 1;
};

/// Solves one case with data (u0, f) scaled by `scale` and returns every applicable report.
inline std::vector<EstimateReport> run_estimate_case(const EstimateCase& c, double scale = 1.0,
                                                     const EstimateRunOptions& opt = {}) {
    const Grid g = Grid::unit(opt.spatial_points);
    const RegularizedPotential pot = regularize_potential(c.q, Mollifier::bump(), c.epsilon, g);
    const Grid tg(0.0, c.T, opt.time_points);
    const TimeCoefficient tc = accumulate(SampledFunction::sample(tg, c.a), c.a_floor);
    const SampledFunction u0 = scale * SampledFunction::sample(g, c.u0);
    Source f;
    if (c.f) f = [scale, inner = c.f](double t, double x) { return scale * inner(t, x); };
    const SpectralSolution sol = assemble(pot, tc, u0, opt.n_max, f, opt.threads);
    std::optional<double> second;
    if (c.u0_second_norm) second = scale * *c.u0_second_norm;
    return verify_all(sol, u0, second, c.name);
}

}  // namespace sturm_heat

#endif
