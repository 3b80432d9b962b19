#ifndef STURM_HEAT_REGULARIZATION_HPP
#define STURM_HEAT_REGULARIZATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sturm_heat/errors.hpp"
#include "sturm_heat/numerics.hpp"

namespace sturm_heat {

using ScalarFunction = std::function<double(double)>;

// ---------------------------------------------------------------------------
// Distribution specifications

/// A function given in closed form. `breakpoints` lists interior points where it
/// (or a derivative) may jump, so convolution quadrature can split there.
struct SmoothData {
    ScalarFunction f;
    std::vector<double> breakpoints;
};

/// mass * delta(x - location).
struct DeltaAt {
    double location;
    double mass = 1.0;
};

/// q = nu' with nu in L^2. Only nu is stored.
struct DerivativeOfL2 {
    ScalarFunction nu;
    std::vector<double> breakpoints;
};

/// Bounded but possibly discontinuous function (e.g. a step potential).
struct BoundedFunction {
    ScalarFunction f;
    std::vector<double> breakpoints;
};

struct DistributionSpec;

/// Finite sum of specs, e.g. 1 + delta(0.5).
struct SumOf {
    std::vector<DistributionSpec> terms;
};

/// Symbolic description of q, a, u0 or f before regularization. `text` is the
/// expression it was parsed from (empty when built in code).
struct DistributionSpec {
    std::variant<SmoothData, DeltaAt, DerivativeOfL2, BoundedFunction, SumOf> kind;
    std::string text;

    static DistributionSpec smooth(ScalarFunction f, std::string text = {}) {
        return {SmoothData{std::move(f), {}}, std::move(text)};
    }
    static DistributionSpec constant(double c) {
        std::ostringstream s;
        s.precision(17);
        s << c;
        return {SmoothData{[c](double) { return c; }, {}}, s.str()};
    }
    static DistributionSpec delta(double location, double mass = 1.0, std::string text = {}) {
        return {DeltaAt{location, mass}, std::move(text)};
    }
    static DistributionSpec derivative_of(ScalarFunction nu, std::string text = {},
                                          std::vector<double> breakpoints = {}) {
        return {DerivativeOfL2{std::move(nu), std::move(breakpoints)}, std::move(text)};
    }
    static DistributionSpec bounded(ScalarFunction f, std::vector<double> breakpoints, std::string text = {}) {
        return {BoundedFunction{std::move(f), std::move(breakpoints)}, std::move(text)};
    }

    static DistributionSpec sum(std::vector<DistributionSpec> terms, std::string text = {}) {
        return {SumOf{std::move(terms)}, std::move(text)};
    }

    bool is_delta() const { return std::holds_alternative<DeltaAt>(kind); }

    /// True when any delta occurs (directly or inside a sum).
    bool has_delta() const {
        if (is_delta()) return true;
        if (const auto* s = std::get_if<SumOf>(&kind)) {
            return std::any_of(s->terms.begin(), s->terms.end(), [](const auto& t) { return t.has_delta(); });
        }
        return false;
    }

    /// Pointwise evaluation for function-valued specs (Smooth / Bounded); for a
    /// DerivativeOfL2 returns nu'. Throws for a delta.
    double evaluate(double x) const {
        if (const auto* s = std::get_if<SmoothData>(&kind)) return s->f(x);
        if (const auto* b = std::get_if<BoundedFunction>(&kind)) return b->f(x);
        if (const auto* d = std::get_if<DerivativeOfL2>(&kind)) {
            const double step = 1e-6;
            return (d->nu(x + step) - d->nu(x - step)) / (2.0 * step);
        }
        if (const auto* s = std::get_if<SumOf>(&kind)) {
            double v = 0.0;
            for (const auto& t : s->terms) v += t.evaluate(x);
            return v;
        }
        throw std::invalid_argument("DistributionSpec: a delta has no pointwise values");
    }
};

/// Spatial delta locations must lie in the open interval (start, end).
inline void validate_spec(const DistributionSpec& spec, double start, double end) {
    if (const auto* s = std::get_if<SumOf>(&spec.kind)) {
        for (const auto& t : s->terms) validate_spec(t, start, end);
        return;
    }
    if (const auto* d = std::get_if<DeltaAt>(&spec.kind)) {
        if (!(d->location > start && d->location < end)) {
            std::ostringstream msg;
            msg << "delta location " << d->location << " outside the admissible interval (" << start << ", "
                << end << ")";
            throw ConfigError(msg.str());
        }
        if (!std::isfinite(d->mass)) throw ConfigError("delta mass must be finite");
    }
}

// ---------------------------------------------------------------------------
// Mollifiers

enum class KernelFamily { Bump, TruncatedGaussian };

inline const char* to_string(KernelFamily k) {
    return k == KernelFamily::Bump ? "bump" : "truncated_gaussian";
}

/// Unit-mass kernel supported in [-1, 1]; psi_eps(x) = psi(x/eps)/eps.
class Mollifier {
public:
    static Mollifier bump() { return Mollifier(KernelFamily::Bump, 0.0); }
    static Mollifier truncated_gaussian(double sigma = 0.5) {
        if (!(sigma > 0.0)) throw std::invalid_argument("truncated Gaussian needs sigma > 0");
        return Mollifier(KernelFamily::TruncatedGaussian, sigma);
    }

    KernelFamily family() const { return family_; }
    double sigma() const { return sigma_; }
    double normalization() const { return normalization_; }

    /// Normalized kernel psi(s).
    double operator()(double s) const {
        if (s <= -1.0 || s >= 1.0) return 0.0;
        return raw(s) / normalization_;
    }

    /// psi'(s) on the open support.
    double derivative(double s) const {
        if (s <= -1.0 || s >= 1.0) return 0.0;
        if (family_ == KernelFamily::Bump) {
            const double d = 1.0 - s * s;
            return (*this)(s) * (-2.0 * s / (d * d));
        }
        return (*this)(s) * (-s / (sigma_ * sigma_));
    }

    /// Limit of psi at s -> +-1 (zero for the bump; the truncation jump otherwise).
    double edge_value() const { return family_ == KernelFamily::Bump ? 0.0 : raw(1.0) / normalization_; }

    double scaled(double x, double epsilon) const { return (*this)(x / epsilon) / epsilon; }

    /// int_{-1}^{s} psi.
    double cdf(double s) const {
        if (s <= -1.0) return 0.0;
        if (s >= 1.0) return 1.0;
        // same panel density as the normalization
        const int panels = std::max(1, static_cast<int>(std::ceil(32.0 * (s + 1.0))));
        return integrate_gauss([this](double r) { return raw(r); }, -1.0, s, rule(), panels) / normalization_;
    }

    /// psi_eps for grid sampling: a node sitting on the truncation jump gets the
    /// mean of the one-sided limits, so the jump does not bias grid quadrature.
    double sampled(double x, double epsilon) const {
        const double s = x / epsilon;
        if (std::abs(std::abs(s) - 1.0) <= 1e-9) return 0.5 * edge_value() / epsilon;
        return scaled(x, epsilon);
    }

    bool operator==(const Mollifier& other) const {
        return family_ == other.family_ && sigma_ == other.sigma_;
    }

    /// Quadrature rule used for every convolution against this kernel.
    static const GaussLegendre& rule() {
        static const GaussLegendre r = gauss_legendre(16);
        return r;
    }

private:
    Mollifier(KernelFamily family, double sigma) : family_(family), sigma_(sigma) {
        normalization_ = 1.0;
        normalization_ = integrate_gauss([this](double s) { return raw(s); }, -1.0, 1.0, rule(), 64);
    }

    double raw(double s) const {
        if (family_ == KernelFamily::Bump) {
            if (std::abs(s) >= 1.0) return 0.0;
            return std::exp(-1.0 / (1.0 - s * s));
        }
        return std::exp(-0.5 * s * s / (sigma_ * sigma_));
    }

    KernelFamily family_;
    double sigma_;
    double normalization_ = 1.0;
};

/// How a function on [start, end] is continued outside the interval before convolution.
enum class Extension {
    Zero,   // the f-tilde construction: zero outside the interval
    Clamp,  // constant continuation with the endpoint values (used for a(t))
    Odd,    // odd reflection at both ends; keeps Dirichlet data zero at the boundary
};

namespace detail {

/// int_{-1}^{1} g(x - eps*s) w(s) ds with the s-range split where x - eps*s
/// crosses the interval ends or a breakpoint.
template <class G, class W>
double convolve_point(G&& g, W&& weight, double x, double epsilon, double start, double end,
                      const std::vector<double>& breakpoints, Extension ext) {
    // fixed panel mesh on the kernel support, refined at every cut
    constexpr int kPanels = 16;
    std::vector<double> cuts;
    for (int k = 0; k <= kPanels; ++k) cuts.push_back(-1.0 + 2.0 * k / kPanels);
    auto add_cut = [&](double b) {
        const double s = (x - b) / epsilon;
        if (s > -1.0 && s < 1.0) cuts.push_back(s);
    };
    add_cut(start);
    add_cut(end);
    for (double b : breakpoints) add_cut(b);
    std::sort(cuts.begin(), cuts.end());
    const auto& rule = Mollifier::rule();
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        if (hi - lo < 1e-15) continue;
        const double mid_y = x - epsilon * 0.5 * (lo + hi);
        if (ext == Extension::Zero && (mid_y < start || mid_y > end)) continue;
        total += integrate_gauss(
            [&](double s) {
                double y = x - epsilon * s;
                double sign = 1.0;
                if (ext == Extension::Clamp) {
                    y = std::clamp(y, start, end);
                } else if (ext == Extension::Odd && (y < start || y > end)) {
                    y = y < start ? 2.0 * start - y : 2.0 * end - y;
                    sign = -1.0;
                }
                return sign * g(y) * weight(s);
            },
            lo, hi, rule, 1);
    }
    return total;
}

}  // namespace detail

/// Convolve the spec (continued outside the grid interval per `ext`) with
/// psi_eps and sample the result on `grid`. Warnings go to `diag` when given.
inline SampledFunction mollify(const DistributionSpec& spec, const Mollifier& kernel, double epsilon,
                               const Grid& grid, Diagnostics* diag = nullptr, Extension ext = Extension::Zero) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("mollify: epsilon must be positive");
    }
    if (epsilon > 1.0) throw std::invalid_argument("mollify: epsilon must not exceed 1");
    const double h = grid.spacing();
    if (h > epsilon) throw std::invalid_argument("mollify: grid spacing exceeds epsilon");
    if (diag && h > epsilon / 10.0) {
        std::ostringstream msg;
        msg << "grid spacing " << h << " exceeds epsilon/10 for epsilon=" << epsilon;
        diag->warn(msg.str());
    }
    const double a = grid.start(), b = grid.end();
    std::vector<double> out(grid.size());

    if (const auto* sum = std::get_if<SumOf>(&spec.kind)) {
        Diagnostics* inner = nullptr;  // spacing warning already issued above
        Diagnostics clipped;
        if (diag) inner = &clipped;
        for (const auto& t : sum->terms) {
            const SampledFunction part = mollify(t, kernel, epsilon, grid, inner, ext);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += part[i];
        }
        for (auto& w : clipped.warnings) {
            if (w.find("clipped") != std::string::npos) diag->warn(std::move(w));
        }
        return SampledFunction(grid, std::move(out));
    }

    if (const auto* d = std::get_if<DeltaAt>(&spec.kind)) {
        if (diag && (d->location - epsilon <= a || d->location + epsilon >= b)) {
            std::ostringstream msg;
            msg << "delta at " << d->location << " with epsilon=" << epsilon << " is clipped by the boundary";
            diag->warn(msg.str());
        }
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = d->mass * kernel.sampled(grid[i] - d->location, epsilon);
        if (ext == Extension::Odd) {
            // negative images at the reflected locations
            for (std::size_t i = 0; i < grid.size(); ++i) {
                out[i] -= d->mass * (kernel.sampled(grid[i] - (2.0 * a - d->location), epsilon) +
                                     kernel.sampled(grid[i] - (2.0 * b - d->location), epsilon));
            }
        }
        return SampledFunction(grid, std::move(out));
    }

    const auto weight = [&](double s) { return kernel(s); };
    if (const auto* s = std::get_if<SmoothData>(&spec.kind)) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out[i] = detail::convolve_point(s->f, weight, grid[i], epsilon, a, b, s->breakpoints, ext);
        }
    } else if (const auto* bf = std::get_if<BoundedFunction>(&spec.kind)) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out[i] = detail::convolve_point(bf->f, weight, grid[i], epsilon, a, b, bf->breakpoints, ext);
        }
    } else if (const auto* dv = std::get_if<DerivativeOfL2>(&spec.kind)) {
        if (ext == Extension::Odd) throw std::invalid_argument("mollify: odd extension of a derivative spec");
        // (nu' restricted to the interval, zero outside) * psi_eps
        //   = (nu_tilde * psi_eps)' - nu(a+) psi_eps(x - a) + nu(b-) psi_eps(x - b).
        // The convolution derivative moves onto the kernel, including the
        // truncation jumps of a non-smooth kernel edge.
        const auto dweight = [&](double s) { return kernel.derivative(s); };
        const double edge = kernel.edge_value();
        const double nu_a = dv->nu(a), nu_b = dv->nu(b);
        auto nu_tilde = [&](double y) { return (y < a || y > b) ? 0.0 : dv->nu(y); };
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid[i];
            double v = detail::convolve_point(dv->nu, dweight, x, epsilon, a, b, dv->breakpoints, Extension::Zero);
            if (edge != 0.0) v += edge * (nu_tilde(x + epsilon) - nu_tilde(x - epsilon));
            v /= epsilon;
            v += -nu_a * kernel.scaled(x - a, epsilon) + nu_b * kernel.scaled(x - b, epsilon);
            out[i] = v;
        }
    }
    return SampledFunction(grid, std::move(out));
}

struct RegularizedPotential {
    SampledFunction q;
    SampledFunction nu;  // nu(0) = 0, nu' = q on the grid
};

namespace detail {

/// Running integral of q_eps from the grid start. Delta terms use the kernel
/// primitive exactly; other terms integrate their samples.
inline std::vector<double> mollified_primitive(const DistributionSpec& q, const Mollifier& kernel, double epsilon,
                                               const Grid& grid, const SampledFunction& q_eps) {
    if (const auto* d = std::get_if<DeltaAt>(&q.kind)) {
        std::vector<double> nu(grid.size());
        const double base = kernel.cdf((grid.start() - d->location) / epsilon);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            nu[i] = d->mass * (kernel.cdf((grid[i] - d->location) / epsilon) - base);
        }
        return nu;
    }
    if (const auto* sum = std::get_if<SumOf>(&q.kind)) {
        std::vector<double> nu(grid.size(), 0.0);
        for (const auto& t : sum->terms) {
            const auto part = mollified_primitive(t, kernel, epsilon, grid, mollify(t, kernel, epsilon, grid));
            for (std::size_t i = 0; i < nu.size(); ++i) nu[i] += part[i];
        }
        return nu;
    }
    return cumulative_integral(q_eps.values, grid.spacing());
}

}  // namespace detail

/// q_eps = mollify(q) together with its running integral nu_eps.
inline RegularizedPotential regularize_potential(const DistributionSpec& q, const Mollifier& kernel, double epsilon,
                                                 const Grid& grid, Diagnostics* diag = nullptr) {
    SampledFunction q_eps = mollify(q, kernel, epsilon, grid, diag);
    SampledFunction nu_eps(grid, detail::mollified_primitive(q, kernel, epsilon, grid, q_eps));
    return {std::move(q_eps), std::move(nu_eps)};
}

/// Potential already given as bounded samples: nu is its running integral.
inline RegularizedPotential potential_from_samples(const SampledFunction& q) {
    return {q, SampledFunction(q.grid, cumulative_integral(q.values, q.grid.spacing()))};
}

// ---------------------------------------------------------------------------
// Moderateness and negligibility

struct ModerateNet {
    std::vector<double> epsilons;
    std::vector<double> norms;
    int N = 0;
    double C = 0.0;
    double slope = 0.0;
    /// Max |log(norm) - fitted line| over the net.
    double residual = 0.0;
    bool identically_small = false;
    bool short_span = false;  // fewer than two decades of epsilon
};

namespace detail {

inline void check_net(const std::vector<double>& eps, const std::vector<double>& values, const char* where) {
    if (eps.size() != values.size()) throw std::invalid_argument(std::string(where) + ": size mismatch");
    if (eps.size() < 4) throw std::invalid_argument(std::string(where) + ": need at least 4 epsilon values");
    double lo = eps.front(), hi = eps.front();
    for (double e : eps) {
        if (!(e > 0.0)) throw std::invalid_argument(std::string(where) + ": epsilons must be positive");
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (hi / lo < 10.0 - 1e-9) {
        throw std::invalid_argument(std::string(where) + ": epsilon net must span at least one decade");
    }
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(where) + ": invalid norm");
    }
}

}  // namespace detail

/// Fits norms[i] <= C * eps[i]^-N: least-squares slope s of log(norm) against
/// log(1/eps), N = max(0, ceil(s - 0.1)), C the smallest constant valid on the net.
inline ModerateNet fit_moderateness(const std::vector<double>& epsilons, const std::vector<double>& norms) {
    detail::check_net(epsilons, norms, "fit_moderateness");
    ModerateNet net{epsilons, norms};
    const double eps_max = *std::max_element(epsilons.begin(), epsilons.end());
    const double eps_min = *std::min_element(epsilons.begin(), epsilons.end());
    net.short_span = eps_max / eps_min < 100.0 - 1e-9;
    if (std::any_of(norms.begin(), norms.end(), [](double v) { return v == 0.0; })) {
        net.identically_small = true;
        net.N = 0;
        net.C = *std::max_element(norms.begin(), norms.end());
        return net;
    }
    std::vector<double> x(norms.size()), y(norms.size());
    for (std::size_t i = 0; i < norms.size(); ++i) {
        x[i] = std::log(1.0 / epsilons[i]);
        y[i] = std::log(norms[i]);
    }
    const LineFit line = fit_line(x, y);
    net.slope = line.slope;
    net.N = std::max(0, static_cast<int>(std::ceil(line.slope - 0.1)));
    for (std::size_t i = 0; i < norms.size(); ++i) {
        net.C = std::max(net.C, norms[i] * std::pow(epsilons[i], net.N));
        net.residual = std::max(net.residual, std::abs(y[i] - (line.intercept + line.slope * x[i])));
    }
    return net;
}

struct NegligibilityOrder {
    int order;
    bool pass;
    double constant;  // C_M taken at the coarsest epsilon
    double log_residual;
};

struct NegligibilityReport {
    std::vector<NegligibilityOrder> orders;
    /// Least-squares slope of log(diff) against log(eps); +inf when all differences vanish.
    double slope = std::numeric_limits<double>::infinity();
    bool identically_zero = false;
};

/// Finite-net surrogate for "O(eps^M) for every M": for each tested order M the
/// ratio diff/eps^M may grow by at most e^0.5 beyond its value at the coarsest eps.
inline NegligibilityReport check_negligibility(const std::vector<double>& epsilons, const std::vector<double>& diffs,
                                               const std::vector<int>& orders_to_test = {1, 2, 3}) {
    detail::check_net(epsilons, diffs, "check_negligibility");
    NegligibilityReport report;
    std::vector<std::size_t> idx(epsilons.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return epsilons[a] > epsilons[b]; });

    report.identically_zero = std::all_of(diffs.begin(), diffs.end(), [](double d) { return d == 0.0; });
    if (!report.identically_zero) {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < diffs.size(); ++i) {
            if (diffs[i] > 0.0) {
                x.push_back(std::log(epsilons[i]));
                y.push_back(std::log(diffs[i]));
            }
        }
        if (x.size() >= 2) report.slope = fit_line(x, y).slope;
    }
    for (int m : orders_to_test) {
        NegligibilityOrder o{m, true, 0.0, 0.0};
        if (!report.identically_zero) {
            const double coarse_eps = epsilons[idx.front()];
            const double coarse_ratio = diffs[idx.front()] / std::pow(coarse_eps, m);
            double worst = -std::numeric_limits<double>::infinity();
            double c = 0.0;
            for (std::size_t i : idx) {
                const double r = diffs[i] / std::pow(epsilons[i], m);
                c = std::max(c, r);
                if (r > 0.0) {
                    worst = std::max(worst, coarse_ratio > 0.0 ? std::log(r / coarse_ratio)
                                                               : std::numeric_limits<double>::infinity());
                }
            }
            o.constant = c;
            o.log_residual = std::isfinite(worst) || worst > 0 ? std::max(worst, 0.0) : 0.0;
            o.pass = o.log_residual <= 0.5;
        }
        report.orders.push_back(o);
    }
    return report;
}

/// Geometric net 2^-first .. 2^-last.
inline std::vector<double> dyadic_net(int first, int last) {
    std::vector<double> eps;
    for (int k = first; k <= last; ++k) eps.push_back(std::ldexp(1.0, -k));
    return eps;
}

}  // namespace sturm_heat

#endif
