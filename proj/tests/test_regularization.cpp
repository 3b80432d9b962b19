#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sturm_heat/regularization.hpp"

using namespace sturm_heat;
using std::numbers::pi;

namespace {

/// Independent reference for the bump normalization: fine composite Simpson.
double bump_mass_reference() {
    const std::size_t n = 200001;
    const double h = 2.0 / static_cast<double>(n - 1);
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double x = -1.0 + h * static_cast<double>(i);
        s += (i % 2 == 1 ? 4.0 : 2.0) * std::exp(-1.0 / (1.0 - x * x));
    }
    return s * h / 3.0;
}

}  // namespace

TEST(Mollifier, BumpNormalization) {
    const double z = bump_mass_reference();
    EXPECT_NEAR(z, 0.44399381616807944, 1e-12);
    const Mollifier k = Mollifier::bump();
    EXPECT_NEAR(k.normalization(), z, 1e-12);
    EXPECT_NEAR(k(0.0), std::exp(-1.0) / z, 1e-12);
    EXPECT_NEAR(k(0.0), 0.8285688398691052, 1e-12);
}

TEST(Mollifier, UnitMassNonNegativeCompactSupport) {
    for (const auto& k : {Mollifier::bump(), Mollifier::truncated_gaussian(), Mollifier::truncated_gaussian(0.3)}) {
        const auto rule = gauss_legendre(16);
        EXPECT_NEAR(integrate_gauss([&](double s) { return k(s); }, -1.0, 1.0, rule, 64), 1.0, 1e-10);
        for (double s = -1.5; s <= 1.5; s += 0.01) {
            EXPECT_GE(k(s), 0.0);
            if (std::abs(s) >= 1.0) { EXPECT_EQ(k(s), 0.0); }
        }
    }
}

TEST(Mollifier, DerivativeMatchesFiniteDifference) {
    for (const auto& k : {Mollifier::bump(), Mollifier::truncated_gaussian()}) {
        for (double s : {-0.7, -0.2, 0.0, 0.4, 0.9}) {
            const double fd = (k(s + 1e-6) - k(s - 1e-6)) / 2e-6;
            EXPECT_NEAR(k.derivative(s), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Mollify, LinearFunctionInteriorPoint) {
    const Grid g = Grid::unit(2001);
    const auto out = mollify(DistributionSpec::smooth([](double x) { return x; }), Mollifier::bump(), 0.01, g);
    EXPECT_NEAR(out[1000], 0.5, 1e-6);
}

TEST(Mollify, DeltaPeakAndMass) {
    const Grid g = Grid::unit(8001);  // h <= eps/160 so Simpson resolves the kernel
    for (double eps : {0.02, 0.05, 0.1}) {
        const auto out = mollify(DistributionSpec::delta(0.5), Mollifier::bump(), eps, g);
        EXPECT_NEAR(out[4000], 0.8285688398691052 / eps, 1e-9 / eps);
        EXPECT_NEAR(integrate(out), 1.0, 1e-8);
    }
    const auto tg = mollify(DistributionSpec::delta(0.5), Mollifier::truncated_gaussian(), 0.05, g);
    EXPECT_NEAR(integrate(tg), 1.0, 1e-3);  // jump at the kernel edge limits Simpson here
}

TEST(Mollify, DeltaSupport) {
    const Grid g = Grid::unit(2001);
    const double eps = 0.05;
    const auto out = mollify(DistributionSpec::delta(0.3, 2.0), Mollifier::bump(), eps, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (std::abs(g[i] - 0.3) >= eps) { EXPECT_LE(std::abs(out[i]), 1e-14); }
    }
}

TEST(Mollify, SmoothMassPreservedAwayFromBoundary) {
    // f supported well inside (0,1): mollification preserves its integral.
    const auto f = DistributionSpec::smooth([](double x) {
        return (x > 0.2 && x < 0.8) ? std::pow(std::sin(pi * (x - 0.2) / 0.6), 2) : 0.0;
    });
    const Grid g = Grid::unit(4001);
    const double exact = 0.3;  // 0.6 * 1/2
    for (double eps : {0.1, 0.05, 0.01}) {
        EXPECT_NEAR(integrate(mollify(f, Mollifier::bump(), eps, g)), exact, 1e-6);
    }
}

TEST(Mollify, SmoothConvergenceMonotone) {
    const auto f = DistributionSpec::smooth([](double x) { return std::cos(3.0 * x) + x; });
    const Grid g = Grid::unit(4001);
    const auto exact = SampledFunction::sample(g, [](double x) { return std::cos(3.0 * x) + x; });
    double prev = INFINITY;
    for (double eps = 0.2; eps > 0.005; eps /= 2) {
        const double err = l2_norm(mollify(f, Mollifier::bump(), eps, g) - exact);
        EXPECT_LE(err, prev * 1.1);
        prev = err;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(Mollify, RejectsBadEpsilonAndWarns) {
    const Grid g = Grid::unit(201);
    const auto spec = DistributionSpec::delta(0.5);
    EXPECT_THROW(mollify(spec, Mollifier::bump(), 0.0, g), std::invalid_argument);
    EXPECT_THROW(mollify(spec, Mollifier::bump(), -0.1, g), std::invalid_argument);
    EXPECT_THROW(mollify(spec, Mollifier::bump(), 0.001, g), std::invalid_argument);
    Diagnostics diag;
    mollify(spec, Mollifier::bump(), 0.02, g, &diag);  // h = 0.005 > eps/10
    EXPECT_EQ(diag.warnings.size(), 1u);
    Diagnostics clip;
    mollify(DistributionSpec::delta(0.01), Mollifier::bump(), 0.05, Grid::unit(2001), &clip);
    ASSERT_EQ(clip.warnings.size(), 1u);
    EXPECT_NE(clip.warnings[0].find("clipped"), std::string::npos);
}

TEST(Mollify, ClampExtensionKeepsConstants) {
    const Grid g(0.0, 2.0, 401);
    const auto out = mollify(DistributionSpec::constant(1.0), Mollifier::bump(), 0.1, g, nullptr, Extension::Clamp);
    for (double v : out.values) EXPECT_NEAR(v, 1.0, 1e-12);
    const auto zero_ext = mollify(DistributionSpec::constant(1.0), Mollifier::bump(), 0.1, g);
    EXPECT_NEAR(zero_ext[0], 0.5, 1e-12);
}

TEST(Mollify, OddExtensionKeepsDirichletData) {
    const Grid g = Grid::unit(2001);
    const auto sine = DistributionSpec::smooth([](double x) { return std::sin(pi * x); });
    const double eps = 0.05;
    const auto out = mollify(sine, Mollifier::bump(), eps, g, nullptr, Extension::Odd);
    EXPECT_NEAR(out[0], 0.0, 1e-14);
    EXPECT_NEAR(out[2000], 0.0, 1e-14);
    // sin(pi x) is odd about both ends, so mollification only multiplies it by the kernel's cosine transform
    const auto rule = gauss_legendre(16);
    const Mollifier k = Mollifier::bump();
    const double factor = integrate_gauss([&](double s) { return std::cos(pi * eps * s) * k(s); }, -1.0, 1.0, rule, 64);
    for (std::size_t i = 0; i < g.size(); i += 50) EXPECT_NEAR(out[i], factor * std::sin(pi * g[i]), 1e-12);
    const auto zero_ext = mollify(sine, Mollifier::bump(), eps, g);
    EXPECT_GT(zero_ext[0], 1e-3);
}

TEST(Mollify, OddExtensionDeltaImages) {
    const Grid g = Grid::unit(2001);
    const auto out = mollify(DistributionSpec::delta(0.02), Mollifier::bump(), 0.05, g, nullptr, Extension::Odd);
    EXPECT_NEAR(out[0], 0.0, 1e-12);
    EXPECT_THROW(mollify(DistributionSpec::derivative_of([](double x) { return x; }), Mollifier::bump(), 0.05, g,
                         nullptr, Extension::Odd),
                 std::invalid_argument);
}

TEST(Mollifier, CdfAndJumpSampling) {
    for (const auto& k : {Mollifier::bump(), Mollifier::truncated_gaussian()}) {
        EXPECT_EQ(k.cdf(-1.0), 0.0);
        EXPECT_EQ(k.cdf(1.0), 1.0);
        EXPECT_NEAR(k.cdf(0.0), 0.5, 1e-14);
        EXPECT_NEAR(k.cdf(0.3) + k.cdf(-0.3), 1.0, 1e-14);
        EXPECT_NEAR((k.cdf(0.2 + 1e-5) - k.cdf(0.2 - 1e-5)) / 2e-5, k(0.2), 1e-8);
    }
    const Mollifier tg = Mollifier::truncated_gaussian();
    EXPECT_NEAR(tg.sampled(0.1, 0.1), 0.5 * tg.edge_value() / 0.1, 1e-12);
    EXPECT_EQ(Mollifier::bump().sampled(0.1, 0.1), 0.0);
}

TEST(RegularizePotential, TruncatedKernelNuIndependentOfGridAlignment) {
    // eps = 10 h puts the kernel edges on nodes; nu must not depend on that
    const double eps = 1.0 / 128.0;
    const Mollifier tg = Mollifier::truncated_gaussian();
    for (std::size_t m : {1281u, 2001u, 2561u}) {
        const Grid g = Grid::unit(m);
        const auto pot = regularize_potential(DistributionSpec::delta(0.5), tg, eps, g);
        EXPECT_NEAR(pot.nu[m - 1], 1.0, 1e-13) << m;
        for (std::size_t i = 0; i < m; i += 7) {
            EXPECT_NEAR(pot.nu[i], tg.cdf((g[i] - 0.5) / eps), 1e-14);
        }
    }
}

TEST(RegularizePotential, DeltaGivesSmoothedStep) {
    const Grid g = Grid::unit(2001);
    const auto pot = regularize_potential(DistributionSpec::delta(0.5), Mollifier::bump(), 0.05, g);
    EXPECT_EQ(pot.nu[0], 0.0);
    EXPECT_NEAR(pot.nu[2000], 1.0, 1e-8);
}

TEST(RegularizePotential, ZeroPotential) {
    const Grid g = Grid::unit(501);
    const auto pot = regularize_potential(DistributionSpec::constant(0.0), Mollifier::bump(), 0.05, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(pot.q[i], 0.0);
        EXPECT_EQ(pot.nu[i], 0.0);
    }
}

TEST(RegularizePotential, DerivativeOfSquare) {
    // nu(x) = x^2: q_eps approximates 2x in the interior and nu_eps approximates x^2 to O(eps^2).
    const Grid g = Grid::unit(4001);
    const double eps = 0.02;
    const auto pot = regularize_potential(DistributionSpec::derivative_of([](double x) { return x * x; }),
                                          Mollifier::bump(), eps, g);
    double nu_err = 0.0, q_err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g[i];
        if (x < eps || x > 1.0 - eps) continue;
        nu_err = std::max(nu_err, std::abs(pot.nu[i] - x * x));
        q_err = std::max(q_err, std::abs(pot.q[i] - 2.0 * x));
    }
    EXPECT_LT(nu_err, 2.0 * eps * eps);
    EXPECT_LT(q_err, 1e-8);
}

TEST(RegularizePotential, NuDerivativeReproducesQ) {
    const Grid g = Grid::unit(4001);
    const auto pot = regularize_potential(DistributionSpec::delta(0.4, 1.5), Mollifier::bump(), 0.05, g);
    const double h = g.spacing();
    const double qmax = sup_norm(pot.q);
    double q2 = 0.0;  // bound on q'' for the O(h^2) term
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        q2 = std::max(q2, std::abs(pot.q[i + 1] - 2 * pot.q[i] + pot.q[i - 1]) / (h * h));
    }
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
        const double fd = (pot.nu[i + 1] - pot.nu[i - 1]) / (2 * h);
        EXPECT_LE(std::abs(fd - pot.q[i]), 1e-6 * qmax + h * h * q2);
    }
}

TEST(FitModerateness, PeakOfMollifiedDelta) {
    const auto eps = std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<double> norms;
    for (double e : eps) norms.push_back(0.8285688398691052 / e);
    const auto net = fit_moderateness(eps, norms);
    EXPECT_EQ(net.N, 1);
    EXPECT_NEAR(net.C, 0.8285688398691052, 1e-12);
    EXPECT_LT(net.residual, 1e-10);
}

TEST(FitModerateness, ConstantAndDecayingNets) {
    const auto eps = std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4};
    auto c = fit_moderateness(eps, {5, 5, 5, 5});
    EXPECT_EQ(c.N, 0);
    EXPECT_NEAR(c.C, 5.0, 1e-12);
    auto d = fit_moderateness(eps, {1e-2, 1e-4, 1e-6, 1e-8});
    EXPECT_EQ(d.N, 0);
    EXPECT_NEAR(d.C, 1e-2, 1e-15);
}

TEST(FitModerateness, ZeroNormFlagged) {
    const auto net = fit_moderateness({1e-1, 1e-2, 1e-3, 1e-4}, {0, 1, 2, 3});
    EXPECT_TRUE(net.identically_small);
    EXPECT_EQ(net.N, 0);
    EXPECT_EQ(net.C, 3.0);
}

TEST(FitModerateness, ScaleEquivariant) {
    const auto eps = dyadic_net(3, 10);
    std::vector<double> norms;
    for (double e : eps) norms.push_back(2.0 / std::sqrt(e) + 1.0);
    const auto base = fit_moderateness(eps, norms);
    for (double alpha : {0.01, 3.0, 1e4}) {
        std::vector<double> scaled(norms);
        for (double& v : scaled) v *= alpha;
        const auto s = fit_moderateness(eps, scaled);
        EXPECT_EQ(s.N, base.N);
        EXPECT_NEAR(s.C, alpha * base.C, 1e-12 * alpha * base.C);
    }
}

TEST(FitModerateness, Preconditions) {
    EXPECT_THROW(fit_moderateness({0.1, 0.05, 0.02}, {1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(fit_moderateness({0.1, 0.09, 0.08, 0.07}, {1, 1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(fit_moderateness({0.1, 0.01, 0.001, 0.0001}, {1, -1, 1, 1}), std::invalid_argument);
}

TEST(CheckNegligibility, IdenticalNets) {
    const auto r = check_negligibility(dyadic_net(3, 10), std::vector<double>(8, 0.0));
    EXPECT_TRUE(r.identically_zero);
    EXPECT_TRUE(std::isinf(r.slope));
    for (const auto& o : r.orders) EXPECT_TRUE(o.pass);
}

TEST(CheckNegligibility, LinearDecay) {
    const auto eps = dyadic_net(3, 10);
    const auto r = check_negligibility(eps, eps, {1, 2, 3});
    EXPECT_NEAR(r.slope, 1.0, 1e-12);
    EXPECT_TRUE(r.orders[0].pass);
    EXPECT_FALSE(r.orders[1].pass);
    EXPECT_FALSE(r.orders[2].pass);
}

TEST(CheckNegligibility, CubicDecayPassesAllOrders) {
    const auto eps = dyadic_net(3, 10);
    std::vector<double> d;
    for (double e : eps) d.push_back(7.0 * e * e * e);
    const auto r = check_negligibility(eps, d);
    EXPECT_NEAR(r.slope, 3.0, 1e-12);
    for (const auto& o : r.orders) EXPECT_TRUE(o.pass);
}
