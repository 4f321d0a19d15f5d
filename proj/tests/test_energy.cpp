#include "chlab/energy.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace chlab;

namespace {

PeriodicField random_smooth_field(int n, std::mt19937_64& rng, double mean = 0.0,
                                  double mode_amp = 0.3, int modes = 4) {
    std::uniform_real_distribution<double> dist(-mode_amp, mode_amp);
    std::vector<double> a(modes), b(modes);
    for (int k = 0; k < modes; ++k) {
        a[k] = dist(rng);
        b[k] = dist(rng);
    }
    return sampled_field(n, [&](double x) {
        double s = mean;
        for (int k = 0; k < modes; ++k)
            s += a[k] * std::cos(kTwoPi * (k + 1) * x) + b[k] * std::sin(kTwoPi * (k + 1) * x);
        return s;
    });
}

}  // namespace

TEST(Energy, ConstantFieldCostsThePotential) {
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    EXPECT_NEAR(energy_eps(m, ws, constant_field(256, 0.0), 0.1), 0.25, 1e-14);
    EXPECT_NEAR(energy_eps(m, ws, constant_field(256, 2.0), 0.1), 2.25, 1e-12);
}

TEST(Energy, SinusoidSplitsIntoGradientAndPotentialParts) {
    // Quadrature oracle at 10^6 points for int W(sin 2 pi x) dx; the exact
    // value is int cos^4(2 pi x)/4 dx = 3/32.
    auto m = build_double_well();
    double oracle = 0.0;
    const int N = 1000000;
    for (int i = 0; i < N; ++i) {
        const double u = std::sin(kTwoPi * (static_cast<double>(i) / N));
        oracle += m.eval(u);
    }
    oracle /= N;
    EXPECT_NEAR(oracle, 3.0 / 32.0, 1e-12);

    SpectralWorkspace ws(512);
    auto f = sinusoid_field(512, 0.0, 1.0, 1);
    const double eps = 0.1;
    const double grad_part = eps * eps * M_PI * M_PI;  // eps^2 (2 pi)^2 / 4
    EXPECT_NEAR(energy_eps(m, ws, f, eps), grad_part + oracle, 1e-10);
}

TEST(Energy, MonotoneInEps) {
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    std::mt19937_64 rng(1);
    auto f = random_smooth_field(256, rng);
    double prev = energy_eps(m, ws, f, 0.01);
    for (double eps : {0.05, 0.1, 0.5, 1.0}) {
        const double e = energy_eps(m, ws, f, eps);
        EXPECT_GE(e, prev);
        prev = e;
    }
    EXPECT_THROW(energy_eps(m, ws, f, 0.0), std::invalid_argument);
    EXPECT_THROW(energy_eps(m, ws, f, 1.5), std::invalid_argument);
}

TEST(Energy, RelaxedEnergyOnWellValuesVanishes) {
    auto m = build_double_well();
    auto f = sinusoid_field(256, 0.0, 0.9, 1);  // values in [-0.9, 0.9]
    EXPECT_NEAR(energy_star(m, f), 0.0, 1e-8);
    EXPECT_NEAR(energy_star(m, constant_field(256, 2.0)), 2.25, 1e-12);
}

TEST(Energy, RelaxedBelowEpsEnergyAlways) {
    auto m = build_double_well();
    SpectralWorkspace ws(128);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto f = random_smooth_field(128, rng, 0.0, 0.4);
        EXPECT_LE(energy_star(m, f), energy_eps(m, ws, f, 0.05) + 1e-13);
    }
}

TEST(Energy, ChemicalPotentialOfConstantAndSinusoid) {
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    auto w0 = chemical_potential(m, ws, constant_field(256, 0.0), 0.1);
    EXPECT_LE(linf_norm(w0), 1e-13);  // W'(0) = 0

    const double eps = 0.05;
    auto f = sinusoid_field(256, 0.0, 1.0, 1);
    auto w = chemical_potential(m, ws, f, eps);
    double maxerr = 0.0;
    for (int j = 0; j < w.n; ++j) {
        const double u = f.v[j];
        const double expected = (u * u * u - u) + eps * eps * kTwoPi * kTwoPi * u;
        maxerr = std::max(maxerr, std::fabs(w.v[j] - expected));
    }
    EXPECT_LE(maxerr, 1e-10);
}

TEST(Energy, ChemicalPotentialMeanIsMeanOfWPrime) {
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    std::mt19937_64 rng(3);
    auto f = random_smooth_field(256, rng, 0.3);
    auto w = chemical_potential(m, ws, f, 0.07);
    double wp = 0.0;
    for (double a : f.v) wp += m.d1(a);
    wp /= f.n;
    EXPECT_NEAR(w.mean(), wp, 1e-12);
}

TEST(Energy, SlopeOfConstantVanishes) {
    auto m = build_double_well();
    SpectralWorkspace ws(128);
    EXPECT_LE(slope_eps(m, ws, constant_field(128, 1.3), 0.1), 1e-12);
    EXPECT_LE(slope_star(m, constant_field(128, 1.3)), 1e-12);
}

TEST(Energy, SlopePrimalDualAgreement) {
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto f = random_smooth_field(256, rng, 0.2);
        const double p = slope_eps(m, ws, f, 0.05);
        const double d = slope_eps_dual(m, ws, f, 0.05);
        EXPECT_NEAR(p, d, 1e-8 * (1.0 + p));
    }
}

TEST(Energy, SlopeAgainstDenseFiniteDifferenceOracle) {
    // w(x) for f = sin(2 pi x) is analytic; the oracle differentiates it by
    // centered differences on a 10^6-point grid.
    auto m = build_double_well();
    const double eps = 0.1;
    const int N = 1000000;
    const double h = 1.0 / N;
    std::vector<double> w(N);
    for (int i = 0; i < N; ++i) {
        const double u = std::sin(kTwoPi * i * h);
        w[i] = (u * u * u - u) + eps * eps * kTwoPi * kTwoPi * u;
    }
    double s = 0.0;
    for (int i = 0; i < N; ++i) {
        const double d = (w[(i + 1) % N] - w[(i + N - 1) % N]) / (2.0 * h);
        s += d * d;
    }
    const double oracle = std::sqrt(s / N);

    SpectralWorkspace ws(512);
    EXPECT_NEAR(slope_eps(m, ws, sinusoid_field(512, 0.0, 1.0, 1), eps), oracle, 1e-6);
}

TEST(Energy, SlopeStarVanishesOnWellValues) {
    auto m = build_double_well();
    EXPECT_EQ(slope_star(m, sinusoid_field(512, 0.0, 0.9, 1)), 0.0);
}

TEST(Energy, SlopeStarMatchesChainRuleOutsideSigmaG) {
    auto m = build_double_well();
    SpectralWorkspace ws(512);
    auto f = sinusoid_field(512, 1.6, 0.4, 1);  // values in [1.2, 2.0]
    auto fx = derivative(ws, f, 1);
    double s = 0.0;
    for (int j = 0; j < f.n; ++j) {
        const double g = m.d2(f.v[j]) * fx.v[j];
        s += g * g;
    }
    const double chain = std::sqrt(s / f.n);
    const double got = slope_star(m, f);
    EXPECT_NEAR(got, chain, 0.02 * chain);
}

TEST(Energy, GradientCheckAlongTheFlowDirection) {
    // d/dh F_eps(f + h v) at h = 0 with v = w_xx equals -||w_x||^2.
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    std::mt19937_64 rng(6);
    auto f = random_smooth_field(256, rng, 0.2);
    const double eps = 0.1;
    auto w = chemical_potential(m, ws, f, eps);
    auto v = derivative(ws, w, 2);
    const double h = 1e-6;
    PeriodicField fp = f, fm = f;
    for (int j = 0; j < f.n; ++j) {
        fp.v[j] += h * v.v[j];
        fm.v[j] -= h * v.v[j];
    }
    const double fd = (energy_eps(m, ws, fp, eps) - energy_eps(m, ws, fm, eps)) / (2.0 * h);
    const double sl = slope_eps(m, ws, f, eps);
    EXPECT_NEAR(fd, -sl * sl, 1e-4 * sl * sl);
}

TEST(Energy, ReportFieldsAndCsv) {
    auto m = build_double_well();
    SpectralWorkspace ws(256);
    auto f = sinusoid_field(256, 1.6, 0.3, 1);
    auto r = make_energy_report(m, ws, f, 0.1);
    EXPECT_LE(r.F_star, r.F_eps);
    EXPECT_GE(r.slope_eps, 0.0);
    EXPECT_GE(r.slope_star, 0.0);
    EXPECT_NEAR(r.mass, 1.6, 1e-13);
    EXPECT_FALSE(r.excursion);
    EXPECT_EQ(r.chem_pot.n, 256);

    std::stringstream ss;
    write_energy_report_csv(ss, r, true);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "eps,F_eps,F_star,slope_eps,slope_star,mass");
    std::string row;
    std::getline(ss, row);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 5);
}

TEST(Energy, ExcursionFlag) {
    auto m = build_double_well();
    EXPECT_TRUE(range_excursion(m, constant_field(64, 3.5)));
    EXPECT_FALSE(range_excursion(m, constant_field(64, 2.9)));
}
