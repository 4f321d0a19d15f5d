#include "chlab/potential.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace chlab;

namespace {

// Independent envelope oracle: W**(v) = max over affine minorants
// l_s(x) = min_j (W_j - s v_j) + s v, evaluated on a dense slope grid.
// Different algorithm from the monotone chain on purpose.
double envelope_oracle(const std::vector<std::pair<double, double>>& samples, double v,
                       int n_slopes = 4096) {
    double smin = std::numeric_limits<double>::infinity();
    double smax = -std::numeric_limits<double>::infinity();
    for (size_t j = 1; j < samples.size(); ++j) {
        const double s =
            (samples[j].second - samples[j - 1].second) / (samples[j].first - samples[j - 1].first);
        smin = std::min(smin, s);
        smax = std::max(smax, s);
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n_slopes; ++i) {
        const double s = smin + (smax - smin) * i / n_slopes;
        double intercept = std::numeric_limits<double>::infinity();
        for (const auto& p : samples) intercept = std::min(intercept, p.second - s * p.first);
        best = std::max(best, intercept + s * v);
    }
    return best;
}

// Brute-force psi oracle: plain max over a uniform c grid.
double psi_oracle(const std::function<double(double)>& W, double a, double b, int points) {
    const double s = (W(b) - W(a)) / (b - a);
    double best = 0.0;
    for (int i = 0; i <= points; ++i) {
        const double c = a + (b - a) * i / points;
        best = std::max(best, W(a) - W(c) + s * (c - a));
    }
    return best;
}

std::vector<std::pair<double, double>> double_well_samples(int n) {
    std::vector<std::pair<double, double>> s(n);
    for (int i = 0; i < n; ++i) {
        const double v = -3.0 + 6.0 * i / (n - 1);
        s[i] = {v, (1.0 - v * v) * (1.0 - v * v) / 4.0};
    }
    return s;
}

}  // namespace

TEST(Potential, DoubleWellBasics) {
    auto m = build_double_well();
    EXPECT_DOUBLE_EQ(m.eval(0.0), 0.25);
    EXPECT_DOUBLE_EQ(m.d1(2.0), 6.0);
    EXPECT_DOUBLE_EQ(m.d2(0.0), -1.0);
    EXPECT_FALSE(m.growth_warning);
}

TEST(Potential, DoubleWellSigmaG) {
    auto m = build_double_well();
    ASSERT_EQ(m.sigma_G.size(), 1u);
    const double cell = m.cell();
    EXPECT_NEAR(m.sigma_G[0].lo, -1.0, cell);
    EXPECT_NEAR(m.sigma_G[0].hi, 1.0, cell);
}

TEST(Potential, DoubleWellSigmaLSignScanOracle) {
    auto m = build_double_well();
    // Sign-scan oracle on a fine grid, independent of the tabulation.
    const int N = 1000000;
    double lo = 0.0, hi = 0.0;
    bool found = false;
    for (int i = 0; i < N; ++i) {
        const double v = -3.0 + 6.0 * i / (N - 1);
        if (m.d2(v) < 0.0) {
            if (!found) lo = v;
            hi = v;
            found = true;
        }
    }
    ASSERT_TRUE(found);
    ASSERT_EQ(m.sigma_L.size(), 1u);
    EXPECT_NEAR(m.sigma_L[0].lo, lo, m.cell());
    EXPECT_NEAR(m.sigma_L[0].hi, hi, m.cell());
    EXPECT_NEAR(m.sigma_L[0].lo, -1.0 / std::sqrt(3.0), m.cell());
    EXPECT_NEAR(m.sigma_L[0].hi, 1.0 / std::sqrt(3.0), m.cell());
}

TEST(Potential, SigmaLContainedInSigmaG) {
    auto m = build_double_well();
    const double tol = 2.0 * m.cell();
    for (const auto& l : m.sigma_L) {
        bool contained = false;
        for (const auto& g : m.sigma_G)
            if (l.lo >= g.lo - tol && l.hi <= g.hi + tol) contained = true;
        EXPECT_TRUE(contained);
    }
}

TEST(Potential, EnvelopePropertyRandomProbes) {
    auto m = build_double_well();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
        const double v = dist(rng);
        EXPECT_LE(m.envelope_value(v), m.eval(v) + 1e-12);
        EXPECT_GE(m.envelope_value(v), 0.0);
    }
}

TEST(Potential, EnvelopeTabulatedConvexity) {
    auto m = build_double_well();
    const int n = static_cast<int>(m.hull_v.size());
    for (int i = 1; i + 1 < n; ++i) {
        const double d2f = m.envelope_value(m.hull_v[i - 1]) -
                           2.0 * m.envelope_value(m.hull_v[i]) +
                           m.envelope_value(m.hull_v[i + 1]);
        EXPECT_GE(d2f, -1e-12);
    }
}

TEST(Potential, EnvelopeZeroOnWellViaIndependentOracle) {
    auto m = build_double_well();
    auto samples = double_well_samples(4096);
    // Oracle agreement at v = 0 and max |W**| over [-1, 1].
    EXPECT_NEAR(envelope_oracle(samples, 0.0), 0.0, 1e-8);
    EXPECT_NEAR(m.envelope_value(0.0), 0.0, 1e-8);
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double v = -1.0 + 2.0 * i / 200;
        worst = std::max(worst, std::fabs(m.envelope_value(v)));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(Potential, SigmaGConsistencyEta) {
    auto m = build_double_well();
    const double eta = 1e-10 * (1.0 + m.max_w_sampled);
    const double cell = m.cell();
    for (double v : m.hull_v) {
        const double gap = m.eval(v) - m.envelope_value(v);
        const bool in = m.in_sigma_G(v);
        const double bdist = m.dist_to_sigma_G(v);
        if (gap > eta) {
            // strictly unstable values must be inside Sigma_G up to one cell
            EXPECT_TRUE(in || bdist <= cell) << "v=" << v << " gap=" << gap;
        } else {
            EXPECT_TRUE(!in || std::min(std::fabs(v - m.sigma_G[0].lo),
                                        std::fabs(v - m.sigma_G[0].hi)) <= cell)
                << "v=" << v;
        }
    }
}

TEST(Potential, ConvexEnvelopeOfDoubleWellSamples) {
    auto [nodes, segments] = convex_envelope(double_well_samples(4096));
    ASSERT_EQ(segments.size(), 1u);
    EXPECT_NEAR(segments[0].lo, -1.0, 6.0 / 4095);
    EXPECT_NEAR(segments[0].hi, 1.0, 6.0 / 4095);
    EXPECT_NEAR(segments[0].slope, 0.0, 1e-10);
}

TEST(Potential, ConvexInputHasNoAffineSegments) {
    std::vector<std::pair<double, double>> s(512);
    for (int i = 0; i < 512; ++i) {
        const double v = -2.0 + 4.0 * i / 511;
        s[i] = {v, v * v};
    }
    auto [nodes, segments] = convex_envelope(s);
    EXPECT_TRUE(segments.empty());
    EXPECT_EQ(nodes.size(), s.size());
}

TEST(Potential, ConvexEnvelopeRejectsTooFewPoints) {
    std::vector<std::pair<double, double>> s = {{0.0, 0.0}, {1.0, 1.0}};
    EXPECT_THROW(convex_envelope(s), std::invalid_argument);
}

TEST(Potential, EnvelopeDerivativeValues) {
    auto m = build_double_well();
    EXPECT_NEAR(m.envelope_derivative(0.0), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(m.envelope_derivative(2.0), 6.0);
    EXPECT_THROW(m.envelope_derivative(3.5), std::domain_error);
}

TEST(Potential, EnvelopeDerivativeMonotone) {
    auto m = build_double_well();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int i = 0; i < 5000; ++i) {
        double v1 = dist(rng), v2 = dist(rng);
        if (v1 > v2) std::swap(v1, v2);
        EXPECT_LE(m.envelope_derivative(v1), m.envelope_derivative(v2) + 1e-14);
    }
}

TEST(Potential, BuildCustomConvex) {
    auto m = build_custom([](double v) { return v * v; }, [](double v) { return 2.0 * v; },
                          [](double) { return 2.0; }, -2.0, 2.0, 1024);
    EXPECT_TRUE(m.sigma_G.empty());
    for (double v : m.hull_v) EXPECT_NEAR(m.envelope_value(v), m.eval(v), 1e-12);
}

TEST(Potential, BuildCustomMatchesAnalyticDoubleWell) {
    auto analytic = build_double_well();
    auto custom = build_custom([](double v) { return (1.0 - v * v) * (1.0 - v * v) / 4.0; },
                               [](double v) { return v * v * v - v; },
                               [](double v) { return 3.0 * v * v - 1.0; }, -3.0, 3.0, 4096);
    ASSERT_EQ(custom.sigma_G.size(), analytic.sigma_G.size());
    EXPECT_NEAR(custom.sigma_G[0].lo, analytic.sigma_G[0].lo, custom.cell());
    EXPECT_NEAR(custom.sigma_G[0].hi, analytic.sigma_G[0].hi, custom.cell());
}

TEST(Potential, BuildCustomAsymmetricTwoWell) {
    auto W = [](double v) { return (1.0 - v * v) * (1.0 - v * v) / 4.0 + 0.1 * v + 0.4; };
    auto m = build_custom(W, [](double v) { return v * v * v - v + 0.1; },
                          [](double v) { return 3.0 * v * v - 1.0; }, -3.0, 3.0, 4096);
    ASSERT_EQ(m.sigma_G.size(), 1u);

    // Oracle: (W + l)** = W** + l for affine l, so the gap W - W** and hence
    // Sigma_G are invariant under the tilt; endpoints stay at those of the
    // untilted double well.
    auto untilted = build_double_well();
    EXPECT_NEAR(m.sigma_G[0].lo, untilted.sigma_G[0].lo, m.cell());
    EXPECT_NEAR(m.sigma_G[0].hi, untilted.sigma_G[0].hi, m.cell());
    // Gap crosses eta just inside the component.
    const double eta = 1e-10 * (1.0 + m.max_w_sampled);
    const double inside = 0.95, outside = 1.05;
    EXPECT_GT(m.eval(inside) - m.envelope_value(inside), eta);
    EXPECT_GT(m.eval(-inside) - m.envelope_value(-inside), eta);
    EXPECT_LE(m.eval(outside) - m.envelope_value(outside), 1e-6);
    EXPECT_LE(m.eval(-outside) - m.envelope_value(-outside), 1e-6);
}

TEST(Potential, GrowthWarningOnSteepPotential) {
    // |W'| / (1 + W) ~ 600 |v| for W = exp(300 v^2) - 1: well past the cap.
    auto m = build_custom([](double v) { return std::exp(300.0 * v * v) - 1.0; },
                          [](double v) { return 600.0 * v * std::exp(300.0 * v * v); },
                          [](double v) {
                              return (600.0 + 360000.0 * v * v) * std::exp(300.0 * v * v);
                          },
                          -0.5, 0.5, 256);
    EXPECT_TRUE(m.growth_warning);
    EXPECT_GT(m.growth_constant, 100.0);
    EXPECT_FALSE(build_double_well().growth_warning);
}

TEST(Potential, RejectsNonCoercive) {
    EXPECT_THROW(build_custom([](double v) { return std::exp(v); },
                              [](double v) { return std::exp(v); },
                              [](double v) { return std::exp(v); }, -2.0, 2.0, 256),
                 std::invalid_argument);
}

TEST(Potential, RejectsDegenerateDomainAndSmallTable) {
    auto W = [](double v) { return v * v; };
    auto d1 = [](double v) { return 2.0 * v; };
    auto d2 = [](double) { return 2.0; };
    EXPECT_THROW(build_custom(W, d1, d2, 1.0, 1.0, 256), std::invalid_argument);
    EXPECT_THROW(build_custom(W, d1, d2, -1.0, 1.0, 32), std::invalid_argument);
}

TEST(Potential, RejectsAffineStretch) {
    // Flat (affine) on [-1, 1], strictly convex outside.
    auto W = [](double v) {
        const double t = std::max(std::fabs(v) - 1.0, 0.0);
        return t * t;
    };
    auto d1 = [](double v) {
        const double t = std::max(std::fabs(v) - 1.0, 0.0);
        return 2.0 * t * (v > 0 ? 1.0 : -1.0);
    };
    auto d2 = [](double v) { return std::fabs(v) > 1.0 ? 2.0 : 0.0; };
    EXPECT_THROW(build_custom(W, d1, d2, -3.0, 3.0, 1024), std::invalid_argument);
}

TEST(Potential, PsiAgainstBruteForceOracle) {
    auto m = build_double_well();
    const double oracle = psi_oracle(m.eval, 1.0, 2.0, 100000);
    // Sanity against the known two-decimal value of the interior maximizer
    // bracket (c* solves c^3 - c = 9/4).
    EXPECT_NEAR(oracle, 0.746, 2e-3);
    EXPECT_NEAR(psi(m, 1.0, 2.0), oracle, 1e-6);
}

TEST(Potential, PsiZeroOnConcaveStretch) {
    auto m = build_double_well();
    EXPECT_LE(psi(m, -0.4, 0.4), 1e-12);
}

TEST(Potential, PsiNonnegativeOnRandomPairs) {
    auto m = build_double_well();
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
        double a = dist(rng), b = dist(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        EXPECT_GE(psi(m, a, b, 128), 0.0);
    }
}

TEST(Potential, PsiRejectsBadOrder) {
    auto m = build_double_well();
    EXPECT_THROW(psi(m, 2.0, 1.0), std::invalid_argument);
    EXPECT_THROW(psi(m, 1.0, 1.0), std::invalid_argument);
}

TEST(Potential, PsiOrientationRederivation) {
    // Re-derive the same bracket scanning c from b down to a; the formula is
    // orientation-fixed so the maxima must agree.
    auto m = build_double_well();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> dist(-2.5, 2.5);
    for (int trial = 0; trial < 50; ++trial) {
        double a = dist(rng), b = dist(rng);
        if (std::fabs(a - b) < 1e-3) continue;
        if (a > b) std::swap(a, b);
        const double s = chord_slope(m, a, b);
        double rev = 0.0;
        const int N = 20000;
        for (int i = N; i >= 0; --i) {
            const double c = a + (b - a) * i / N;
            rev = std::max(rev, m.eval(a) - m.eval(c) + s * (c - a));
        }
        EXPECT_NEAR(psi(m, a, b), rev, 1e-7 + 1e-10);
    }
}

TEST(Potential, OmegaInfiniteWhenNoIntervalFits) {
    auto m = build_double_well();
    OmegaTable table(m, 2.0, 128, 128);
    EXPECT_TRUE(std::isinf(table.omega(4.5)));
}

TEST(Potential, OmegaMonotoneAndPositive) {
    auto m = build_double_well();
    OmegaTable table(m, 2.0, 512, 256);
    EXPECT_LE(table.omega(0.1), table.omega(0.5));
    for (double rho : {0.1, 0.5, 1.0}) EXPECT_GT(table.omega(rho), 0.0) << rho;

    // 20-point geometric rho grid in (0, 1]; omega nondecreasing throughout
    // and strictly decreasing on the 5 smallest values going down.
    std::vector<double> rho_grid(20), vals(20);
    for (int i = 0; i < 20; ++i)
        rho_grid[i] = 0.05 * std::pow(1.0 / 0.05, i / 19.0);
    for (int i = 0; i < 20; ++i) vals[i] = table.omega(rho_grid[i]);
    for (int i = 1; i < 20; ++i) EXPECT_LE(vals[i - 1], vals[i]) << "rho=" << rho_grid[i];
    for (int i = 1; i < 5; ++i) EXPECT_LT(vals[i - 1], vals[i]) << "tail rho=" << rho_grid[i];
}

TEST(Potential, OmegaRejectsBadArguments) {
    auto m = build_double_well();
    OmegaTable table(m, 2.0, 64, 64);
    EXPECT_THROW(table.omega(0.0), std::invalid_argument);
    EXPECT_THROW(OmegaTable(m, -1.0, 64, 64), std::invalid_argument);
}

TEST(Potential, EnvelopeCsvColumns) {
    auto m = build_double_well(128);
    std::stringstream ss;
    write_envelope_csv(ss, m);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "v,W,Wss,Wss_prime,in_sigma_G");
    int rows = 0, in_count = 0;
    std::string line;
    while (std::getline(ss, line)) {
        ++rows;
        if (!line.empty() && line.back() == '1') ++in_count;
    }
    EXPECT_EQ(rows, 128);
    EXPECT_GT(in_count, 0);
    EXPECT_LT(in_count, 128);
}
