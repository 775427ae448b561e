#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "asd/decomposition.hpp"

using namespace asd;

namespace {

const Vec4 kK{0.0, -0.2, -1.0, -2.0};

SystemMatrices scenario_mats() { return SystemMatrices::make(kK, 0.2, 1.0); }

// Secondary system written out by hand:
// (x2, -x1 + eps sin(x3 + r) - eps sin r + g, x4, K^T x + v)
Vec4 secondary_expanded(const Vec4& x, double v, double y_p, double ydot_p, const Vec4& K, double eps, double a,
                        double r) {
    const double g = eps * std::sin(y_p + x[2]) - eps * std::sin(r + x[2]) - eps * (y_p + a * ydot_p - r);
    return {x[1], -x[0] + eps * std::sin(x[2] + r) - eps * std::sin(r) + g, x[3],
            K[0] * x[0] + K[1] * x[1] + K[2] * x[2] + K[3] * x[3] + v};
}

}  // namespace

TEST(BuildA, ScenarioMatrix) {
    const Matrix expected{{0, 1, 0, 0}, {-1, 0, 0.2, 0.2}, {0, 0, 0, 1}, {0, -0.2, -1, -2}};
    const Matrix A = build_A(kK, 0.2, 1.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(A(i, j), expected(i, j), 1e-15) << i << "," << j;
}

TEST(BuildA, ZeroGainKeepsOnlyCouplingRow) {
    const Matrix A = build_A({0, 0, 0, 0}, 0.2, 1.0);
    const Matrix expected{{0, 1, 0, 0}, {-1, 0, 0.2, 0.2}, {0, 0, 0, 1}, {0, 0, 0, 0}};
    EXPECT_LT((A - expected).max_abs(), 1e-15);
}

TEST(BuildA, Errors) {
    EXPECT_THROW(build_A(kK, 1.2, 1.0), ParameterError);
    EXPECT_THROW(build_A(kK, 0.2, 0.0), ParameterError);
    EXPECT_THROW(build_A(kK, 0.2, -1.0), ParameterError);
}

TEST(BuildA, ScenarioMarginAndGate) {
    const auto mats = scenario_mats();
    EXPECT_NEAR(mats.max_real_eig_A(), -0.00999796, 1e-7);
    EXPECT_NO_THROW(mats.require_stable());
    const auto unstable = SystemMatrices::make({0, 0, 0, 0}, 0.2, 1.0);
    EXPECT_THROW(unstable.require_stable(), ConfigurationError);
}

TEST(Phi, Examples) {
    EXPECT_EQ(phi(0.0, 0.0, 0.2, 1.0), (Vec4{0, 0, 0, 0}));
    const Vec4 p = phi(0.5, 0.0, 0.2, 1.0);
    EXPECT_NEAR(p[1], 0.2 * (std::sin(0.5) - 0.5), 1e-15);
    EXPECT_NEAR(p[1], -0.00411489, 1e-8);
    EXPECT_EQ(p[0], 0.0);
    EXPECT_EQ(p[2], 0.0);
    EXPECT_EQ(p[3], 0.0);
}

TEST(ZeroTermIdentity, ExactForRandomStates) {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> ud(-5.0, 5.0);
    std::uniform_real_distribution<double> ue(0.05, 0.95), ua(0.2, 3.0);
    for (int k = 0; k < 1000; ++k) {
        const double eps = ue(rng), a = ua(rng);
        const Vec4 x{ud(rng), ud(rng), ud(rng), ud(rng)};
        Vec4 filt{};
        for (std::size_t i = 0; i < 4; ++i) filt[i] = basis::C[i] + a * basis::B[i];
        const Vec4 lhs = (eps * outer(basis::D, filt)) * x;
        const Vec4 rhs{0.0, eps * (x[2] + a * x[3]), 0.0, 0.0};
        // same products, different association: equal to a few ulps
        const double scale = std::abs(eps * x[2]) + std::abs(eps * a * x[3]);
        for (std::size_t i = 0; i < 4; ++i)
            EXPECT_LE(std::abs(lhs[i] - rhs[i]), 4.0 * std::numeric_limits<double>::epsilon() * scale);
    }
}

TEST(ZeroTermIdentity, TransformedModelMatchesPlant) {
    // With v = u - K^T x and F_d entering through D, A x + B v + phi + D F_d
    // reproduces the plant rates when the compensation residual is included.
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    const auto mats = scenario_mats();
    const PlantParams plant(0.2);
    for (int k = 0; k < 200; ++k) {
        const Vec4 x{ud(rng), ud(rng), ud(rng), ud(rng)};
        const double F_d = ud(rng), v = ud(rng), F_hat = ud(rng);
        const double c = coupling_coefficient(x[2], plant);
        const double u = dot(mats.K, x) + v + c * F_hat;
        const Vec4 expected = tora_dynamics(x, u, F_d, plant);
        const Vec4 got = transformed_dynamics(x, v, F_d, residual_input(c, F_hat - F_d), mats);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);
    }
}

TEST(PrimaryDynamics, Examples) {
    const auto mats = scenario_mats();
    const Vec4 zero{};
    EXPECT_EQ(primary_dynamics(zero, 0.0, 0.0, zero, mats, 0.0), zero);
    EXPECT_EQ(primary_dynamics(zero, 1.0, 0.0, zero, mats, 0.0), (Vec4{0, 0, 0, 1}));
    const Vec4 d = primary_dynamics(zero, 0.0, 0.02, zero, mats, 0.5);
    EXPECT_NEAR(d[1], 0.02 - 0.00411489, 1e-8);
    EXPECT_NEAR(d[1], 0.02 + 0.2 * (std::sin(0.5) - 0.5), 1e-15);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[2], 0.0);
    EXPECT_EQ(d[3], 0.0);
}

TEST(SecondaryDynamics, Examples) {
    const auto mats = scenario_mats();
    const Vec4 zero{};
    EXPECT_EQ(secondary_dynamics(zero, 0.0, 0.5, 0.0, mats, 0.5), zero);
    EXPECT_EQ(secondary_dynamics(zero, 1.0, 0.5, 0.0, mats, 0.5), (Vec4{0, 0, 0, 1}));
    // x_s = (0,0,0.1,0): A row 2 contributes 0.02, which cancels -eps (y - r);
    // row 4 is K^T x_s = -0.1.
    const Vec4 d = secondary_dynamics({0, 0, 0.1, 0}, 0.0, 0.5, 0.0, mats, 0.5);
    EXPECT_NEAR(d[0], 0.0, 1e-15);
    EXPECT_NEAR(d[1], 0.2 * (std::sin(0.6) - std::sin(0.5)), 1e-15);
    EXPECT_NEAR(d[1], 0.0170433870, 1e-10);
    EXPECT_NEAR(d[2], 0.0, 1e-15);
    EXPECT_NEAR(d[3], -0.1, 1e-15);
}

TEST(SecondaryDynamics, CompactEqualsExpandedForm) {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    std::uniform_real_distribution<double> ue(0.05, 0.9), ua(0.5, 2.0), ur(-1.4, 1.4);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double eps = ue(rng), a = ua(rng), r = ur(rng);
        const Vec4 K{0.0, -eps, -1.0, -2.0};
        const auto mats = SystemMatrices::make(K, eps, a);
        const Vec4 x{ud(rng), ud(rng), ud(rng), ud(rng)};
        const double v = ud(rng), y_p = ud(rng), ydot_p = ud(rng);
        const Vec4 compact = secondary_dynamics(x, v, y_p, ydot_p, mats, r);
        const Vec4 expanded = secondary_expanded(x, v, y_p, ydot_p, K, eps, a, r);
        for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(compact[i] - expanded[i]));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(SumProperty, PrimaryPlusSecondaryIsTransformedOriginal) {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    const auto mats = scenario_mats();
    const double r = 0.5;
    for (int k = 0; k < 1000; ++k) {
        const Vec4 xp{ud(rng), ud(rng), ud(rng), ud(rng)};
        const Vec4 xs{ud(rng), ud(rng), ud(rng), ud(rng)};
        const double vp = ud(rng), vs = ud(rng), F_d = ud(rng);
        const Vec4 varphi = residual_input(ud(rng), ud(rng));
        const Vec4 dp = primary_dynamics(xp, vp, F_d, varphi, mats, r);
        const Vec4 ds = secondary_dynamics(xs, vs, xp[2], xp[3], mats, r);
        Vec4 x{};
        for (std::size_t i = 0; i < 4; ++i) x[i] = xp[i] + xs[i];
        const Vec4 d = transformed_dynamics(x, vp + vs, F_d, varphi, mats);
        for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(dp[i] + ds[i], d[i], 1e-12);
    }
}

TEST(VerifyAdditiveDecomposition, IdenticalSplitHasNoSecondary) {
    auto f = [](double t, const Vector& x) { return Vector{x[1], -std::sin(x[0]) + 0.1 * std::cos(t)}; };
    const auto res = verify_additive_decomposition(f, f, Vector{0.3, 0.0}, Vector{0.3, 0.0}, 10.0, 1e-3);
    EXPECT_EQ(res.steps, 10000u);
    EXPECT_LT(res.max_deviation, 1e-12);
}

TEST(VerifyAdditiveDecomposition, LinearSuperposition) {
    const Matrix M{{0.0, 1.0}, {-2.0, -0.3}};
    auto f = [&M](double, const Vector& x) { return M * std::span<const double>(x); };
    const auto res = verify_additive_decomposition(f, f, Vector{1.0, -0.5}, Vector{0.2, 0.7}, 10.0, 1e-3);
    EXPECT_LT(res.max_deviation, 1e-8);
}

TEST(VerifyAdditiveDecomposition, NonlinearSplitWithLinearPrimary) {
    auto original = [](double t, const Vector& x) { return Vector{x[1], -x[0] - 0.2 * x[1] + 0.3 * std::sin(x[0]) + std::sin(t)}; };
    auto primary = [](double t, const Vector& x) { return Vector{x[1], -x[0] - 0.2 * x[1] + std::sin(t)}; };
    const auto res = verify_additive_decomposition(original, primary, Vector{0.5, 0.0}, Vector{0.0, 0.0}, 20.0, 1e-3);
    EXPECT_LT(res.max_deviation, 1e-8);
}

TEST(VerifyAdditiveDecomposition, Errors) {
    auto f = [](double, const Vector& x) { return x; };
    EXPECT_THROW(verify_additive_decomposition(f, f, Vector{1.0}, Vector{1.0, 2.0}, 1.0, 0.1), DimensionError);
    EXPECT_THROW(verify_additive_decomposition(f, f, Vector{1.0}, Vector{1.0}, 1.0, 0.0), ParameterError);
}
