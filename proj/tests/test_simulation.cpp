#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "asd/asd.hpp"

using namespace asd;

namespace {

ScenarioConfig quiet_scenario() {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.r = 0.0;
    cfg.exo.w0 = {0.0, 0.0};
    return cfg;
}

double max_abs(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST(Gates, BuiltInScenariosPass) {
    const auto g1 = check_gates(scenarios::paper_1());
    EXPECT_TRUE(g1.passed());
    ASSERT_TRUE(g1.margin_A && g1.margin_Aa);
    EXPECT_NEAR(*g1.margin_A, -0.00999796, 1e-7);
    EXPECT_NEAR(*g1.margin_Aa, -0.018618393, 1e-8);
    const auto g2 = check_gates(scenarios::paper_2());
    EXPECT_TRUE(g2.passed());
    EXPECT_NEAR(*g2.margin_Aa, -0.008376307, 1e-8);
    EXPECT_EQ(g1.validation.checks.size(), 10u);
}

TEST(Gates, FailuresAreReportedNotThrown) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.epsilon = 1.2;
    const auto g = check_gates(cfg);
    EXPECT_FALSE(g.passed());
    EXPECT_EQ(g.validation.find(checks::kEpsilonRange)->status, CheckStatus::Fail);
    EXPECT_EQ(g.validation.find(checks::kAStable)->status, CheckStatus::Skipped);
    EXPECT_THROW(ClosedLoop{cfg}, ConfigurationError);

    cfg = scenarios::paper_1();
    cfg.b = 1.4;
    EXPECT_EQ(check_gates(cfg).validation.find(checks::kBacksteppingGain)->status, CheckStatus::Fail);
    EXPECT_THROW(ClosedLoop{cfg}, ConfigurationError);

    cfg = scenarios::paper_1();
    cfg.l2 = 0.0;
    EXPECT_EQ(check_gates(cfg).validation.find(checks::kObserverGains)->status, CheckStatus::Fail);

    cfg = scenarios::paper_1();
    cfg.K = {0, 0, 0, 0};
    EXPECT_EQ(check_gates(cfg).validation.find(checks::kAStable)->status, CheckStatus::Fail);
    EXPECT_THROW(ClosedLoop{cfg}, ConfigurationError);
}

TEST(Gates, UnitFrequencyOverrideDropsMode) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.exo.S = Matrix{{0, 2, 0, 0}, {-2, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, -1, 0}};
    cfg.exo.C_d = {1, 0, 1, 0};
    cfg.exo.w0 = {0, 0.02, 0, 0.02};
    EXPECT_FALSE(check_gates(cfg).passed());
    cfg.allow_unit_frequency = true;
    const auto g = check_gates(cfg);
    EXPECT_TRUE(g.passed());
    ASSERT_TRUE(g.internal_model);
    EXPECT_EQ(g.internal_model->order(), 2u);
    const ClosedLoop loop(cfg);
    EXPECT_EQ(loop.layout().m, 4u);
    EXPECT_EQ(loop.layout().q, 2u);
    EXPECT_EQ(loop.layout().size(), 4u + 4u + 4u + 1u + 3u + 4u);
}

TEST(ClosedLoop, LayoutSize) {
    EXPECT_EQ(ClosedLoop(scenarios::paper_1()).layout().size(), 10u + 3u * 2u);
    EXPECT_EQ(ClosedLoop(scenarios::paper_2()).layout().size(), 10u + 3u * 4u);
}

TEST(ClosedLoop, ZeroDerivativeAtGlobalEquilibrium) {
    const ClosedLoop loop(quiet_scenario());
    const Vector z(loop.layout().size(), 0.0);
    const Vector d = build_loop_dynamics(loop)(0.0, z);
    EXPECT_EQ(max_abs(d), 0.0);
}

TEST(ClosedLoop, InitialDerivativeScenario1) {
    const ClosedLoop loop(scenarios::paper_1());
    const auto& L = loop.layout();
    const auto ev = loop.evaluate(loop.initial_state());
    const Vector& d = ev.derivative;
    EXPECT_DOUBLE_EQ(d[L.w()], 0.04);
    EXPECT_DOUBLE_EQ(d[L.w() + 1], 0.0);
    // plant at rest, u = 0 (xi = 0, L2 = 0, v_s(0) = 0, F_d_hat = 0)
    EXPECT_EQ(ev.signals.u, 0.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(d[i], 0.0);
    // xi' = L1 e_p with e_p = -r
    EXPECT_DOUBLE_EQ(d[L.xi()], -0.5);
    EXPECT_DOUBLE_EQ(d[L.xi() + 1], -0.5);
    EXPECT_DOUBLE_EQ(d[L.xi() + 2], 0.0);
    // decomposition observer sees phi(0,0) - phi(r,0)
    EXPECT_NEAR(d[L.x_s_hat() + 1], -0.2 * (std::sin(0.5) - 0.5), 1e-15);
}

TEST(Simulate, EquilibriumPreserved) {
    const ClosedLoop loop(quiet_scenario());
    struct Probe {
        double worst = 0.0;
        void on_stage(std::size_t, int, double, const Vector&, const LoopSignals& s) {
            worst = std::max(worst, std::abs(s.u));
        }
        void on_step(std::size_t, double, const Vector& z) { worst = std::max(worst, max_abs(z)); }
    } probe;
    const auto res = simulate(loop, loop.initial_state(), 10.0, 1e-3, 1000, probe);
    EXPECT_EQ(res.report.steps, 10000u);
    EXPECT_EQ(probe.worst, 0.0);
    EXPECT_EQ(res.report.final_tracking_error, 0.0);
}

TEST(Simulate, GridAndSamples) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.duration = 2.0;
    cfg.record_stride = 250;
    const auto res = run(cfg);
    ASSERT_EQ(res.trajectory.size(), 9u);
    for (std::size_t k = 0; k < res.trajectory.size(); ++k) EXPECT_DOUBLE_EQ(res.trajectory.time[k], 0.25 * k);
    EXPECT_EQ(res.report.samples, 9u);
    EXPECT_TRUE(res.report.horizon_too_short);
    EXPECT_LT(res.report.decomposition_identity_residual, 1e-15);
}

TEST(Simulate, ZeroDurationGivesOneSample) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.duration = 0.0;
    const auto res = run(cfg);
    EXPECT_EQ(res.trajectory.size(), 1u);
    EXPECT_TRUE(res.report.horizon_too_short);
    EXPECT_EQ(res.report.steps, 0u);
    EXPECT_DOUBLE_EQ(res.report.final_tracking_error, 0.5);
}

TEST(Simulate, RejectsBadArguments) {
    const ClosedLoop loop(scenarios::paper_1());
    EXPECT_THROW(simulate(loop, loop.initial_state(), 1.0, 0.0, 1), ParameterError);
    EXPECT_THROW(simulate(loop, loop.initial_state(), -1.0, 1e-3, 1), ParameterError);
    EXPECT_THROW(simulate(loop, loop.initial_state(), 1.0, 1e-3, 0), ParameterError);
    EXPECT_THROW(simulate(loop, Vector(3, 0.0), 1.0, 1e-3, 1), DimensionError);
}

TEST(Simulate, BlowupReportsLastFiniteTime) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.step = 3.0;
    cfg.duration = 3000.0;
    try {
        (void)run(cfg);
        FAIL() << "expected blowup";
    } catch (const NumericalBlowup& e) {
        EXPECT_GE(e.time(), 0.0);
        EXPECT_NE(std::string(e.what()).find("last finite state at t ="), std::string::npos);
    }
}

TEST(Simulate, Deterministic) {
    ScenarioConfig cfg = scenarios::paper_2();
    cfg.duration = 20.0;
    const auto a = run(cfg);
    const auto b = run(cfg);
    ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) EXPECT_EQ(a.trajectory.state[k], b.trajectory.state[k]);
}

TEST(Simulate, StepHalvingConverges) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.duration = 20.0;
    const double y1 = run(cfg).report.final_output;
    cfg.step = 5e-4;
    cfg.record_stride = 200;
    const double y2 = run(cfg).report.final_output;
    EXPECT_LT(std::abs(y1 - y2), 1e-8);
}

TEST(Simulate, ShortRunInvariants) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.duration = 100.0;
    const auto rep = run(cfg).report;
    EXPECT_TRUE(rep.lyapunov_monotone);
    EXPECT_LT(rep.exo_norm_drift, 1e-9);
    ASSERT_TRUE(rep.observer_product_residual);
    EXPECT_LT(*rep.observer_product_residual, 1e-3);
    EXPECT_LT(rep.max_state_norm_inf, 10.0);
}

TEST(SecondaryOracle, ZeroRunHasNoDeviation) {
    ScenarioConfig cfg = quiet_scenario();
    cfg.duration = 10.0;
    const auto res = independent_secondary_oracle(cfg);
    EXPECT_EQ(res.max_deviation, 0.0);
    EXPECT_EQ(res.sum_residual, 0.0);
}

TEST(SecondaryOracle, ObserverTracksSecondaryState) {
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.duration = 200.0;
    const auto res = independent_secondary_oracle(cfg);
    EXPECT_LT(res.max_deviation, 1e-6);
    EXPECT_LT(res.sum_residual, 1e-6);
    // the secondary state is genuinely excited
    EXPECT_GT(res.run.report.max_secondary_estimate_norm_inf, 1e-4);
}

TEST(SecondaryOracle, PerturbedEstimateDecaysWithA) {
    // x_s_hat(0) = (0.01, 0, 0, 0): the deviation obeys e' = A e exactly.
    ScenarioConfig cfg = scenarios::paper_1();
    cfg.duration = 800.0;
    cfg.step = 1e-2;
    cfg.record_stride = 100;
    const ClosedLoop loop(cfg);
    Vector z0 = loop.initial_state();
    z0[loop.layout().x_s_hat()] = 0.01;
    const auto res = independent_secondary_oracle(cfg, z0);

    const Matrix A = loop.design().mats.A;
    auto lin = [&A](double, const Vector& e) { return A * std::span<const double>(e); };
    Vector e{0.01, 0.0, 0.0, 0.0};
    std::size_t k = 0;
    double worst = 0.0;
    for (const auto& s : res.samples) {
        while (k * cfg.step < s.t - 1e-9) e = rk4_step(lin, k * cfg.step, e, cfg.step), ++k;
        for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(s.deviation[i] - e[i]));
    }
    EXPECT_LT(worst, 1e-8);

    // Envelope: least-squares slope of log(max ||deviation|| per 50-unit window)
    std::vector<double> ts, ls;
    for (double t0 = 100.0; t0 < 800.0; t0 += 50.0) {
        double peak = 0.0;
        for (const auto& s : res.samples)
            if (s.t >= t0 && s.t < t0 + 50.0)
                peak = std::max(peak, std::sqrt(std::inner_product(s.deviation.begin(), s.deviation.end(),
                                                                   s.deviation.begin(), 0.0)));
        ts.push_back(t0 + 25.0);
        ls.push_back(std::log(peak));
    }
    const double n = double(ts.size());
    const double mt = std::accumulate(ts.begin(), ts.end(), 0.0) / n;
    const double ml = std::accumulate(ls.begin(), ls.end(), 0.0) / n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        num += (ts[i] - mt) * (ls[i] - ml);
        den += (ts[i] - mt) * (ts[i] - mt);
    }
    const double slope = num / den;
    EXPECT_NEAR(slope, loop.design().mats.max_real_eig_A(), 2e-3);
}
