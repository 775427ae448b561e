#pragma once

// Closed-loop assembly and integration. The plant, exosystem, disturbance
// observer, internal model and decomposition observer are stacked into one
// state vector and advanced on a single fixed RK4 grid.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "asd/control.hpp"
#include "asd/decomposition.hpp"
#include "asd/errors.hpp"
#include "asd/estimators.hpp"
#include "asd/numerics.hpp"
#include "asd/plant.hpp"

namespace asd {

struct ScenarioConfig {
    double epsilon = 0.2;
    double r = 0.5;
    double a = 1.0;
    Vec4 K{0.0, -0.2, -1.0, -2.0};
    double l1 = 10.0;
    double l2 = 10.0;
    double b = 1.0;
    ExoSystem exo;
    Vec4 x0{};
    double duration = 1500.0;
    double step = 1e-3;
    std::size_t record_stride = 100;
    double settling_tolerance = 0.02;
    bool allow_unit_frequency = false;

    friend bool operator==(const ScenarioConfig& lhs, const ScenarioConfig& rhs) {
        return lhs.epsilon == rhs.epsilon && lhs.r == rhs.r && lhs.a == rhs.a && lhs.K == rhs.K &&
               lhs.l1 == rhs.l1 && lhs.l2 == rhs.l2 && lhs.b == rhs.b && lhs.exo.S == rhs.exo.S &&
               lhs.exo.C_d == rhs.exo.C_d && lhs.exo.w0 == rhs.exo.w0 && lhs.x0 == rhs.x0 &&
               lhs.duration == rhs.duration && lhs.step == rhs.step && lhs.record_stride == rhs.record_stride &&
               lhs.settling_tolerance == rhs.settling_tolerance &&
               lhs.allow_unit_frequency == rhs.allow_unit_frequency;
    }
};

// ============================================================================
// Gates
// ============================================================================

namespace checks {
inline constexpr const char* kObserverGains = "observer gains";
inline constexpr const char* kFilterConstant = "filter constant";
inline constexpr const char* kAStable = "A stability";
inline constexpr const char* kBacksteppingGain = "backstepping gain b";
inline constexpr const char* kAaStable = "A_a stability";
}  // namespace checks

struct GateReport {
    ValidationReport validation;
    std::optional<double> margin_A;   // max Re lambda(A)
    std::optional<double> margin_Aa;  // max Re lambda(A_a)
    std::optional<PrimaryGains> gains;
    std::optional<ExoSystem> internal_model;

    [[nodiscard]] bool passed() const { return validation.passed(); }
};

// Runs every configuration gate without throwing. Later gates are skipped
// when their inputs are invalid.
inline GateReport check_gates(const ScenarioConfig& cfg) {
    GateReport rep;
    rep.validation =
        validate_configuration(cfg.exo, cfg.epsilon, cfg.r, ValidationOptions{cfg.allow_unit_frequency});
    auto& list = rep.validation.checks;
    auto add = [&list](const char* name, CheckStatus s, std::string detail) {
        list.push_back({name, s, std::move(detail)});
    };
    std::ostringstream os;
    os.precision(6);

    const bool obs_ok = cfg.l1 > 0.0 && cfg.l2 > 0.0;
    os << "l1 = " << cfg.l1 << ", l2 = " << cfg.l2;
    add(checks::kObserverGains, obs_ok ? CheckStatus::Pass : CheckStatus::Fail,
        obs_ok ? os.str() : os.str() + " (both must be positive)");

    const bool a_ok = cfg.a > 0.0 && std::isfinite(cfg.a);
    os.str("");
    os << "a = " << cfg.a;
    add(checks::kFilterConstant, a_ok ? CheckStatus::Pass : CheckStatus::Fail,
        a_ok ? os.str() : os.str() + " (must be positive)");

    const bool eps_ok = cfg.epsilon > 0.0 && cfg.epsilon < 1.0;
    const bool r_ok = std::abs(cfg.r) < std::numbers::pi / 2.0;

    if (r_ok) {
        const double hi = b_upper_bound(cfg.r);
        const bool b_ok = cfg.b > 0.0 && cfg.b < hi;
        os.str("");
        os.precision(10);
        os << "b = " << cfg.b << " in (0, " << hi << ")";
        os.precision(6);
        add(checks::kBacksteppingGain, b_ok ? CheckStatus::Pass : CheckStatus::Fail,
            b_ok ? os.str() : "b = " + std::to_string(cfg.b) + " outside (0, " + std::to_string(hi) + ")");
    } else {
        add(checks::kBacksteppingGain, CheckStatus::Skipped, "reference out of range");
    }

    std::optional<SystemMatrices> mats;
    if (eps_ok && a_ok) {
        mats = SystemMatrices::make(cfg.K, cfg.epsilon, cfg.a);
        rep.margin_A = mats->max_real_eig_A();
        os.str("");
        os << "max Re lambda(A) = " << *rep.margin_A;
        add(checks::kAStable, *rep.margin_A < 0.0 ? CheckStatus::Pass : CheckStatus::Fail,
            *rep.margin_A < 0.0 ? os.str() : os.str() + " (A must be Hurwitz)");
    } else {
        add(checks::kAStable, CheckStatus::Skipped, "epsilon or a invalid");
    }

    const CheckResult* skew = rep.validation.find(checks::kSkewSymmetric);
    const CheckResult* unit = rep.validation.find(checks::kUnitFrequency);
    const bool exo_ok = skew && skew->ok() && unit && unit->status != CheckStatus::Skipped && unit->ok();
    if (mats && exo_ok) {
        rep.internal_model = unit->status == CheckStatus::Overridden ? without_unit_frequency(cfg.exo) : cfg.exo;
        try {
            rep.gains = proposition1_gains(rep.internal_model->S, rep.internal_model->C_d, *mats);
            rep.margin_Aa = rep.gains->margin;
            os.str("");
            os << "max Re lambda(A_a) = " << *rep.margin_Aa;
            add(checks::kAaStable, CheckStatus::Pass, os.str());
        } catch (const SynthesisError& e) {
            rep.margin_Aa = e.margin();
            add(checks::kAaStable, CheckStatus::Fail, e.what());
        } catch (const ConfigurationError& e) {
            add(checks::kAaStable, CheckStatus::Fail, e.what());
        }
    } else {
        add(checks::kAaStable, CheckStatus::Skipped, "exosystem or A invalid");
    }
    return rep;
}

// ============================================================================
// Loop state layout
// ============================================================================

// x (4) | w (m) | w_hat (m) | x4_hat (1) | xi (q+1) | x_s_hat (4)
// q = m unless a +-j component is left out of the internal model.
struct LoopLayout {
    std::size_t m = 0;
    std::size_t q = 0;

    [[nodiscard]] std::size_t x() const noexcept { return 0; }
    [[nodiscard]] std::size_t w() const noexcept { return 4; }
    [[nodiscard]] std::size_t w_hat() const noexcept { return 4 + m; }
    [[nodiscard]] std::size_t x4_hat() const noexcept { return 4 + 2 * m; }
    [[nodiscard]] std::size_t xi() const noexcept { return 5 + 2 * m; }
    [[nodiscard]] std::size_t xi_size() const noexcept { return q + 1; }
    [[nodiscard]] std::size_t x_s_hat() const noexcept { return xi() + xi_size(); }
    [[nodiscard]] std::size_t size() const noexcept { return x_s_hat() + 4; }

    static Vec4 vec4(const Vector& z, std::size_t off) { return {z[off], z[off + 1], z[off + 2], z[off + 3]}; }
    static std::span<const double> slice(const Vector& z, std::size_t off, std::size_t n) {
        return std::span<const double>(z).subspan(off, n);
    }
};

// Signals derived from one loop state.
struct LoopSignals {
    double u = 0.0;
    double F_d = 0.0;
    double F_d_hat = 0.0;
    double v_p = 0.0;
    double v_s = 0.0;
    double e_p = 0.0;
    double coupling = 0.0;  // c(x3)
    double g = 0.0;         // secondary coupling evaluated on the estimates
};

class ClosedLoop {
public:
    // Validates every gate; throws ConfigurationError (or SynthesisError) on
    // the first failure.
    explicit ClosedLoop(const ScenarioConfig& cfg) : cfg_(cfg), plant_(validated_epsilon(cfg)) {
        GateReport gates = check_gates(cfg);
        for (const auto& c : gates.validation.checks)
            if (c.status == CheckStatus::Fail) {
                if (c.name == checks::kAaStable && gates.margin_Aa)
                    throw SynthesisError(c.detail, *gates.margin_Aa);
                throw ConfigurationError(c.name, c.name + ": " + c.detail);
            }
        design_.mats = SystemMatrices::make(cfg.K, cfg.epsilon, cfg.a);
        design_.gains = std::move(*gates.gains);
        design_.b = cfg.b;
        design_.r = cfg.r;
        internal_model_ = std::move(*gates.internal_model);
        observer_ = {cfg.l1, cfg.l2};
        layout_ = {cfg.exo.order(), internal_model_.order()};
    }

    [[nodiscard]] const ScenarioConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const ControllerDesign& design() const noexcept { return design_; }
    [[nodiscard]] const LoopLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const ExoSystem& internal_model() const noexcept { return internal_model_; }
    [[nodiscard]] const PlantParams& plant() const noexcept { return plant_; }
    [[nodiscard]] const DisturbanceObserverParams& observer_params() const noexcept { return observer_; }

    // x = x0, w = w0, everything else zero.
    [[nodiscard]] Vector initial_state() const {
        Vector z(layout_.size(), 0.0);
        for (std::size_t i = 0; i < 4; ++i) z[i] = cfg_.x0[i];
        for (std::size_t i = 0; i < layout_.m; ++i) z[layout_.w() + i] = cfg_.exo.w0[i];
        return z;
    }

    struct Evaluation {
        Vector derivative;
        LoopSignals signals;
    };

    // Wiring per evaluation: F_d from w; x_p_hat = x - x_s_hat, e_p, xi', v_p;
    // v_s from the estimates; F_d_hat and u; disturbance-observer rates; plant
    // rates; decomposition-observer rates with y = x3, ydot = x4.
    [[nodiscard]] Evaluation evaluate(const Vector& z) const {
        if (z.size() != layout_.size()) throw DimensionError("ClosedLoop: state length mismatch");
        const auto& L = layout_;
        const PlantState x = LoopLayout::vec4(z, L.x());
        const auto w = LoopLayout::slice(z, L.w(), L.m);
        DisturbanceObserverState obs;
        obs.w_hat.assign(z.begin() + static_cast<std::ptrdiff_t>(L.w_hat()),
                         z.begin() + static_cast<std::ptrdiff_t>(L.w_hat() + L.m));
        obs.x4_hat = z[L.x4_hat()];
        const auto xi = LoopLayout::slice(z, L.xi(), L.xi_size());
        const Vec4 x_s_hat = LoopLayout::vec4(z, L.x_s_hat());
        const Vec4 x_p_hat = primary_estimate(x, x_s_hat);

        Evaluation ev;
        auto& sig = ev.signals;
        sig.F_d = disturbance_output(w, cfg_.exo);
        sig.F_d_hat = disturbance_estimate(obs.w_hat, cfg_.exo.C_d, observer_);

        const ControlTerms ctl = composite_control(x, xi, x_p_hat, x_s_hat, sig.F_d_hat, design_);
        sig.u = ctl.u;
        sig.v_p = ctl.v_p;
        sig.v_s = ctl.v_s;
        sig.e_p = ctl.e_p;
        sig.coupling = ctl.coupling;
        sig.g = secondary_coupling(x_s_hat[2], PrimaryOutput{x_p_hat[2], x_p_hat[3]}, cfg_.r, cfg_.epsilon, cfg_.a);

        const DisturbanceObserverRates rates =
            disturbance_observer_dynamics(obs, x, sig.u, cfg_.exo.S, cfg_.exo.C_d, observer_, plant_);
        const PlantState dx = tora_dynamics(x, sig.u, sig.F_d, plant_);
        const Vector dw = exo_dynamics(w, cfg_.exo);
        const Vec4 dxs = decomposition_observer_dynamics(x_s_hat, sig.v_s, x, design_.mats, cfg_.r);

        auto& d = ev.derivative;
        d.resize(L.size());
        for (std::size_t i = 0; i < 4; ++i) d[L.x() + i] = dx[i];
        for (std::size_t i = 0; i < L.m; ++i) {
            d[L.w() + i] = dw[i];
            d[L.w_hat() + i] = rates.w_hat_dot[i];
        }
        d[L.x4_hat()] = rates.x4_hat_dot;
        for (std::size_t i = 0; i < L.xi_size(); ++i) d[L.xi() + i] = ctl.xi_dot[i];
        for (std::size_t i = 0; i < 4; ++i) d[L.x_s_hat() + i] = dxs[i];
        return ev;
    }

    [[nodiscard]] Vector derivative(double /*t*/, const Vector& z) const { return evaluate(z).derivative; }

    // Lyapunov function of the disturbance-observer error, w_tilde measured
    // against w / l1.
    [[nodiscard]] double observer_lyapunov_at(const Vector& z) const {
        const auto& L = layout_;
        DisturbanceObserverState obs;
        obs.w_hat.assign(z.begin() + static_cast<std::ptrdiff_t>(L.w_hat()),
                         z.begin() + static_cast<std::ptrdiff_t>(L.w_hat() + L.m));
        obs.x4_hat = z[L.x4_hat()];
        return observer_lyapunov(obs, LoopLayout::slice(z, L.w(), L.m), z[3], observer_);
    }

private:
    static double validated_epsilon(const ScenarioConfig& cfg) {
        if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
            std::ostringstream msg;
            msg << "epsilon range: epsilon = " << cfg.epsilon << " outside (0, 1)";
            throw ConfigurationError(checks::kEpsilonRange, msg.str());
        }
        return cfg.epsilon;
    }

    ScenarioConfig cfg_;
    PlantParams plant_;
    ControllerDesign design_;
    ExoSystem internal_model_;
    DisturbanceObserverParams observer_;
    LoopLayout layout_;
};

// Builds the augmented vector field t, z -> z'.
inline auto build_loop_dynamics(const ClosedLoop& loop) {
    return [&loop](double t, const Vector& z) { return loop.derivative(t, z); };
}

// ============================================================================
// Trajectory and report
// ============================================================================

struct Trajectory {
    LoopLayout layout;
    std::vector<double> time;
    std::vector<Vector> state;
    std::vector<LoopSignals> signals;

    [[nodiscard]] std::size_t size() const noexcept { return time.size(); }
};

inline constexpr double kLyapunovSlack = 1e-9;
inline constexpr double kObserverAsymptoticStart = 50.0;

struct RunReport {
    double final_time = 0.0;
    double final_output = 0.0;
    double final_tracking_error = 0.0;  // |y(T) - r|
    double settling_tolerance = 0.0;
    std::optional<double> settling_time;
    double max_state_norm_inf = 0.0;    // max over samples of ||x||_inf
    double max_abs_control = 0.0;
    double max_xi_norm_inf = 0.0;
    double max_secondary_estimate_norm_inf = 0.0;
    double margin_A = 0.0;
    double margin_Aa = 0.0;
    double lyapunov_max_increase = 0.0;  // max over steps of V1(t+h) - V1(t)
    bool lyapunov_monotone = true;       // every increase <= slack
    double exo_norm_drift = 0.0;         // max | ||w(t)|| - ||w(0)|| |
    std::optional<double> observer_product_residual;  // max |c (F_d_hat - F_d)| for t >= 50
    double decomposition_identity_residual = 0.0;      // max ||x_p_hat + x_s_hat - x||_inf
    bool horizon_too_short = false;
    std::size_t steps = 0;
    std::size_t samples = 0;
};

struct RunResult {
    Trajectory trajectory;
    RunReport report;
};

// Hooks into the integration. `on_stage` sees every RK4 stage evaluation (in
// order 0..3 within a step); `on_step` sees the state after each step.
struct NullStepObserver {
    void on_stage(std::size_t /*step*/, int /*stage*/, double /*t*/, const Vector& /*z*/, const LoopSignals&) {}
    void on_step(std::size_t /*step*/, double /*t*/, const Vector& /*z*/) {}
};

template <class Obs>
concept StepObserver = requires(Obs o, const Vector& z, const LoopSignals& s) {
    o.on_stage(std::size_t{}, int{}, double{}, z, s);
    o.on_step(std::size_t{}, double{}, z);
};

namespace detail {

inline void record(Trajectory& traj, double t, const Vector& z, const LoopSignals& s) {
    traj.time.push_back(t);
    traj.state.push_back(z);
    traj.signals.push_back(s);
}

}  // namespace detail

// Integrates the closed loop from `z0` over [0, duration] with step `step`,
// recording every `stride` steps.
template <StepObserver Obs = NullStepObserver>
RunResult simulate(const ClosedLoop& loop, Vector z0, double duration, double step, std::size_t stride,
                   Obs&& observer = Obs{}) {
    if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError("simulate: step must be positive");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw ParameterError("simulate: duration must be >= 0");
    if (stride == 0) throw ParameterError("simulate: record stride must be at least 1");
    const auto& cfg = loop.config();
    const auto& L = loop.layout();
    if (z0.size() != L.size()) throw DimensionError("simulate: initial state length mismatch");

    const auto steps = static_cast<std::size_t>(std::llround(duration / step));
    RunResult out;
    out.trajectory.layout = L;
    const std::size_t expected = steps / stride + 1;
    out.trajectory.time.reserve(expected);
    out.trajectory.state.reserve(expected);
    out.trajectory.signals.reserve(expected);

    RunReport& rep = out.report;
    rep.settling_tolerance = cfg.settling_tolerance;
    rep.margin_A = loop.design().mats.max_real_eig_A();
    rep.margin_Aa = loop.design().gains.margin;
    rep.steps = steps;

    const double w0_norm = norm2(LoopLayout::slice(z0, L.w(), L.m));
    auto sample_metrics = [&](double t, const Vector& z, const LoopSignals& s) {
        const Vec4 x = LoopLayout::vec4(z, L.x());
        const Vec4 xs = LoopLayout::vec4(z, L.x_s_hat());
        const Vec4 xp = primary_estimate(x, xs);
        rep.max_state_norm_inf = std::max(rep.max_state_norm_inf, norm_inf(x));
        rep.max_abs_control = std::max(rep.max_abs_control, std::abs(s.u));
        rep.max_xi_norm_inf = std::max(rep.max_xi_norm_inf, norm_inf(LoopLayout::slice(z, L.xi(), L.xi_size())));
        rep.max_secondary_estimate_norm_inf = std::max(rep.max_secondary_estimate_norm_inf, norm_inf(xs));
        for (std::size_t i = 0; i < 4; ++i)
            rep.decomposition_identity_residual =
                std::max(rep.decomposition_identity_residual, std::abs(xp[i] + xs[i] - x[i]));
        if (t >= kObserverAsymptoticStart) {
            const double res = std::abs(s.coupling * (s.F_d_hat - s.F_d));
            rep.observer_product_residual = std::max(rep.observer_product_residual.value_or(0.0), res);
        }
    };

    Vector z = std::move(z0);
    double v_prev = loop.observer_lyapunov_at(z);
    {
        const LoopSignals s0 = loop.evaluate(z).signals;
        detail::record(out.trajectory, 0.0, z, s0);
        sample_metrics(0.0, z, s0);
    }

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * step;
        int stage = 0;
        auto f = [&](double ts, const Vector& zs) {
            ClosedLoop::Evaluation ev = loop.evaluate(zs);
            observer.on_stage(k, stage++, ts, zs, ev.signals);
            return std::move(ev.derivative);
        };
        try {
            z = rk4_step(f, t, z, step);
        } catch (const NumericalError& e) {
            // NumericalBlowup from the integrator, or a plant evaluation that
            // received a non-finite stage state.
            std::ostringstream msg;
            msg.precision(10);
            msg << "simulation blew up; last finite state at t = " << t << " (" << e.what() << ")";
            throw NumericalBlowup(msg.str(), t);
        }
        const double t_next = static_cast<double>(k + 1) * step;
        if (!all_finite(z)) {
            std::ostringstream msg;
            msg.precision(10);
            msg << "simulation blew up; last finite state at t = " << t;
            throw NumericalBlowup(msg.str(), t);
        }
        observer.on_step(k, t_next, z);

        const double v = loop.observer_lyapunov_at(z);
        rep.lyapunov_max_increase = std::max(rep.lyapunov_max_increase, v - v_prev);
        v_prev = v;
        rep.exo_norm_drift = std::max(rep.exo_norm_drift, std::abs(norm2(LoopLayout::slice(z, L.w(), L.m)) - w0_norm));

        if ((k + 1) % stride == 0) {
            const LoopSignals s = loop.evaluate(z).signals;
            detail::record(out.trajectory, t_next, z, s);
            sample_metrics(t_next, z, s);
        }
    }
    rep.lyapunov_monotone = rep.lyapunov_max_increase <= kLyapunovSlack;

    const double t_end = static_cast<double>(steps) * step;
    rep.final_time = t_end;
    rep.final_output = z[2];
    rep.final_tracking_error = std::abs(z[2] - cfg.r);
    rep.samples = out.trajectory.size();

    // First recorded time after which the output stays inside the band.
    const auto& traj = out.trajectory;
    std::optional<double> settle;
    for (std::size_t i = traj.size(); i-- > 0;) {
        if (std::abs(traj.state[i][2] - cfg.r) >= cfg.settling_tolerance) break;
        settle = traj.time[i];
    }
    rep.settling_time = settle;

    const double slowest = std::abs(rep.margin_Aa);
    rep.horizon_too_short = rep.samples < 2 || (slowest > 0.0 && t_end < 5.0 / slowest);
    return out;
}

inline RunResult run(const ScenarioConfig& cfg) {
    const ClosedLoop loop(cfg);
    return simulate(loop, loop.initial_state(), cfg.duration, cfg.step, cfg.record_stride);
}

// ============================================================================
// Independent secondary-state oracle
// ============================================================================

// Re-integrates the primary system from x_p(0) = x0 and the secondary system
// from x_s(0) = 0 on their own state, driven only by the external inputs the
// loop produced at each RK4 stage (v_p, v_s, F_d and the compensation residual
// c (F_d_hat - F_d)). The secondary system reads y_p from this primary
// integration, never from the loop's observer.
class SecondaryOracle {
public:
    struct Sample {
        double t = 0.0;
        Vec4 deviation{};  // x_s_hat - x_s
    };

    SecondaryOracle(const ClosedLoop& loop, double step, std::size_t stride)
        : loop_(loop), step_(step), stride_(stride) {
        x_p_ = loop.config().x0;
        x_s_ = {};
    }

    void on_stage(std::size_t /*step*/, int stage, double /*t*/, const Vector& /*z*/, const LoopSignals& s) {
        const auto& mats = loop_.design().mats;
        const double r = loop_.config().r;
        // stage state
        Vec4 xp = x_p_, xs = x_s_;
        if (stage > 0) {
            const double c = stage == 3 ? step_ : 0.5 * step_;
            for (std::size_t i = 0; i < 4; ++i) {
                xp[i] += c * kp_[stage - 1][i];
                xs[i] += c * ks_[stage - 1][i];
            }
        }
        const Vec4 varphi = residual_input(s.coupling, s.F_d_hat - s.F_d);
        kp_[stage] = primary_dynamics(xp, s.v_p, s.F_d, varphi, mats, r);
        ks_[stage] = secondary_dynamics(xs, s.v_s, xp[2], xp[3], mats, r);
    }

    void on_step(std::size_t k, double t, const Vector& z) {
        for (std::size_t i = 0; i < 4; ++i) {
            x_p_[i] += step_ / 6.0 * (kp_[0][i] + 2.0 * kp_[1][i] + 2.0 * kp_[2][i] + kp_[3][i]);
            x_s_[i] += step_ / 6.0 * (ks_[0][i] + 2.0 * ks_[1][i] + 2.0 * ks_[2][i] + ks_[3][i]);
        }
        const auto& L = loop_.layout();
        const Vec4 xs_hat = LoopLayout::vec4(z, L.x_s_hat());
        const Vec4 x = LoopLayout::vec4(z, L.x());
        Vec4 dev{};
        for (std::size_t i = 0; i < 4; ++i) {
            dev[i] = xs_hat[i] - x_s_[i];
            sum_residual_ = std::max(sum_residual_, std::abs(x[i] - (x_p_[i] + x_s_[i])));
        }
        max_deviation_ = std::max(max_deviation_, norm2(dev));
        if ((k + 1) % stride_ == 0) samples_.push_back({t, dev});
    }

    // Starting deviation, before the first step.
    void start(const Vector& z0) {
        const Vec4 xs_hat = LoopLayout::vec4(z0, loop_.layout().x_s_hat());
        Vec4 dev{};
        for (std::size_t i = 0; i < 4; ++i) dev[i] = xs_hat[i] - x_s_[i];
        max_deviation_ = norm2(dev);
        samples_.push_back({0.0, dev});
    }

    [[nodiscard]] double max_deviation() const noexcept { return max_deviation_; }
    // max |x - (x_p + x_s)| of the oracle pair against the plant state.
    [[nodiscard]] double sum_residual() const noexcept { return sum_residual_; }
    [[nodiscard]] const std::vector<Sample>& samples() const noexcept { return samples_; }

private:
    const ClosedLoop& loop_;
    double step_;
    std::size_t stride_;
    Vec4 x_p_{};
    Vec4 x_s_{};
    std::array<Vec4, 4> kp_{};
    std::array<Vec4, 4> ks_{};
    double max_deviation_ = 0.0;
    double sum_residual_ = 0.0;
    std::vector<Sample> samples_;
};

struct OracleResult {
    double max_deviation = 0.0;  // max_t ||x_s_hat - x_s||_2
    double sum_residual = 0.0;   // max_t ||x - (x_p + x_s)||_inf
    std::vector<SecondaryOracle::Sample> samples;
    RunResult run;
};

// Runs the configured scenario from `z0` (default: the nominal initial state)
// alongside the oracle.
inline OracleResult independent_secondary_oracle(const ScenarioConfig& cfg, std::optional<Vector> z0 = std::nullopt) {
    const ClosedLoop loop(cfg);
    Vector init = z0 ? *z0 : loop.initial_state();
    SecondaryOracle oracle(loop, cfg.step, cfg.record_stride);
    oracle.start(init);
    OracleResult out;
    out.run = simulate(loop, std::move(init), cfg.duration, cfg.step, cfg.record_stride, oracle);
    out.max_deviation = oracle.max_deviation();
    out.sum_residual = oracle.sum_residual();
    out.samples = oracle.samples();
    return out;
}

}  // namespace asd
