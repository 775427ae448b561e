#pragma once

// Zero-term transformation of the compensated TORA model into the LTI skeleton
// A x + B v + phi(y, ydot) + D F_d + varphi, and its additive split into an
// LTI primary system (carries the reference and disturbance) and a nonlinear
// secondary system (zero initial state, zero equilibrium).

#include <cmath>
#include <sstream>

#include "asd/errors.hpp"
#include "asd/numerics.hpp"
#include "asd/plant.hpp"

namespace asd {

namespace basis {
inline constexpr Vec4 B{0.0, 0.0, 0.0, 1.0};  // input channel
inline constexpr Vec4 C{0.0, 0.0, 1.0, 0.0};  // output y = x3
inline constexpr Vec4 D{0.0, 1.0, 0.0, 0.0};  // disturbance channel
}  // namespace basis

// Double integrator plus undamped unit oscillator.
inline Matrix open_loop_skeleton() {
    return Matrix{{0.0, 1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 1.0}, {0.0, 0.0, 0.0, 0.0}};
}

inline void require_filter_constant(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        std::ostringstream msg;
        msg << "filter constant a must be positive, got " << a;
        throw ParameterError(msg.str());
    }
}

// A0 + B K^T + eps D (C + a B)^T
inline Matrix build_A(const Vec4& K, double epsilon, double a) {
    const PlantParams p(epsilon);
    require_filter_constant(a);
    Vec4 filt{};
    for (std::size_t i = 0; i < 4; ++i) filt[i] = basis::C[i] + a * basis::B[i];
    return open_loop_skeleton() + outer(basis::B, K) + p.epsilon() * outer(basis::D, filt);
}

struct SystemMatrices {
    Matrix A0;
    Matrix A;
    Vec4 B = basis::B;
    Vec4 C = basis::C;
    Vec4 D = basis::D;
    Vec4 H{};  // (0, eps, 0, 1)
    Vec4 K{};
    double epsilon = 0.0;
    double a = 0.0;

    static SystemMatrices make(const Vec4& K, double epsilon, double a) {
        SystemMatrices m;
        m.A0 = open_loop_skeleton();
        m.A = build_A(K, epsilon, a);
        m.H = {0.0, epsilon, 0.0, 1.0};
        m.K = K;
        m.epsilon = epsilon;
        m.a = a;
        return m;
    }

    [[nodiscard]] double max_real_eig_A() const { return max_real_eig(A); }

    // Throws ConfigurationError unless A is Hurwitz.
    void require_stable() const {
        const double lam = max_real_eig_A();
        if (!(lam < 0.0)) {
            std::ostringstream msg;
            msg << "A = A0 + B K^T + eps D (C + a B)^T is not Hurwitz: max Re lambda(A) = " << lam;
            throw ConfigurationError("A stability", msg.str());
        }
    }
};

// (0, eps sin y - eps (y + a ydot), 0, 0)
inline Vec4 phi(double y, double ydot, double epsilon, double a) {
    return {0.0, epsilon * std::sin(y) - epsilon * (y + a * ydot), 0.0, 0.0};
}

// Residual after disturbance compensation: only slot 4 is nonzero,
// c(x3) * (F_d_hat - F_d).
inline Vec4 residual_input(double coupling, double F_d_error) { return {0.0, 0.0, 0.0, coupling * F_d_error}; }

// d = phi(r, 0) + D F_d
inline Vec4 external_input(double F_d, double r, double epsilon, double a) {
    Vec4 d = phi(r, 0.0, epsilon, a);
    d[1] += F_d;
    return d;
}

// The compensated plant after the zero-term transformation:
// A x + B v + phi(y, ydot) + D F_d + varphi, with y = x3, ydot = x4.
inline Vec4 transformed_dynamics(const Vec4& x, double v, double F_d, const Vec4& varphi,
                                 const SystemMatrices& mats) {
    Vec4 dx = mats.A * x;
    const Vec4 ph = phi(x[2], x[3], mats.epsilon, mats.a);
    for (std::size_t i = 0; i < 4; ++i) dx[i] += mats.B[i] * v + ph[i] + mats.D[i] * F_d + varphi[i];
    return dx;
}

// Primary system: A x_p + B v_p + d + varphi.
inline Vec4 primary_dynamics(const Vec4& x_p, double v_p, double F_d, const Vec4& varphi, const SystemMatrices& mats,
                             double r) {
    Vec4 dx = mats.A * x_p;
    const Vec4 d = external_input(F_d, r, mats.epsilon, mats.a);
    for (std::size_t i = 0; i < 4; ++i) dx[i] += mats.B[i] * v_p + d[i] + varphi[i];
    return dx;
}

// Secondary system: A x_s + B v_s + phi(y_p + y_s, ydot_p + ydot_s) - phi(r, 0)
// with y_s = x_s3, ydot_s = x_s4.
inline Vec4 secondary_dynamics(const Vec4& x_s, double v_s, double y_p, double ydot_p, const SystemMatrices& mats,
                               double r) {
    Vec4 dx = mats.A * x_s;
    const Vec4 now = phi(y_p + x_s[2], ydot_p + x_s[3], mats.epsilon, mats.a);
    const Vec4 ref = phi(r, 0.0, mats.epsilon, mats.a);
    for (std::size_t i = 0; i < 4; ++i) dx[i] += mats.B[i] * v_s + now[i] - ref[i];
    return dx;
}

// ============================================================================
// Generic additive state decomposition of an explicit ODE
// ============================================================================

struct DecompositionCheck {
    double max_deviation = 0.0;  // max over the grid of ||x - (x_p + x_s)||_2
    std::size_t steps = 0;
};

// Integrates the original system x' = f(t, x), the primary x_p' = f_p(t, x_p)
// and the derived secondary x_s' = f(t, x_p + x_s) - f_p(t, x_p) with
// x_s(0) = x0 - x_p0, all on one RK4 grid, and reports how far x drifts from
// x_p + x_s.
template <OdeFunction Original, OdeFunction Primary>
DecompositionCheck verify_additive_decomposition(Original&& original, Primary&& primary, const Vector& x0,
                                                 const Vector& x_p0, double horizon, double step) {
    if (x0.size() != x_p0.size()) throw DimensionError("verify_additive_decomposition: x0 and x_p0 differ in length");
    if (!(step > 0.0)) throw ParameterError("verify_additive_decomposition: step must be positive");
    if (!(horizon >= 0.0)) throw ParameterError("verify_additive_decomposition: horizon must be non-negative");
    const std::size_t n = x0.size();

    // Joint state (x, x_p, x_s).
    auto joint = [&](double t, const Vector& z) {
        Vector x(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
        Vector xp(z.begin() + static_cast<std::ptrdiff_t>(n), z.begin() + static_cast<std::ptrdiff_t>(2 * n));
        Vector sum(n);
        for (std::size_t i = 0; i < n; ++i) sum[i] = xp[i] + z[2 * n + i];
        const Vector fx = original(t, x);
        const Vector fp = primary(t, xp);
        const Vector fsum = original(t, sum);
        if (fx.size() != n || fp.size() != n || fsum.size() != n)
            throw DimensionError("verify_additive_decomposition: vector field length mismatch");
        Vector dz(3 * n);
        for (std::size_t i = 0; i < n; ++i) {
            dz[i] = fx[i];
            dz[n + i] = fp[i];
            dz[2 * n + i] = fsum[i] - fp[i];
        }
        return dz;
    };

    Vector z(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = x0[i];
        z[n + i] = x_p0[i];
        z[2 * n + i] = x0[i] - x_p0[i];
    }
    auto deviation = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = z[i] - (z[n + i] + z[2 * n + i]);
            s += d * d;
        }
        return std::sqrt(s);
    };

    DecompositionCheck out;
    out.max_deviation = deviation();
    const auto steps = static_cast<std::size_t>(std::llround(horizon / step));
    for (std::size_t k = 0; k < steps; ++k) {
        z = rk4_step(joint, static_cast<double>(k) * step, z, step);
        out.max_deviation = std::max(out.max_deviation, deviation());
    }
    out.steps = steps;
    return out;
}

}  // namespace asd
