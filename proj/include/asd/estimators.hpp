#pragma once

// Disturbance observer (estimates F_d through the rotor-rate channel) and the
// decomposition observer that reconstructs the secondary state exactly.

#include <sstream>

#include "asd/decomposition.hpp"
#include "asd/errors.hpp"
#include "asd/numerics.hpp"
#include "asd/plant.hpp"

namespace asd {

struct DisturbanceObserverParams {
    double l1 = 0.0;
    double l2 = 0.0;

    void validate() const {
        if (!(l1 > 0.0) || !(l2 > 0.0)) {
            std::ostringstream msg;
            msg << "observer gains must be positive, got l1 = " << l1 << ", l2 = " << l2;
            throw ParameterError(msg.str());
        }
    }
};

// Starts at zero: w_hat(0) = 0, x4_hat(0) = 0.
struct DisturbanceObserverState {
    Vector w_hat;
    double x4_hat = 0.0;

    static DisturbanceObserverState zero(std::size_t m) { return {Vector(m, 0.0), 0.0}; }
};

struct DisturbanceObserverRates {
    Vector w_hat_dot;
    double x4_hat_dot = 0.0;
    double F_d_hat = 0.0;
};

// F_d_hat = l1 C_d^T w_hat. Gain validity is the caller's responsibility.
inline double disturbance_estimate(std::span<const double> w_hat, std::span<const double> C_d,
                                   const DisturbanceObserverParams& p) {
    return p.l1 * dot(C_d, w_hat);
}

// With c = coupling_coefficient(x3):
//   w_hat'  = S w_hat + l1 c C_d (x4_hat - x4)
//   x4_hat' = -l2 (x4_hat - x4) - l1 c C_d^T w_hat + u
inline DisturbanceObserverRates disturbance_observer_dynamics(const DisturbanceObserverState& obs, const PlantState& x,
                                                              double u, const Matrix& S, std::span<const double> C_d,
                                                              const DisturbanceObserverParams& p,
                                                              const PlantParams& plant) {
    const std::size_t m = C_d.size();
    if (obs.w_hat.size() != m || S.rows() != m || S.cols() != m)
        throw DimensionError("disturbance_observer_dynamics: observer/exosystem dimension mismatch");
    const double c = coupling_coefficient(x[2], plant);
    const double x4_err = obs.x4_hat - x[3];
    const double cw = dot(C_d, obs.w_hat);

    DisturbanceObserverRates out;
    out.w_hat_dot = S * std::span<const double>(obs.w_hat);
    for (std::size_t i = 0; i < m; ++i) out.w_hat_dot[i] += p.l1 * c * C_d[i] * x4_err;
    out.x4_hat_dot = -p.l2 * x4_err - p.l1 * c * cw + u;
    out.F_d_hat = p.l1 * cw;
    return out;
}

// V1 = 1/2 ||w_tilde||^2 + 1/2 x4_tilde^2
inline double observer_lyapunov(std::span<const double> w_tilde, double x4_tilde) {
    return 0.5 * dot(w_tilde, w_tilde) + 0.5 * x4_tilde * x4_tilde;
}

// Observer error against the exostate rescaled by 1/l1, the reference
// trajectory along which V1 is non-increasing.
inline double observer_lyapunov(const DisturbanceObserverState& obs, std::span<const double> w, double x4,
                                const DisturbanceObserverParams& p) {
    if (w.size() != obs.w_hat.size()) throw DimensionError("observer_lyapunov: dimension mismatch");
    Vector w_tilde(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) w_tilde[i] = obs.w_hat[i] - w[i] / p.l1;
    return observer_lyapunov(w_tilde, obs.x4_hat - x4);
}

// x_s_hat' = A x_s_hat + B v_s + phi(y, ydot) - phi(r, 0), y = x3, ydot = x4
// from the measured state. Starting from x_s_hat(0) = 0 it reproduces the
// secondary state identically.
inline Vec4 decomposition_observer_dynamics(const Vec4& x_s_hat, double v_s, const PlantState& x,
                                            const SystemMatrices& mats, double r) {
    Vec4 dx = mats.A * x_s_hat;
    const Vec4 now = phi(x[2], x[3], mats.epsilon, mats.a);
    const Vec4 ref = phi(r, 0.0, mats.epsilon, mats.a);
    for (std::size_t i = 0; i < 4; ++i) dx[i] += mats.B[i] * v_s + now[i] - ref[i];
    return dx;
}

// x_p_hat = x - x_s_hat
inline Vec4 primary_estimate(const PlantState& x, const Vec4& x_s_hat) {
    return {x[0] - x_s_hat[0], x[1] - x_s_hat[1], x[2] - x_s_hat[2], x[3] - x_s_hat[3]};
}

}  // namespace asd
