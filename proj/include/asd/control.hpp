#pragma once

// Controllers for the two halves of the decomposition and their composition:
//  * primary: internal-model tracking controller on the filtered error, with
//    gains from the closed-form family and a Hurwitz gate on A_a;
//  * secondary: two-step backstepping stabilizer (atan virtual control, then
//    a linear target for the (x3', x4') cascade);
//  * composite: u = K^T x + v_p + v_s + c(x3) F_d_hat.

#include <cmath>
#include <numbers>
#include <sstream>

#include "asd/decomposition.hpp"
#include "asd/errors.hpp"
#include "asd/estimators.hpp"
#include "asd/numerics.hpp"
#include "asd/plant.hpp"

namespace asd {

// ============================================================================
// Primary tracking controller
// ============================================================================

// e_p = (C + a B)^T x_p - r = x_p3 + a x_p4 - r
inline double filtered_error(const Vec4& x_p, double r, double a) { return x_p[2] + a * x_p[3] - r; }

struct PrimaryGains {
    Matrix S_a;  // diag(0, S)
    Vector L1;   // m + 1
    Vec4 L2{};
    Vector L3;   // m + 1
    Matrix A_a;
    double margin = 0.0;  // max Re lambda(A_a)
};

// [[S_a, L1 (C + a B)^T], [B L3^T, A + B L2^T]]
inline Matrix augmented_matrix(const Matrix& S_a, std::span<const double> L1, const Vec4& L2,
                               std::span<const double> L3, const SystemMatrices& mats) {
    const std::size_t q = S_a.rows();
    if (!S_a.is_square() || L1.size() != q || L3.size() != q)
        throw DimensionError("augmented_matrix: S_a, L1, L3 dimensions disagree");
    Vec4 filt{};
    for (std::size_t i = 0; i < 4; ++i) filt[i] = mats.C[i] + mats.a * mats.B[i];
    Matrix out(q + 4, q + 4);
    out.set_block(0, 0, S_a);
    out.set_block(0, q, outer(L1, filt));
    out.set_block(q, 0, outer(mats.B, L3));
    out.set_block(q, q, mats.A + outer(mats.B, L2));
    return out;
}

// diag(0, S): an integrator for the constant reference plus a copy of the
// exosystem.
inline Matrix internal_model_drift(const Matrix& S) {
    Matrix S_a(S.rows() + 1, S.cols() + 1);
    S_a.set_block(1, 1, S);
    return S_a;
}

// Closed-form gain family
//   L1 = (1, C_d), L2 = -(1/a) C - B - (1/a) H - K, L3 = -(1/a) L1
// followed by a numerical Hurwitz check of A_a.
inline PrimaryGains proposition1_gains(const Matrix& S, std::span<const double> C_d, const SystemMatrices& mats) {
    require_filter_constant(mats.a);
    if (!S.is_square() || S.rows() != C_d.size())
        throw DimensionError("proposition1_gains: S and C_d dimensions disagree");
    if (S.rows() > 0 && unit_frequency_distance(S) < kUnitFrequencyTolerance)
        throw ConfigurationError(checks::kUnitFrequency,
                                 "internal model cannot contain eigenvalues at +-j: a disturbance like sin t cannot "
                                 "be dealt with; drop that component from the internal model");

    const double a = mats.a;
    PrimaryGains g;
    g.S_a = internal_model_drift(S);
    g.L1.assign(1, 1.0);
    g.L1.insert(g.L1.end(), C_d.begin(), C_d.end());
    for (std::size_t i = 0; i < 4; ++i) g.L2[i] = -mats.C[i] / a - mats.B[i] - mats.H[i] / a - mats.K[i];
    g.L3.resize(g.L1.size());
    for (std::size_t i = 0; i < g.L1.size(); ++i) g.L3[i] = -g.L1[i] / a;
    g.A_a = augmented_matrix(g.S_a, g.L1, g.L2, g.L3, mats);
    g.margin = max_real_eig(g.A_a);
    if (!(g.margin < 0.0)) {
        std::ostringstream msg;
        msg << "gain synthesis failed: max Re lambda(A_a) = " << g.margin << " is not negative";
        throw SynthesisError(msg.str(), g.margin);
    }
    return g;
}

struct PrimaryControl {
    Vector xi_dot;
    double v_p = 0.0;
    double e_p = 0.0;
};

// xi' = S_a xi + L1 e_p, v_p = L2^T x_p_hat + L3^T xi
inline PrimaryControl primary_controller(std::span<const double> xi, const Vec4& x_p_hat, double r,
                                         const PrimaryGains& gains, double a) {
    if (xi.size() != gains.L1.size()) throw DimensionError("primary_controller: xi length mismatch");
    PrimaryControl out;
    out.e_p = filtered_error(x_p_hat, r, a);
    out.xi_dot = gains.S_a * xi;
    for (std::size_t i = 0; i < xi.size(); ++i) out.xi_dot[i] += gains.L1[i] * out.e_p;
    out.v_p = dot(gains.L2, x_p_hat) + dot(gains.L3, xi);
    return out;
}

// ============================================================================
// Secondary stabilizer (backstepping)
// ============================================================================

// Upper limit 2 (1 - 2|r|/pi) on the atan gain b, which keeps
// cos((-b atan x2 + 2r)/2) > 0.
inline double b_upper_bound(double r) {
    if (!(std::abs(r) < std::numbers::pi / 2.0)) {
        std::ostringstream msg;
        msg << "b_upper_bound: |r| must be below pi/2, got r = " << r;
        throw ParameterError(msg.str());
    }
    return 2.0 * (1.0 - 2.0 * std::abs(r) / std::numbers::pi);
}

inline void validate_b(double b, double r) {
    const double hi = b_upper_bound(r);
    if (!(b > 0.0 && b < hi)) {
        std::ostringstream msg;
        msg.precision(10);
        msg << "backstepping gain b = " << b << " must lie in (0, " << hi << ") for r = " << r;
        throw ParameterError(msg.str());
    }
}

class BacksteppingParams {
public:
    BacksteppingParams(double b, double r) : b_(b) { validate_b(b, r); }
    [[nodiscard]] double b() const noexcept { return b_; }

private:
    double b_;
};

// Output of the primary system as seen by the secondary one. The defaults
// (y_p = r, ydot_p = 0) describe a converged primary.
struct PrimaryOutput {
    double y = 0.0;
    double ydot = 0.0;
};

// g = eps sin(y_p + x3s) - eps sin(r + x3s) - eps (y_p + a ydot_p - r),
// the coupling the secondary system receives from the primary output.
inline double secondary_coupling(double x3s, const PrimaryOutput& prim, double r, double epsilon, double a) {
    return epsilon * std::sin(prim.y + x3s) - epsilon * std::sin(r + x3s) - epsilon * (prim.y + a * prim.ydot - r);
}

struct BacksteppingIntermediates {
    double x3s_prime = 0.0;  // x3s + b atan(x2s)
    double x4s_prime = 0.0;  // x3s' + x4s + psi
    double psi = 0.0;
    double psi_dot = 0.0;    // d psi / dt along the secondary dynamics, including g
    double g = 0.0;
    double g_prime = 0.0;    // eps sin(r + x3s) - eps sin(r - b atan x2s) + g
};

inline BacksteppingIntermediates backstepping_intermediates(const Vec4& x_s, double r, double b, double epsilon,
                                                            double a, const PrimaryOutput& prim) {
    const double x1 = x_s[0], x2 = x_s[1], x3 = x_s[2], x4 = x_s[3];
    const double den = 1.0 + x2 * x2;
    // g-free part of x2s'
    const double q = -x1 + epsilon * std::sin(x3 + r) - epsilon * std::sin(r);

    BacksteppingIntermediates out;
    out.g = secondary_coupling(x3, prim, r, epsilon, a);
    out.x3s_prime = x3 + b * std::atan(x2);
    out.psi = b / den * q;
    out.x4s_prime = out.x3s_prime + x4 + out.psi;
    // x2s' = q + g, x1s' = x2s, x3s' = x4s
    out.psi_dot = -2.0 * b * x2 * (q + out.g) / (den * den) * q + b / den * (-x2 + epsilon * std::cos(x3 + r) * x4);
    out.g_prime = epsilon * std::sin(r + x3) - epsilon * std::sin(r - b * std::atan(x2)) + out.g;
    return out;
}

inline BacksteppingIntermediates backstepping_intermediates(const Vec4& x_s, double r, double b, double epsilon,
                                                            double a) {
    return backstepping_intermediates(x_s, r, b, epsilon, a, PrimaryOutput{r, 0.0});
}

// v_s = x3s' - 2 x4s' - K^T x_s - psi_dot. Substituted into the secondary
// system this gives x3s'' = -x3s' + x4s' + b g/(1+x2s^2) and
// x4s'' = -x4s' + b g/(1+x2s^2).
inline double backstepping_vs(const Vec4& x_s_hat, double r, double b, const Vec4& K, double epsilon, double a,
                              const PrimaryOutput& prim) {
    const auto im = backstepping_intermediates(x_s_hat, r, b, epsilon, a, prim);
    return im.x3s_prime - 2.0 * im.x4s_prime - dot(K, x_s_hat) - im.psi_dot;
}

inline double backstepping_vs(const Vec4& x_s_hat, double r, double b, const Vec4& K, double epsilon, double a) {
    return backstepping_vs(x_s_hat, r, b, K, epsilon, a, PrimaryOutput{r, 0.0});
}

// ============================================================================
// Composite law
// ============================================================================

struct ControllerDesign {
    SystemMatrices mats;
    PrimaryGains gains;
    double b = 0.0;
    double r = 0.0;
};

struct ControlTerms {
    double u = 0.0;
    double feedback = 0.0;      // K^T x
    double v_p = 0.0;
    double v_s = 0.0;
    double compensation = 0.0;  // c(x3) F_d_hat
    double coupling = 0.0;      // c(x3)
    double e_p = 0.0;
    Vector xi_dot;
};

// u = K^T x + v_p(xi, x_p_hat, r) + v_s(x_p_hat, x_s_hat, r) + c(x3) F_d_hat,
// with xi' driven by (C + a B)^T x_p_hat - r.
inline ControlTerms composite_control(const PlantState& x, std::span<const double> xi, const Vec4& x_p_hat,
                                      const Vec4& x_s_hat, double F_d_hat, const ControllerDesign& design) {
    const auto& mats = design.mats;
    const PlantParams plant(mats.epsilon);
    ControlTerms out;
    PrimaryControl prim = primary_controller(xi, x_p_hat, design.r, design.gains, mats.a);
    out.v_p = prim.v_p;
    out.e_p = prim.e_p;
    out.xi_dot = std::move(prim.xi_dot);
    out.v_s = backstepping_vs(x_s_hat, design.r, design.b, mats.K, mats.epsilon, mats.a,
                              PrimaryOutput{x_p_hat[2], x_p_hat[3]});
    out.feedback = dot(mats.K, x);
    out.coupling = coupling_coefficient(x[2], plant);
    out.compensation = out.coupling * F_d_hat;
    out.u = out.feedback + out.v_p + out.v_s + out.compensation;
    return out;
}

}  // namespace asd
