#pragma once

// Normalized TORA dynamics, the disturbance exosystem, and configuration
// validation.

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "asd/errors.hpp"
#include "asd/numerics.hpp"

namespace asd {

// Coupling parameter epsilon, strictly inside (0, 1).
class PlantParams {
public:
    explicit PlantParams(double epsilon) : epsilon_(epsilon) {
        if (!(epsilon > 0.0 && epsilon < 1.0)) {
            std::ostringstream msg;
            msg << "epsilon must lie in (0, 1), got " << epsilon;
            throw ParameterError(msg.str());
        }
    }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }

private:
    double epsilon_;
};

// Constant rotor-angle target, strictly inside (-pi/2, pi/2).
class ReferenceParams {
public:
    explicit ReferenceParams(double r) : r_(r) {
        if (!(std::abs(r) < std::numbers::pi / 2.0)) {
            std::ostringstream msg;
            msg << "reference r must lie in (-pi/2, pi/2), got " << r;
            throw ParameterError(msg.str());
        }
    }
    [[nodiscard]] double value() const noexcept { return r_; }

private:
    double r_;
};

// (x1, x2, x3, x4): cart displacement, cart rate, rotor angle (not wrapped),
// rotor rate. The tracked output is x3.
using PlantState = Vec4;

// w' = S w, F_d = C_d^T w.
struct ExoSystem {
    Matrix S;
    Vector C_d;
    Vector w0;

    [[nodiscard]] std::size_t order() const noexcept { return C_d.size(); }

    void check_dimensions() const {
        const std::size_t m = C_d.size();
        if (!S.is_square() || S.rows() != m || w0.size() != m)
            throw DimensionError("ExoSystem: S is " + std::to_string(S.rows()) + "x" + std::to_string(S.cols()) +
                                 ", C_d has " + std::to_string(m) + " entries, w0 has " +
                                 std::to_string(w0.size()));
    }
};

// eps cos(x3) / (1 - eps^2 cos^2(x3)), the multiplier of F_d in the rotor
// equation. |value| <= eps / (1 - eps^2).
inline double coupling_coefficient(double x3, const PlantParams& p) {
    const double e = p.epsilon();
    const double c = std::cos(x3);
    return e * c / (1.0 - e * e * c * c);
}

inline PlantState tora_dynamics(const PlantState& x, double u, double F_d, const PlantParams& p) {
    if (!all_finite(x) || !std::isfinite(u) || !std::isfinite(F_d))
        throw NumericalError("tora_dynamics: non-finite state or input");
    const double e = p.epsilon();
    return {x[1], -x[0] + e * std::sin(x[2]) + F_d, x[3], u - coupling_coefficient(x[2], p) * F_d};
}

inline Vector exo_dynamics(std::span<const double> w, const ExoSystem& exo) {
    if (w.size() != exo.order()) throw DimensionError("exo_dynamics: state length does not match exosystem order");
    return exo.S * w;
}

inline double disturbance_output(std::span<const double> w, const ExoSystem& exo) {
    if (w.size() != exo.order())
        throw DimensionError("disturbance_output: state length does not match exosystem order");
    return dot(exo.C_d, w);
}

// ============================================================================
// Configuration validation
// ============================================================================

inline constexpr double kSkewTolerance = 1e-12;
inline constexpr double kUnitFrequencyTolerance = 1e-6;

namespace checks {
inline constexpr const char* kSkewSymmetric = "exosystem skew-symmetry";
inline constexpr const char* kObservable = "exosystem observability";
inline constexpr const char* kUnitFrequency = "exosystem frequency +-1";
inline constexpr const char* kEpsilonRange = "epsilon range";
inline constexpr const char* kReferenceRange = "reference range";
}  // namespace checks

enum class CheckStatus { Pass, Fail, Overridden, Skipped };

inline const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Overridden: return "overridden";
        case CheckStatus::Skipped: return "skipped";
    }
    return "?";
}

struct CheckResult {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    std::string detail;

    [[nodiscard]] bool ok() const noexcept { return status == CheckStatus::Pass || status == CheckStatus::Overridden; }
};

struct ValidationReport {
    std::vector<CheckResult> checks;

    [[nodiscard]] bool passed() const {
        for (const auto& c : checks)
            if (!c.ok()) return false;
        return true;
    }

    [[nodiscard]] const CheckResult* find(std::string_view name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }

    // Throws ConfigurationError naming the first failed check.
    void throw_if_failed() const {
        for (const auto& c : checks)
            if (c.status == CheckStatus::Fail) throw ConfigurationError(c.name, c.name + ": " + c.detail);
    }
};

struct ValidationOptions {
    // Accept exosystem eigenvalues at +-j; that component is then left out of
    // the internal model instead of being rejected.
    bool allow_unit_frequency = false;
};

// Smallest distance from an eigenvalue of S to +j or -j.
inline double unit_frequency_distance(const Matrix& S) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z : eigenvalues(S)) {
        best = std::min(best, std::abs(z - std::complex<double>(0.0, 1.0)));
        best = std::min(best, std::abs(z + std::complex<double>(0.0, 1.0)));
    }
    return best;
}

inline ValidationReport validate_configuration(const ExoSystem& exo, double epsilon, double r,
                                               ValidationOptions opts = {}) {
    ValidationReport report;
    auto add = [&report](const char* name, CheckStatus s, std::string detail) {
        report.checks.push_back({name, s, std::move(detail)});
    };
    std::ostringstream os;
    os.precision(6);

    bool dims_ok = true;
    try {
        exo.check_dimensions();
    } catch (const DimensionError& e) {
        dims_ok = false;
        add(checks::kSkewSymmetric, CheckStatus::Fail, e.what());
        add(checks::kObservable, CheckStatus::Skipped, "dimension mismatch");
        add(checks::kUnitFrequency, CheckStatus::Skipped, "dimension mismatch");
    }

    if (dims_ok) {
        const double skew = (exo.S + exo.S.transpose()).max_abs();
        os.str("");
        os << "max |S + S^T| = " << skew;
        add(checks::kSkewSymmetric, skew < kSkewTolerance ? CheckStatus::Pass : CheckStatus::Fail,
            skew < kSkewTolerance ? os.str() : "S is not skew-symmetric (" + os.str() + ")");

        const std::size_t rank = observability_rank(exo.C_d, exo.S);
        os.str("");
        os << "rank " << rank << " of " << exo.order();
        add(checks::kObservable, rank == exo.order() ? CheckStatus::Pass : CheckStatus::Fail,
            rank == exo.order() ? os.str() : "(C_d^T, S) is not observable: " + os.str());

        const double dist = exo.order() == 0 ? std::numeric_limits<double>::infinity() : unit_frequency_distance(exo.S);
        if (dist >= kUnitFrequencyTolerance) {
            os.str("");
            os << "min |lambda -+ j| = " << dist;
            add(checks::kUnitFrequency, CheckStatus::Pass, os.str());
        } else {
            const std::string why =
                "exosystem has eigenvalues at +-j (frequency +-1); a disturbance like sin t cannot be dealt "
                "with by the internal model";
            add(checks::kUnitFrequency, opts.allow_unit_frequency ? CheckStatus::Overridden : CheckStatus::Fail,
                opts.allow_unit_frequency ? why + "; component left uncompensated by override" : why);
        }
    }

    os.str("");
    os << "epsilon = " << epsilon;
    const bool eps_ok = epsilon > 0.0 && epsilon < 1.0;
    add(checks::kEpsilonRange, eps_ok ? CheckStatus::Pass : CheckStatus::Fail,
        eps_ok ? os.str() : os.str() + " outside (0, 1)");

    os.str("");
    os << "r = " << r;
    const bool r_ok = std::abs(r) < std::numbers::pi / 2.0;
    add(checks::kReferenceRange, r_ok ? CheckStatus::Pass : CheckStatus::Fail,
        r_ok ? os.str() : os.str() + " outside (-pi/2, pi/2)");
    return report;
}

// Restriction of the exosystem to the orthogonal complement of its +-j
// invariant subspace. S is normal, so that complement is S-invariant. Used
// for the internal model when the unit frequency is deliberately left
// uncompensated.
inline ExoSystem without_unit_frequency(const ExoSystem& exo) {
    exo.check_dimensions();
    const std::size_t m = exo.order();
    // -S^2 = S^T S is symmetric PSD with eigenvalue 1 exactly on the +-j modes.
    const Matrix gram = exo.S.transpose() * exo.S;
    const SymmetricEigen eig = symmetric_eigen(gram);
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < m; ++k)
        if (std::abs(eig.values[k] - 1.0) >= kUnitFrequencyTolerance) keep.push_back(k);
    const std::size_t q = keep.size();
    Matrix basis(m, q);
    for (std::size_t j = 0; j < q; ++j)
        for (std::size_t i = 0; i < m; ++i) basis(i, j) = eig.vectors(i, keep[j]);
    const Matrix bt = basis.transpose();
    ExoSystem out;
    out.S = bt * exo.S * basis;
    out.S = 0.5 * (out.S - out.S.transpose());
    out.C_d = bt * std::span<const double>(exo.C_d);
    out.w0 = bt * std::span<const double>(exo.w0);
    return out;
}

}  // namespace asd
