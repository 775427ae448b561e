#pragma once

// Scenario config files (YAML), trajectory CSV and run report (JSON).
// Requires yaml-cpp and nlohmann/json.

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>

#include "asd/errors.hpp"
#include "asd/simulation.hpp"
#include "json.hpp"

namespace asd::io {

// Parse failure with a location ("line L, column C") and the offending key.
class ConfigParseError : public Error {
public:
    using Error::Error;
};

// ============================================================================
// Config
// ============================================================================

namespace keys {
inline const std::set<std::string> kRequired = {"epsilon", "r", "a", "K", "l1", "l2", "b", "S", "C_d", "w0", "x0"};
inline const std::set<std::string> kOptional = {"duration", "step", "record_stride", "settling_tolerance",
                                                "allow_unit_frequency"};
}  // namespace keys

namespace detail {

inline std::string where(const YAML::Mark& mark) {
    if (mark.is_null()) return "";
    return "line " + std::to_string(mark.line + 1) + ", column " + std::to_string(mark.column + 1);
}

// Shortest %g form that reads back to the same double.
inline std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

[[noreturn]] inline void fail(const std::string& origin, const YAML::Node& node, const std::string& key,
                              const std::string& what) {
    std::string loc = where(node.Mark());
    throw ConfigParseError(origin + (loc.empty() ? "" : ":" + loc) + ": key '" + key + "': " + what);
}

inline double scalar(const std::string& origin, const YAML::Node& node, const std::string& key) {
    if (!node.IsScalar()) fail(origin, node, key, "expected a number");
    try {
        return node.as<double>();
    } catch (const YAML::Exception&) {
        fail(origin, node, key, "expected a number, got '" + node.Scalar() + "'");
    }
}

inline Vector vector(const std::string& origin, const YAML::Node& node, const std::string& key) {
    if (!node.IsSequence()) fail(origin, node, key, "expected a list of numbers");
    Vector v;
    for (const auto& item : node) v.push_back(scalar(origin, item, key));
    return v;
}

inline Vec4 vec4(const std::string& origin, const YAML::Node& node, const std::string& key) {
    const Vector v = vector(origin, node, key);
    if (v.size() != 4) fail(origin, node, key, "expected exactly 4 entries, got " + std::to_string(v.size()));
    return {v[0], v[1], v[2], v[3]};
}

inline Matrix matrix(const std::string& origin, const YAML::Node& node, const std::string& key) {
    if (!node.IsSequence()) fail(origin, node, key, "expected a list of rows");
    std::vector<Vector> rows;
    for (const auto& row : node) rows.push_back(vector(origin, row, key));
    for (const auto& row : rows)
        if (row.size() != rows.front().size()) fail(origin, node, key, "rows have different lengths");
    if (!rows.empty() && rows.front().empty()) return Matrix(rows.size(), 0);
    return Matrix::from_rows(rows);
}

inline std::string list(std::span<const double> v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
    return s + "]";
}

}  // namespace detail

// `origin` is used in diagnostics (file name or "<string>").
inline ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<string>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigParseError(origin + ":" + detail::where(e.mark) + ": " + e.msg);
    }
    if (!root.IsMap()) throw ConfigParseError(origin + ": top level must be a mapping of key: value");

    std::set<std::string> seen;
    for (const auto& kv : root) {
        const std::string key = kv.first.as<std::string>();
        if (!keys::kRequired.count(key) && !keys::kOptional.count(key))
            detail::fail(origin, kv.first, key, "unknown key");
        seen.insert(key);
    }
    for (const auto& k : keys::kRequired)
        if (!seen.count(k)) throw ConfigParseError(origin + ": missing required key '" + k + "'");

    ScenarioConfig cfg;
    cfg.epsilon = detail::scalar(origin, root["epsilon"], "epsilon");
    cfg.r = detail::scalar(origin, root["r"], "r");
    cfg.a = detail::scalar(origin, root["a"], "a");
    cfg.K = detail::vec4(origin, root["K"], "K");
    cfg.l1 = detail::scalar(origin, root["l1"], "l1");
    cfg.l2 = detail::scalar(origin, root["l2"], "l2");
    cfg.b = detail::scalar(origin, root["b"], "b");
    cfg.exo.S = detail::matrix(origin, root["S"], "S");
    cfg.exo.C_d = detail::vector(origin, root["C_d"], "C_d");
    cfg.exo.w0 = detail::vector(origin, root["w0"], "w0");
    cfg.x0 = detail::vec4(origin, root["x0"], "x0");
    if (root["duration"]) cfg.duration = detail::scalar(origin, root["duration"], "duration");
    if (root["step"]) cfg.step = detail::scalar(origin, root["step"], "step");
    if (root["record_stride"]) {
        const double s = detail::scalar(origin, root["record_stride"], "record_stride");
        if (!(s >= 1.0) || s != std::floor(s))
            detail::fail(origin, root["record_stride"], "record_stride", "expected a positive integer");
        cfg.record_stride = static_cast<std::size_t>(s);
    }
    if (root["settling_tolerance"])
        cfg.settling_tolerance = detail::scalar(origin, root["settling_tolerance"], "settling_tolerance");
    if (root["allow_unit_frequency"]) {
        const auto node = root["allow_unit_frequency"];
        try {
            cfg.allow_unit_frequency = node.as<bool>();
        } catch (const YAML::Exception&) {
            detail::fail(origin, node, "allow_unit_frequency", "expected true or false");
        }
    }
    try {
        cfg.exo.check_dimensions();
    } catch (const DimensionError& e) {
        throw ConfigParseError(origin + ": " + e.what());
    }
    return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigParseError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

inline std::string serialize_config(const ScenarioConfig& cfg) {
    using detail::fmt_double;
    using detail::list;
    std::ostringstream os;
    os << "# TORA additive-state-decomposition tracking scenario\n";
    os << "epsilon: " << fmt_double(cfg.epsilon) << "\n";
    os << "r: " << fmt_double(cfg.r) << "\n";
    os << "a: " << fmt_double(cfg.a) << "\n";
    os << "K: " << list(cfg.K) << "\n";
    os << "l1: " << fmt_double(cfg.l1) << "\n";
    os << "l2: " << fmt_double(cfg.l2) << "\n";
    os << "b: " << fmt_double(cfg.b) << "\n";
    os << "# exosystem w' = S w, F_d = C_d^T w\n";
    os << "S:\n";
    for (std::size_t i = 0; i < cfg.exo.S.rows(); ++i) os << "  - " << list(cfg.exo.S.row(i)) << "\n";
    if (cfg.exo.S.rows() == 0) os << "  []\n";
    os << "C_d: " << list(cfg.exo.C_d) << "\n";
    os << "w0: " << list(cfg.exo.w0) << "\n";
    os << "x0: " << list(cfg.x0) << "\n";
    os << "duration: " << fmt_double(cfg.duration) << "\n";
    os << "step: " << fmt_double(cfg.step) << "\n";
    os << "record_stride: " << cfg.record_stride << "\n";
    os << "settling_tolerance: " << fmt_double(cfg.settling_tolerance) << "\n";
    os << "allow_unit_frequency: " << (cfg.allow_unit_frequency ? "true" : "false") << "\n";
    return os.str();
}

// ============================================================================
// Files
// ============================================================================

// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw Error("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

// ============================================================================
// Trajectory CSV
// ============================================================================

inline std::vector<std::string> csv_columns(const LoopLayout& layout) {
    std::vector<std::string> cols = {"t",  "x1",      "x2",  "x3",  "x4",  "y",  "e",
                                     "u",  "F_d",     "F_d_hat", "v_p", "v_s", "e_p"};
    for (std::size_t i = 1; i <= layout.xi_size(); ++i) cols.push_back("xi_" + std::to_string(i));
    for (std::size_t i = 1; i <= 4; ++i) cols.push_back("xs_hat_" + std::to_string(i));
    for (std::size_t i = 1; i <= 4; ++i) cols.push_back("xp_hat_" + std::to_string(i));
    for (std::size_t i = 1; i <= layout.m; ++i) cols.push_back("w_" + std::to_string(i));
    return cols;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

inline std::string trajectory_csv(const Trajectory& traj, double r) {
    const auto& L = traj.layout;
    std::string out;
    const auto cols = csv_columns(L);
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const Vector& z = traj.state[k];
        const LoopSignals& s = traj.signals[k];
        const Vec4 x = LoopLayout::vec4(z, L.x());
        const Vec4 xs = LoopLayout::vec4(z, L.x_s_hat());
        const Vec4 xp = primary_estimate(x, xs);
        std::vector<double> row = {traj.time[k], x[0], x[1], x[2], x[3], x[2], x[2] - r,
                                   s.u, s.F_d, s.F_d_hat, s.v_p, s.v_s, s.e_p};
        for (std::size_t i = 0; i < L.xi_size(); ++i) row.push_back(z[L.xi() + i]);
        row.insert(row.end(), xs.begin(), xs.end());
        row.insert(row.end(), xp.begin(), xp.end());
        for (std::size_t i = 0; i < L.m; ++i) row.push_back(z[L.w() + i]);
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += "\n";
    }
    return out;
}

// ============================================================================
// Reports
// ============================================================================

inline nlohmann::ordered_json gates_json(const GateReport& gates) {
    nlohmann::ordered_json j;
    j["passed"] = gates.passed();
    j["max_re_eig_A"] = gates.margin_A ? nlohmann::ordered_json(*gates.margin_A) : nlohmann::ordered_json(nullptr);
    j["max_re_eig_A_a"] =
        gates.margin_Aa ? nlohmann::ordered_json(*gates.margin_Aa) : nlohmann::ordered_json(nullptr);
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : gates.validation.checks)
        arr.push_back({{"check", c.name}, {"status", to_string(c.status)}, {"detail", c.detail}});
    j["checks"] = arr;
    return j;
}

inline nlohmann::ordered_json report_json(const RunReport& rep, const ScenarioConfig& cfg) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["reference"] = cfg.r;
    j["duration"] = rep.final_time;
    j["step"] = cfg.step;
    j["record_stride"] = cfg.record_stride;
    j["steps"] = rep.steps;
    j["samples"] = rep.samples;
    j["final_output"] = rep.final_output;
    j["final_tracking_error"] = rep.final_tracking_error;
    j["settling_tolerance"] = rep.settling_tolerance;
    j["settling_time"] = opt(rep.settling_time);
    j["max_state_norm_inf"] = rep.max_state_norm_inf;
    j["max_abs_control"] = rep.max_abs_control;
    j["max_xi_norm_inf"] = rep.max_xi_norm_inf;
    j["max_secondary_estimate_norm_inf"] = rep.max_secondary_estimate_norm_inf;
    j["max_re_eig_A"] = rep.margin_A;
    j["max_re_eig_A_a"] = rep.margin_Aa;
    j["observer_lyapunov_max_increase"] = rep.lyapunov_max_increase;
    j["observer_lyapunov_monotone"] = rep.lyapunov_monotone;
    j["exosystem_norm_drift"] = rep.exo_norm_drift;
    j["observer_product_residual_after_50"] = opt(rep.observer_product_residual);
    j["decomposition_identity_residual"] = rep.decomposition_identity_residual;
    j["horizon_too_short"] = rep.horizon_too_short;
    return j;
}

}  // namespace asd::io
