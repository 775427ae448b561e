#pragma once

// Built-in scenarios: a single-frequency and a two-frequency disturbance on
// the same plant and controller.

#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asd/simulation.hpp"

namespace asd::scenarios {

inline ScenarioConfig paper_1() {
    ScenarioConfig cfg;
    cfg.epsilon = 0.2;
    cfg.r = 0.5;
    cfg.a = 1.0;
    cfg.K = {0.0, -cfg.epsilon, -1.0, -2.0};
    cfg.l1 = 10.0;
    cfg.l2 = 10.0;
    cfg.b = 1.5 * (1.0 - 1.0 / std::numbers::pi);
    cfg.exo.S = Matrix{{0.0, 2.0}, {-2.0, 0.0}};
    cfg.exo.C_d = {1.0, 0.0};
    cfg.exo.w0 = {0.0, 0.02};
    cfg.x0 = {0.0, 0.0, 0.0, 0.0};
    return cfg;
}

// Same controller; only the exosystem changes.
inline ScenarioConfig paper_2() {
    ScenarioConfig cfg = paper_1();
    cfg.exo.S = Matrix{{0.0, 2.0, 0.0, 0.0}, {-2.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 1.5}, {0.0, 0.0, -1.5, 0.0}};
    cfg.exo.C_d = {1.0, 0.0, 1.0, 0.0};
    cfg.exo.w0 = {0.0, 0.02, 0.0, 0.02};
    return cfg;
}

inline std::vector<std::string> names() { return {"paper-1", "paper-2"}; }

inline std::optional<ScenarioConfig> find(std::string_view name) {
    if (name == "paper-1") return paper_1();
    if (name == "paper-2") return paper_2();
    return std::nullopt;
}

}  // namespace asd::scenarios
