// Minimal library usage: take a built-in scenario, change the reference,
// check the gates and simulate a short horizon.

#include <cstdio>

#include "asd/asd.hpp"

int main() {
    asd::ScenarioConfig cfg = asd::scenarios::paper_1();
    cfg.r = 0.3;
    cfg.duration = 300.0;
    cfg.record_stride = 10000;

    const asd::GateReport gates = asd::check_gates(cfg);
    for (const auto& c : gates.validation.checks)
        std::printf("%-10s %s\n", asd::to_string(c.status), c.name.c_str());
    if (!gates.passed()) return 1;
    std::printf("margins: A %.6f, A_a %.6f\n", *gates.margin_A, *gates.margin_Aa);

    const asd::RunResult res = asd::run(cfg);
    const auto& traj = res.trajectory;
    for (std::size_t k = 0; k < traj.size(); ++k)
        std::printf("t = %6.1f  y = % .6f  u = % .6f\n", traj.time[k], traj.state[k][2], traj.signals[k].u);
    std::printf("final |y - r| = %.3e\n", res.report.final_tracking_error);
    return 0;
}
