// Command-line front end: validate a scenario (`check`), simulate it (`run`),
// or print a built-in scenario as a config file (`config`).

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "asd/asd.hpp"
#include "asd/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGateFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Source {
    std::string config_path;
    std::string scenario;
    bool allow_unit_frequency = false;

    void attach(CLI::App* cmd) {
        auto* cfg = cmd->add_option("--config", config_path, "Scenario config file (YAML)");
        auto* scn = cmd->add_option("--scenario", scenario, "Built-in scenario name (paper-1, paper-2)");
        cfg->excludes(scn);
        cmd->add_flag("--allow-unit-frequency", allow_unit_frequency,
                      "Accept exosystem eigenvalues at +-j and leave that component out of the internal model");
    }

    [[nodiscard]] asd::ScenarioConfig load() const {
        asd::ScenarioConfig cfg;
        if (!config_path.empty()) {
            cfg = asd::io::load_config(config_path);
        } else if (!scenario.empty()) {
            auto found = asd::scenarios::find(scenario);
            if (!found) throw CLI::ValidationError("--scenario", "unknown scenario '" + scenario + "'");
            cfg = *found;
        } else {
            throw CLI::RequiredError("--config or --scenario");
        }
        if (allow_unit_frequency) cfg.allow_unit_frequency = true;
        return cfg;
    }
};

void print_gates(const asd::GateReport& gates) {
    for (const auto& c : gates.validation.checks) {
        std::printf("%-10s %-28s %s\n", asd::to_string(c.status), c.name.c_str(), c.detail.c_str());
    }
    if (gates.margin_A) std::printf("max Re lambda(A)   = %.6g\n", *gates.margin_A);
    if (gates.margin_Aa) std::printf("max Re lambda(A_a) = %.6g\n", *gates.margin_Aa);
    std::printf("%s\n", gates.passed() ? "all gates passed" : "configuration rejected");
}

int cmd_check(const Source& src, bool json) {
    const asd::ScenarioConfig cfg = src.load();
    const asd::GateReport gates = asd::check_gates(cfg);
    if (json)
        std::cout << asd::io::gates_json(gates).dump(2) << "\n";
    else
        print_gates(gates);
    return gates.passed() ? kExitOk : kExitGateFailed;
}

struct RunOptions {
    std::optional<double> duration;
    std::optional<double> step;
    std::optional<std::size_t> stride;
    std::string out = "trajectory.csv";
    std::string report = "report.json";
};

int cmd_run(const Source& src, const RunOptions& opts) {
    asd::ScenarioConfig cfg = src.load();
    if (opts.duration) cfg.duration = *opts.duration;
    if (opts.step) cfg.step = *opts.step;
    if (opts.stride) cfg.record_stride = *opts.stride;

    const asd::GateReport gates = asd::check_gates(cfg);
    if (!gates.passed()) {
        print_gates(gates);
        return kExitGateFailed;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const asd::RunResult result = asd::run(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    asd::io::write_file_atomic(opts.out, asd::io::trajectory_csv(result.trajectory, cfg.r));
    auto report = asd::io::report_json(result.report, cfg);
    report["gates"] = asd::io::gates_json(gates);
    asd::io::write_file_atomic(opts.report, report.dump(2) + "\n");

    const auto& rep = result.report;
    std::printf("steps %zu, samples %zu, wall %.2f s\n", rep.steps, rep.samples, wall);
    std::printf("final |y(T) - r| = %.6e at T = %g\n", rep.final_tracking_error, rep.final_time);
    if (rep.settling_time)
        std::printf("settling time (|y - r| < %g) = %g\n", rep.settling_tolerance, *rep.settling_time);
    else
        std::printf("settling time (|y - r| < %g) = not reached\n", rep.settling_tolerance);
    if (rep.horizon_too_short) std::printf("warning: horizon too short for the slowest closed-loop mode\n");
    std::printf("wrote %s and %s\n", opts.out.c_str(), opts.report.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Additive-state-decomposition tracking control of the TORA benchmark"};
    app.require_subcommand(1);

    Source check_src;
    bool json = false;
    auto* check = app.add_subcommand("check", "Validate a scenario and report stability margins");
    check_src.attach(check);
    check->add_flag("--json", json, "Machine-readable output");

    Source run_src;
    RunOptions run_opts;
    auto* run = app.add_subcommand("run", "Simulate a scenario and write trajectory CSV and report");
    run_src.attach(run);
    run->add_option("--duration", run_opts.duration, "Simulated time units")->check(CLI::NonNegativeNumber);
    run->add_option("--step", run_opts.step, "RK4 step size")->check(CLI::PositiveNumber);
    run->add_option("--stride", run_opts.stride, "Record every N steps")->check(CLI::PositiveNumber);
    run->add_option("--out", run_opts.out, "Trajectory CSV path")->capture_default_str();
    run->add_option("--report", run_opts.report, "Run report path (JSON)")->capture_default_str();

    std::string show_name;
    auto* show = app.add_subcommand("config", "Print a built-in scenario as a config file");
    show->add_option("--scenario", show_name, "Built-in scenario name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*check) return cmd_check(check_src, json);
        if (*run) return cmd_run(run_src, run_opts);
        if (*show) {
            auto cfg = asd::scenarios::find(show_name);
            if (!cfg) {
                std::fprintf(stderr, "error: unknown scenario '%s'\n", show_name.c_str());
                return kExitUsage;
            }
            std::cout << asd::io::serialize_config(*cfg);
            return kExitOk;
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const asd::io::ConfigParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const asd::ConfigurationError& e) {
        std::fprintf(stderr, "configuration rejected (%s): %s\n", e.check().c_str(), e.what());
        return kExitGateFailed;
    } catch (const asd::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
