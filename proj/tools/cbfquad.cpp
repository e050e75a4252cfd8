#include "cbfquad/cbfquad.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace cbfquad;

namespace {

enum ExitCode
{
    kOk = 0,
    kSafetyViolation = 1,
    kBadConfig = 2,
    kDiverged = 3,
};

struct Args
{
    std::string config;
    bool no_filter = false;
    std::optional<double> duration;
    std::optional<std::string> out;
    bool svg = false;
    bool csv = false;
};

void add_common(CLI::App* cmd, Args& a)
{
    cmd->add_option("config", a.config, "scenario file")->required();
    cmd->add_flag("--no-filter", a.no_filter, "bypass the safety filter");
    cmd->add_option("--duration", a.duration, "override the simulated duration [s]")->check(CLI::PositiveNumber);
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_flag("--svg", a.svg, "write SVG plots");
    cmd->add_flag("--csv", a.csv, "write log.csv");
}

ScenarioFile load(const Args& a)
{
    ScenarioFile sf = load_scenario(a.config);
    if (a.no_filter) sf.sim.filter_enabled = false;
    if (a.duration) {
        sf.sim.duration = *a.duration;
        try {
            sf.sim.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("--duration", 0, e.what());
        }
    }
    if (a.svg) sf.output.svg = true;
    if (a.csv) sf.output.csv = true;
    if (a.out)
        sf.output.dir = *a.out;
    else if (const char* env = std::getenv("CBFQUAD_OUT_DIR"); env && *env)
        sf.output.dir = env;
    return sf;
}

int exit_code(const SafetyReport& r)
{
    switch (r.status) {
    case ExitStatus::ok: return kOk;
    case ExitStatus::safety_violation: return kSafetyViolation;
    case ExitStatus::diverged: return kDiverged;
    }
    return kSafetyViolation;
}

void warn_initial_set(const ScenarioFile& sf, const InitialSetReport& rep)
{
    if (!sf.sim.filter_enabled || rep.all_inside()) return;
    static const char* axes = "xyz";
    for (int a = 0; a < kNumAxes; ++a)
        for (int i = 0; i < kRelativeDegree; ++i)
            if (!rep.member[a][i])
                std::cerr << "warning: initial state outside C_" << i << " on axis " << axes[a] << '\n';
}

SafetyReport run_and_write(const ScenarioFile& sf)
{
    const ScenarioResult res = run_scenario(sf.sim);
    warn_initial_set(sf, res.initial_set);
    if (res.status == RunStatus::diverged)
        std::cerr << "simulation diverged at t = " << format_number(res.log.back().t) << " s\n";

    if (sf.output.csv || sf.output.svg) fs::create_directories(sf.output.dir);
    const fs::path dir(sf.output.dir);
    if (sf.output.csv) {
        std::ofstream os(dir / "log.csv");
        write_csv(os, res.log);
        if (!os) throw std::runtime_error("failed to write " + (dir / "log.csv").string());
    }
    if (sf.output.svg) {
        std::ofstream path_os(dir / "path.svg");
        write_path_svg(path_os, res.log, sf.sim.cbf, sf.name + " path");
        std::ofstream in_os(dir / "inputs.svg");
        write_inputs_svg(in_os, res.log, sf.name + " inputs");
    }
    return make_report(res.log, sf.sim.cbf, sf.sim.control_period, res.status);
}

int cmd_run(const Args& a)
{
    const ScenarioFile sf = load(a);
    const SafetyReport rep = run_and_write(sf);
    std::cout << "scenario: " << sf.name << (sf.sim.filter_enabled ? "" : " (filter disabled)") << '\n';
    print_report(std::cout, rep);
    return exit_code(rep);
}

int cmd_report(const Args& a)
{
    const ScenarioFile sf = load(a);
    const fs::path csv = fs::path(sf.output.dir) / "log.csv";
    SafetyReport rep;
    if (fs::exists(csv)) {
        std::ifstream is(csv);
        const auto log = read_csv(is);
        // A truncated log means the run stopped early.
        const bool short_log = static_cast<long>(log.size()) < sf.sim.ticks() + 1;
        rep = make_report(log, sf.sim.cbf, sf.sim.control_period,
                          short_log ? RunStatus::diverged : RunStatus::completed);
        std::cout << "source: " << csv.string() << '\n';
    } else {
        rep = run_and_write(sf);
        std::cout << "source: fresh run\n";
    }
    print_report(std::cout, rep);
    return exit_code(rep);
}

int cmd_validate(const Args& a)
{
    const ScenarioFile sf = load(a);
    const QuadParams& q = sf.sim.quad;
    const CbfParams& c = sf.sim.cbf;
    auto f3 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        return std::string(buf);
    };
    auto v3 = [&](const auto& v) {
        std::string s;
        for (int i = 0; i < v.size(); ++i) s += (i ? " " : "") + f3(v[i]);
        return s;
    };
    std::cout << "config ok: " << sf.name << '\n';
    std::cout << "m = " << f3(q.mass) << '\n';
    std::cout << "J = " << v3(q.inertia) << '\n';
    std::cout << "f_Tmax = " << f3(q.u_max[0]) << '\n';
    std::cout << "tau_max = " << v3(q.u_max.tail<3>()) << '\n';
    std::cout << "poles_x = " << v3(c.axis_poles(0)) << '\n';
    std::cout << "poles_y = " << v3(c.axis_poles(1)) << '\n';
    std::cout << "poles_z = " << v3(c.axis_poles(2)) << '\n';
    std::cout << "r_min = " << v3(c.r_min) << '\n';
    std::cout << "r_max = " << v3(c.r_max) << '\n';
    std::cout << "duration = " << f3(sf.sim.duration) << " s, records = " << sf.sim.ticks() + 1 << '\n';

    const ControlInput u0 = make_controller(sf.sim)(0.0, sf.sim.initial_state);
    const InitialSetReport rep = check_initial_set(sf.sim.initial_state, u0, c, q);
    std::cout << "initial state inside barrier sets: " << (rep.all_inside() ? "yes" : "no") << '\n';
    if (sf.sim.filter_enabled && sf.sim.initial_set_policy == InitialSetPolicy::strict && !rep.all_inside()) {
        std::cerr << "error: initial state outside the barrier sets (strict policy)\n";
        return kBadConfig;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quadrotor position-box safety filter simulator"};
    app.require_subcommand(1);
    Args args;
    CLI::App* run = app.add_subcommand("run", "simulate a scenario and write outputs");
    CLI::App* report = app.add_subcommand("report", "print the safety report for a scenario");
    CLI::App* validate = app.add_subcommand("validate", "check a scenario file without running it");
    for (CLI::App* c : {run, report, validate}) add_common(c, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kBadConfig;
    }

    try {
        if (*run) return cmd_run(args);
        if (*report) return cmd_report(args);
        return cmd_validate(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kBadConfig;
    } catch (const InitialSetViolation& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return kBadConfig;
    } catch (const CsvError& e) {
        std::cerr << "log error: " << e.what() << '\n';
        return kBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBadConfig;
    }
}
