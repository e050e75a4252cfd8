#pragma once

// Scenario files: INI-style sections of `key = value` lines. Vectors are
// whitespace-separated numbers, `#` starts a comment. Every key of the schema
// is required; unknown or duplicate keys are rejected with their line number.

#include "cbfquad/sim.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cbfquad {

struct OutputOptions
{
    std::string dir = "out";
    bool csv = true;
    bool svg = false;

    friend bool operator==(const OutputOptions&, const OutputOptions&) = default;
};

struct ScenarioFile
{
    std::string name = "scenario";
    SimConfig sim;
    OutputOptions output;
};

class ConfigError : public std::runtime_error
{
public:
    ConfigError(const std::string& source, int line, const std::string& what)
        : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
          line_(line)
    {
    }

    /// 1-based line of the offending entry, 0 when the error is file-level.
    int line() const { return line_; }

private:
    int line_;
};

namespace detail {

struct ConfigEntry
{
    std::string value;
    int line = 0;
    bool used = false;
};

struct ConfigSection
{
    int line = 0;
    std::map<std::string, ConfigEntry> entries;
};

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

class ConfigReader
{
public:
    ConfigReader(std::istream& in, std::string source) : source_(std::move(source))
    {
        std::string raw;
        int line_no = 0;
        ConfigSection* current = nullptr;
        while (std::getline(in, raw)) {
            ++line_no;
            const auto hash = raw.find('#');
            const std::string line = trim(std::string_view(raw).substr(0, hash));
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail(line_no, "malformed section header '" + line + "'");
                const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
                if (sections_.count(name)) fail(line_no, "duplicate section [" + name + "]");
                current = &sections_[name];
                current->line = line_no;
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
            if (!current) fail(line_no, "entry outside of any section");
            const std::string key = trim(std::string_view(line).substr(0, eq));
            const std::string value = trim(std::string_view(line).substr(eq + 1));
            if (key.empty()) fail(line_no, "empty key");
            if (current->entries.count(key)) fail(line_no, "duplicate key '" + key + "'");
            current->entries[key] = {value, line_no, false};
        }
    }

    [[noreturn]] void fail(int line, const std::string& what) const { throw ConfigError(source_, line, what); }

    bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

    const ConfigEntry& entry(const std::string& section, const std::string& key)
    {
        auto sit = sections_.find(section);
        if (sit == sections_.end()) fail(0, "missing section [" + section + "]");
        auto it = sit->second.entries.find(key);
        if (it == sit->second.entries.end())
            fail(sit->second.line, "missing key '" + key + "' in [" + section + "]");
        it->second.used = true;
        return it->second;
    }

    std::string text(const std::string& section, const std::string& key) { return entry(section, key).value; }

    std::vector<double> numbers(const std::string& section, const std::string& key, std::size_t count)
    {
        const ConfigEntry& e = entry(section, key);
        std::vector<double> out;
        std::istringstream ss(e.value);
        std::string tok;
        while (ss >> tok) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                fail(e.line, "'" + key + "': cannot parse number '" + tok + "'");
            out.push_back(v);
        }
        if (out.size() != count)
            fail(e.line, "'" + key + "': expected " + std::to_string(count) + " number(s), got " +
                             std::to_string(out.size()));
        return out;
    }

    double number(const std::string& section, const std::string& key) { return numbers(section, key, 1)[0]; }

    Vec3 vec3(const std::string& section, const std::string& key)
    {
        const auto v = numbers(section, key, 3);
        return {v[0], v[1], v[2]};
    }

    Vec4 vec4(const std::string& section, const std::string& key)
    {
        const auto v = numbers(section, key, 4);
        return {v[0], v[1], v[2], v[3]};
    }

    bool boolean(const std::string& section, const std::string& key)
    {
        const ConfigEntry& e = entry(section, key);
        if (e.value == "true") return true;
        if (e.value == "false") return false;
        fail(e.line, "'" + key + "': expected true or false");
    }

    int line_of(const std::string& section, const std::string& key) { return entry(section, key).line; }

    /// Rejects sections and keys that the schema never asked for.
    void reject_unused() const
    {
        for (const auto& [name, sec] : sections_) {
            bool any_used = false;
            for (const auto& [key, e] : sec.entries) any_used = any_used || e.used;
            if (!any_used && !sec.entries.empty()) fail(sec.line, "unknown section [" + name + "]");
            for (const auto& [key, e] : sec.entries)
                if (!e.used) fail(e.line, "unknown key '" + key + "' in [" + name + "]");
        }
    }

private:
    std::string source_;
    std::map<std::string, ConfigSection> sections_;
};

inline std::string fmt_exact(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <typename Vec>
std::string fmt_vec(const Vec& v)
{
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += fmt_exact(v[i]);
    }
    return out;
}

}  // namespace detail

inline bool operator==(const QuadState& a, const QuadState& b)
{
    return a.position == b.position && a.velocity == b.velocity && a.attitude.coeffs() == b.attitude.coeffs() &&
           a.body_rate == b.body_rate;
}

inline bool operator==(const FilterOptions& a, const FilterOptions& b)
{
    return a.weights == b.weights && a.slack_penalty == b.slack_penalty;
}

inline bool same_sim_config(const SimConfig& a, const SimConfig& b)
{
    return a.dt_physics == b.dt_physics && a.control_period == b.control_period && a.duration == b.duration &&
           a.initial_state == b.initial_state && a.kind == b.kind && a.cbf == b.cbf && a.quad == b.quad &&
           a.gains == b.gains && a.constant_input == b.constant_input && a.filter_options == b.filter_options &&
           a.filter_enabled == b.filter_enabled && a.initial_set_policy == b.initial_set_policy && a.seed == b.seed;
}

inline bool operator==(const ScenarioFile& a, const ScenarioFile& b)
{
    return a.name == b.name && a.output == b.output && same_sim_config(a.sim, b.sim);
}

inline ScenarioFile parse_scenario(std::istream& in, const std::string& source = "<config>")
{
    detail::ConfigReader cfg(in, source);
    ScenarioFile sf;
    SimConfig& sim = sf.sim;

    sf.name = cfg.text("scenario", "name");
    const std::string kind = cfg.text("scenario", "kind");
    if (kind == "tracking")
        sim.kind = ScenarioKind::tracking;
    else if (kind == "constant_input")
        sim.kind = ScenarioKind::constant_input;
    else
        cfg.fail(cfg.line_of("scenario", "kind"), "kind must be 'tracking' or 'constant_input'");

    QuadParams& q = sim.quad;
    q.mass = cfg.number("quad", "mass");
    q.inertia = cfg.vec3("quad", "inertia");
    q.arm_length = cfg.number("quad", "arm_length");
    q.thrust_coeff = cfg.number("quad", "thrust_coeff");
    q.moment_coeff = cfg.number("quad", "moment_coeff");
    q.gravity = cfg.number("quad", "gravity");
    q.u_min = cfg.vec4("quad", "u_min");
    q.u_max = cfg.vec4("quad", "u_max");
    q.gyro_torque_enabled = cfg.boolean("quad", "gyro_torque_enabled");
    q.gyro_torque = cfg.vec3("quad", "gyro_torque");

    CbfParams& c = sim.cbf;
    const char* pole_keys[3] = {"poles_x", "poles_y", "poles_z"};
    for (int axis = 0; axis < 3; ++axis) {
        const Vec4 p = cfg.vec4("cbf", pole_keys[axis]);
        for (int i = 0; i < 4; ++i) c.pole_gains[i][axis] = p[i];
    }
    c.r_min = cfg.vec3("cbf", "r_min");
    c.r_max = cfg.vec3("cbf", "r_max");
    c.thrust_floor = cfg.number("cbf", "thrust_floor");

    sim.filter_enabled = cfg.boolean("filter", "enabled");
    sim.filter_options.weights = cfg.vec4("filter", "weights");
    sim.filter_options.slack_penalty = cfg.number("filter", "slack_penalty");
    const std::string policy = cfg.text("filter", "initial_set_policy");
    if (policy == "warn")
        sim.initial_set_policy = InitialSetPolicy::warn;
    else if (policy == "strict")
        sim.initial_set_policy = InitialSetPolicy::strict;
    else
        cfg.fail(cfg.line_of("filter", "initial_set_policy"), "initial_set_policy must be 'warn' or 'strict'");

    sim.dt_physics = cfg.number("sim", "dt_physics");
    sim.control_period = cfg.number("sim", "control_period");
    sim.duration = cfg.number("sim", "duration");
    const double seed = cfg.number("sim", "seed");
    if (seed < 0.0 || seed != std::floor(seed) || seed > 4294967295.0)
        cfg.fail(cfg.line_of("sim", "seed"), "seed must be a non-negative integer");
    sim.seed = static_cast<unsigned>(seed);

    sim.initial_state.position = cfg.vec3("initial_state", "position");
    sim.initial_state.velocity = cfg.vec3("initial_state", "velocity");
    const Vec4 qv = cfg.vec4("initial_state", "attitude");
    sim.initial_state.attitude = Quat(qv[0], qv[1], qv[2], qv[3]);
    sim.initial_state.body_rate = cfg.vec3("initial_state", "body_rate");

    if (sim.kind == ScenarioKind::tracking) {
        sim.gains.kp = cfg.vec3("controller", "kp");
        sim.gains.kd = cfg.vec3("controller", "kd");
        sim.gains.k_attitude = cfg.vec3("controller", "k_attitude");
        sim.gains.k_rate = cfg.vec3("controller", "k_rate");
    } else {
        sim.constant_input = ControlInput::from_vector(cfg.vec4("controller", "input"));
    }

    sf.output.dir = cfg.text("output", "dir");
    sf.output.csv = cfg.boolean("output", "csv");
    sf.output.svg = cfg.boolean("output", "svg");

    cfg.reject_unused();

    try {
        sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source, 0, e.what());
    }
    return sf;
}

inline ScenarioFile load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open file");
    return parse_scenario(in, path);
}

inline std::string serialize_scenario(const ScenarioFile& sf)
{
    using detail::fmt_exact;
    using detail::fmt_vec;
    const SimConfig& sim = sf.sim;
    std::ostringstream o;
    o << "[scenario]\n";
    o << "name = " << sf.name << "\n";
    o << "kind = " << (sim.kind == ScenarioKind::tracking ? "tracking" : "constant_input") << "\n\n";

    const QuadParams& q = sim.quad;
    o << "[quad]\n";
    o << "mass = " << fmt_exact(q.mass) << "\n";
    o << "inertia = " << fmt_vec(q.inertia) << "\n";
    o << "arm_length = " << fmt_exact(q.arm_length) << "\n";
    o << "thrust_coeff = " << fmt_exact(q.thrust_coeff) << "\n";
    o << "moment_coeff = " << fmt_exact(q.moment_coeff) << "\n";
    o << "gravity = " << fmt_exact(q.gravity) << "\n";
    o << "u_min = " << fmt_vec(q.u_min) << "\n";
    o << "u_max = " << fmt_vec(q.u_max) << "\n";
    o << "gyro_torque_enabled = " << (q.gyro_torque_enabled ? "true" : "false") << "\n";
    o << "gyro_torque = " << fmt_vec(q.gyro_torque) << "\n\n";

    const CbfParams& c = sim.cbf;
    o << "[cbf]\n";
    const char* pole_keys[3] = {"poles_x", "poles_y", "poles_z"};
    for (int axis = 0; axis < 3; ++axis) {
        const auto p = c.axis_poles(axis);
        o << pole_keys[axis] << " = " << fmt_vec(Vec4(p[0], p[1], p[2], p[3])) << "\n";
    }
    o << "r_min = " << fmt_vec(c.r_min) << "\n";
    o << "r_max = " << fmt_vec(c.r_max) << "\n";
    o << "thrust_floor = " << fmt_exact(c.thrust_floor) << "\n\n";

    o << "[filter]\n";
    o << "enabled = " << (sim.filter_enabled ? "true" : "false") << "\n";
    o << "weights = " << fmt_vec(sim.filter_options.weights) << "\n";
    o << "slack_penalty = " << fmt_exact(sim.filter_options.slack_penalty) << "\n";
    o << "initial_set_policy = " << (sim.initial_set_policy == InitialSetPolicy::strict ? "strict" : "warn")
      << "\n\n";

    o << "[sim]\n";
    o << "dt_physics = " << fmt_exact(sim.dt_physics) << "\n";
    o << "control_period = " << fmt_exact(sim.control_period) << "\n";
    o << "duration = " << fmt_exact(sim.duration) << "\n";
    o << "seed = " << sim.seed << "\n\n";

    const Quat& qa = sim.initial_state.attitude;
    o << "[initial_state]\n";
    o << "position = " << fmt_vec(sim.initial_state.position) << "\n";
    o << "velocity = " << fmt_vec(sim.initial_state.velocity) << "\n";
    o << "attitude = " << fmt_vec(Vec4(qa.w(), qa.x(), qa.y(), qa.z())) << "\n";
    o << "body_rate = " << fmt_vec(sim.initial_state.body_rate) << "\n\n";

    o << "[controller]\n";
    if (sim.kind == ScenarioKind::tracking) {
        o << "kp = " << fmt_vec(sim.gains.kp) << "\n";
        o << "kd = " << fmt_vec(sim.gains.kd) << "\n";
        o << "k_attitude = " << fmt_vec(sim.gains.k_attitude) << "\n";
        o << "k_rate = " << fmt_vec(sim.gains.k_rate) << "\n\n";
    } else {
        o << "input = " << fmt_vec(sim.constant_input.as_vector()) << "\n\n";
    }

    o << "[output]\n";
    o << "dir = " << sf.output.dir << "\n";
    o << "csv = " << (sf.output.csv ? "true" : "false") << "\n";
    o << "svg = " << (sf.output.svg ? "true" : "false") << "\n";
    return o.str();
}

}  // namespace cbfquad
