#pragma once

// CSV persistence of simulation logs and the safety report derived from them.
// Numbers are written with 9 significant digits in the C locale; the report is
// always computed from log values at that precision so that a report rebuilt
// from the CSV matches the in-memory one exactly.

#include "cbfquad/sim.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cbfquad {

inline constexpr const char* kCsvHeader =
    "t,rx,ry,rz,vx,vy,vz,qw,qx,qy,qz,phi,theta,psi,p,q,r,fT_nom,taux_nom,tauy_nom,tauz_nom,"
    "fT_safe,taux_safe,tauy_safe,tauz_safe,slack,filter_active";
inline constexpr int kCsvColumns = 27;

class CsvError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_number(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

inline double parse_number(std::string_view s)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw CsvError("bad number '" + std::string(s) + "'");
    return v;
}

/// Rounds to what the CSV stores.
inline double quantize(double v) { return parse_number(format_number(v)); }

namespace detail {

inline std::array<double, kCsvColumns> to_row(const LogRecord& r)
{
    const Quat& q = r.state.attitude;
    return {r.t,
            r.state.position.x(), r.state.position.y(), r.state.position.z(),
            r.state.velocity.x(), r.state.velocity.y(), r.state.velocity.z(),
            q.w(), q.x(), q.y(), q.z(),
            r.euler.roll, r.euler.pitch, r.euler.yaw,
            r.state.body_rate.x(), r.state.body_rate.y(), r.state.body_rate.z(),
            r.nominal.thrust, r.nominal.torque.x(), r.nominal.torque.y(), r.nominal.torque.z(),
            r.safe.thrust, r.safe.torque.x(), r.safe.torque.y(), r.safe.torque.z(),
            r.slack, r.filter_active ? 1.0 : 0.0};
}

inline LogRecord from_row(const std::array<double, kCsvColumns>& c)
{
    LogRecord r;
    r.t = c[0];
    r.state.position = Vec3(c[1], c[2], c[3]);
    r.state.velocity = Vec3(c[4], c[5], c[6]);
    r.state.attitude = Quat(c[7], c[8], c[9], c[10]);
    r.euler.roll = c[11];
    r.euler.pitch = c[12];
    r.euler.yaw = c[13];
    r.state.body_rate = Vec3(c[14], c[15], c[16]);
    r.nominal = ControlInput{c[17], Vec3(c[18], c[19], c[20])};
    r.safe = ControlInput{c[21], Vec3(c[22], c[23], c[24])};
    r.slack = c[25];
    r.filter_active = c[26] != 0.0;
    return r;
}

}  // namespace detail

/// Rounds every persisted field of the record to CSV precision. Fields the
/// CSV does not carry (v-chain minima, the gimbal-lock flag) are cleared.
inline LogRecord quantize(const LogRecord& r)
{
    auto row = detail::to_row(r);
    for (double& v : row) v = quantize(v);
    return detail::from_row(row);
}

inline std::vector<LogRecord> quantize(const std::vector<LogRecord>& log)
{
    std::vector<LogRecord> out;
    out.reserve(log.size());
    for (const auto& r : log) out.push_back(quantize(r));
    return out;
}

inline void write_csv(std::ostream& os, const std::vector<LogRecord>& log)
{
    os << kCsvHeader << '\n';
    for (const auto& r : log) {
        const auto row = detail::to_row(r);
        for (int i = 0; i < kCsvColumns; ++i) {
            if (i) os << ',';
            if (i == kCsvColumns - 1)
                os << (r.filter_active ? '1' : '0');
            else
                os << format_number(row[i]);
        }
        os << '\n';
    }
}

inline std::vector<LogRecord> read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw CsvError("empty log");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw CsvError("unexpected CSV header");
    std::vector<LogRecord> log;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<double, kCsvColumns> row{};
        std::size_t pos = 0;
        for (int i = 0; i < kCsvColumns; ++i) {
            const std::size_t comma = line.find(',', pos);
            const bool last = i == kCsvColumns - 1;
            if (last != (comma == std::string::npos))
                throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(kCsvColumns) +
                               " columns");
            const std::string_view field =
                std::string_view(line).substr(pos, last ? std::string::npos : comma - pos);
            try {
                row[i] = parse_number(field);
            } catch (const CsvError& e) {
                throw CsvError("line " + std::to_string(line_no) + ": " + e.what());
            }
            pos = comma + 1;
        }
        log.push_back(detail::from_row(row));
    }
    return log;
}

/// Net rotation, in turns, of the body z-axis about the inertial x and y axes.
/// A barrel roll about a horizontal axis shows up as one full turn.
inline double max_horizontal_axis_turns(const std::vector<LogRecord>& log)
{
    double about_x = 0.0;
    double about_y = 0.0;
    double prev_x = 0.0;
    double prev_y = 0.0;
    auto wrap = [](double d) { return std::remainder(d, 2.0 * std::numbers::pi); };
    for (std::size_t i = 0; i < log.size(); ++i) {
        const Vec3 zb = log[i].state.attitude.normalized().toRotationMatrix().col(2);
        const double ay = std::atan2(zb.x(), zb.z());
        const double ax = std::atan2(-zb.y(), zb.z());
        if (i > 0) {
            about_y += wrap(ay - prev_y);
            about_x += wrap(ax - prev_x);
        }
        prev_x = ax;
        prev_y = ay;
    }
    return std::max(std::abs(about_x), std::abs(about_y)) / (2.0 * std::numbers::pi);
}

enum class ExitStatus
{
    ok = 0,
    safety_violation = 1,
    diverged = 3,
};

inline constexpr double kBoxTolerance = 0.05;

struct SafetyReport
{
    long records = 0;
    Vec3 r_min = Vec3::Zero();
    Vec3 r_max = Vec3::Zero();
    Vec3 min_position = Vec3::Zero();
    Vec3 max_position = Vec3::Zero();
    /// Largest distance by which any axis left the box (0 if never).
    double max_excursion = 0.0;
    std::optional<double> first_active;
    std::optional<double> last_active;
    double active_duration = 0.0;
    double max_slack = 0.0;
    int completed_rolls = 0;
    ExitStatus status = ExitStatus::ok;

    friend bool operator==(const SafetyReport&, const SafetyReport&) = default;
};

/// Summarizes a log as persisted; records are quantized to CSV precision
/// before use.
inline SafetyReport make_report(const std::vector<LogRecord>& raw_log, const CbfParams& cbf, double control_period,
                                RunStatus run_status = RunStatus::completed, double tolerance = kBoxTolerance)
{
    const std::vector<LogRecord> log = quantize(raw_log);
    SafetyReport rep;
    rep.records = static_cast<long>(log.size());
    rep.r_min = cbf.r_min;
    rep.r_max = cbf.r_max;
    if (!log.empty()) {
        rep.min_position = log.front().state.position;
        rep.max_position = log.front().state.position;
    }
    long active_ticks = 0;
    for (const auto& r : log) {
        rep.min_position = rep.min_position.cwiseMin(r.state.position);
        rep.max_position = rep.max_position.cwiseMax(r.state.position);
        rep.max_slack = std::max(rep.max_slack, r.slack);
        if (r.filter_active) {
            ++active_ticks;
            if (!rep.first_active) rep.first_active = r.t;
            rep.last_active = r.t;
        }
    }
    rep.active_duration = static_cast<double>(active_ticks) * control_period;
    rep.max_excursion = std::max({0.0, (cbf.r_min - rep.min_position).maxCoeff(),
                                  (rep.max_position - cbf.r_max).maxCoeff()});
    rep.completed_rolls = static_cast<int>(std::floor(max_horizontal_axis_turns(log)));
    if (run_status == RunStatus::diverged)
        rep.status = ExitStatus::diverged;
    else if (rep.max_excursion > tolerance)
        rep.status = ExitStatus::safety_violation;
    return rep;
}

inline const char* to_string(ExitStatus s)
{
    switch (s) {
    case ExitStatus::ok: return "ok";
    case ExitStatus::safety_violation: return "safety-violation";
    case ExitStatus::diverged: return "diverged";
    }
    return "unknown";
}

inline void print_report(std::ostream& os, const SafetyReport& r)
{
    static const char* axes = "xyz";
    os << "records: " << r.records << '\n';
    for (int a = 0; a < 3; ++a) {
        os << "  " << axes[a] << ": min " << format_number(r.min_position[a]) << " (bound "
           << format_number(r.r_min[a]) << "), max " << format_number(r.max_position[a]) << " (bound "
           << format_number(r.r_max[a]) << ")\n";
    }
    os << "max box excursion: " << format_number(r.max_excursion) << " m\n";
    os << "filter active: ";
    if (r.first_active)
        os << "first " << format_number(*r.first_active) << " s, last " << format_number(*r.last_active)
           << " s, total " << format_number(r.active_duration) << " s\n";
    else
        os << "never\n";
    os << "max slack: " << format_number(r.max_slack) << '\n';
    os << "completed rolls: " << r.completed_rolls << '\n';
    os << "status: " << to_string(r.status) << '\n';
}

}  // namespace cbfquad
