#pragma once

// Fixed-step closed loop: nominal controller -> safety filter -> zero-order
// hold over RK4 physics substeps.

#include "cbfquad/controllers.hpp"
#include "cbfquad/safety_filter.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace cbfquad {

inline QuadState rk4_step(const QuadState& s, const ControlInput& u, const QuadParams& params, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");

    using Vec13 = Eigen::Matrix<double, 13, 1>;
    auto pack = [](const StateDerivative& d) {
        Vec13 x;
        x << d.position_rate, d.acceleration, d.attitude_rate, d.angular_acceleration;
        return x;
    };
    auto offset = [&s](const Vec13& k, double h) {
        QuadState o;
        o.position = s.position + h * k.segment<3>(0);
        o.velocity = s.velocity + h * k.segment<3>(3);
        const Vec4 q = Vec4(s.attitude.w(), s.attitude.x(), s.attitude.y(), s.attitude.z()) + h * k.segment<4>(6);
        o.attitude = Quat(q[0], q[1], q[2], q[3]);
        o.body_rate = s.body_rate + h * k.segment<3>(10);
        return o;
    };

    const Vec13 k1 = pack(state_derivative(s, u, params));
    const Vec13 k2 = pack(state_derivative(offset(k1, 0.5 * dt), u, params));
    const Vec13 k3 = pack(state_derivative(offset(k2, 0.5 * dt), u, params));
    const Vec13 k4 = pack(state_derivative(offset(k3, dt), u, params));
    QuadState next = offset((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, dt);
    next.attitude.normalize();
    return next;
}

enum class ScenarioKind
{
    tracking,
    constant_input,
};

enum class InitialSetPolicy
{
    warn,
    strict,
};

struct SimConfig
{
    double dt_physics = 1e-3;
    double control_period = 1e-2;
    double duration = 70.0;
    QuadState initial_state;
    ScenarioKind kind = ScenarioKind::tracking;
    CbfParams cbf;
    QuadParams quad;
    PdGains gains;
    ControlInput constant_input;
    FilterOptions filter_options;
    bool filter_enabled = true;
    InitialSetPolicy initial_set_policy = InitialSetPolicy::warn;
    unsigned seed = 0;

    /// Number of physics substeps per control tick.
    int substeps() const { return static_cast<int>(std::lround(control_period / dt_physics)); }
    /// Number of control ticks; the log holds one more record than this.
    long ticks() const { return std::lround(duration / control_period); }

    void validate() const
    {
        if (!(dt_physics > 0.0)) throw InvalidParameters("dt_physics must be positive");
        if (!(control_period >= dt_physics)) throw InvalidParameters("control_period must be at least dt_physics");
        if (std::abs(substeps() * dt_physics - control_period) > 1e-9 * control_period)
            throw InvalidParameters("control_period must be an integer multiple of dt_physics");
        if (!(duration > 0.0)) throw InvalidParameters("duration must be positive");
        if (!initial_state.is_finite()) throw InvalidParameters("initial state must be finite");
        if (std::abs(initial_state.attitude.norm() - 1.0) > kUnitQuaternionTol)
            throw InvalidParameters("initial attitude must be a unit quaternion");
        if (!gains.valid()) throw InvalidParameters("PD gains must be finite and non-negative");
        if (!constant_input.is_finite()) throw InvalidParameters("constant input must be finite");
        if (!(filter_options.weights.array() > 0.0).all()) throw InvalidParameters("filter weights must be positive");
        if (!(filter_options.slack_penalty > 0.0)) throw InvalidParameters("slack penalty must be positive");
        cbf.validate();
        quad.validate();
    }
};

struct LogRecord
{
    double t = 0.0;
    QuadState state;
    EulerZyx euler;
    ControlInput nominal;
    ControlInput safe;
    double slack = 0.0;
    bool filter_active = false;
    /// Smallest of v_0..v_3 over both barriers, per axis.
    Vec3 vchain_min = Vec3::Zero();
};

enum class RunStatus
{
    completed,
    diverged,
};

struct ScenarioResult
{
    std::vector<LogRecord> log;
    RunStatus status = RunStatus::completed;
    InitialSetReport initial_set;
};

class InitialSetViolation : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

using NominalController = std::function<ControlInput(double, const QuadState&)>;

inline NominalController make_controller(const SimConfig& cfg)
{
    if (cfg.kind == ScenarioKind::tracking) return SpiralTracker(cfg.gains, cfg.quad);
    return constant_input(cfg.constant_input);
}

inline constexpr double kDivergenceLimit = 1e6;

inline bool diverged(const QuadState& s)
{
    if (!s.is_finite()) return true;
    auto big = [](const auto& v) { return (v.array().abs() > kDivergenceLimit).any(); };
    return big(s.position) || big(s.velocity) || big(s.body_rate);
}

/// Runs the closed loop with an arbitrary nominal controller. The log holds
/// one record per control tick including t = 0; the input logged at tick k is
/// the one held over [t_k, t_k+1).
inline ScenarioResult run_closed_loop(const SimConfig& cfg, const NominalController& controller)
{
    cfg.validate();
    ScenarioResult result;
    const int substeps = cfg.substeps();
    const long ticks = cfg.ticks();
    result.log.reserve(static_cast<std::size_t>(ticks + 1));

    QuadState s = cfg.initial_state;
    s.attitude.normalize();
    for (long k = 0; k <= ticks; ++k) {
        const double t = static_cast<double>(k) * cfg.control_period;
        const ControlInput nominal = controller(t, s);

        if (k == 0) {
            result.initial_set = check_initial_set(s, nominal, cfg.cbf, cfg.quad);
            if (cfg.filter_enabled && cfg.initial_set_policy == InitialSetPolicy::strict &&
                !result.initial_set.all_inside())
                throw InitialSetViolation("initial state is outside the barrier chain sets C_0..C_3");
        }

        LogRecord rec;
        rec.t = t;
        rec.state = s;
        rec.euler = euler_zyx(s.attitude);
        rec.nominal = nominal;
        VChain chain;
        if (cfg.filter_enabled) {
            const FilterResult fr = filter(s, nominal, cfg.cbf, cfg.quad, cfg.filter_options);
            rec.safe = fr.input;
            rec.slack = fr.diagnostics.slack_total;
            rec.filter_active = fr.diagnostics.filter_active;
            chain = fr.diagnostics.chain;
        } else {
            rec.safe = nominal;
            chain = v_chain(s, nominal, cfg.cbf, cfg.quad);
        }
        for (int a = 0; a < kNumAxes; ++a) rec.vchain_min[a] = chain.min_through(a, kRelativeDegree - 1);
        result.log.push_back(rec);

        if (k == ticks) break;
        for (int i = 0; i < substeps; ++i) {
            s = rk4_step(s, rec.safe, cfg.quad, cfg.dt_physics);
            if (diverged(s)) {
                result.status = RunStatus::diverged;
                return result;
            }
        }
    }
    return result;
}

inline ScenarioResult run_scenario(const SimConfig& cfg) { return run_closed_loop(cfg, make_controller(cfg)); }

/// Spiral tracking inside [-1,-1,2]..[1,1,6] m from rest at (0, 0, 3).
inline SimConfig tracking_scenario()
{
    SimConfig cfg;
    cfg.kind = ScenarioKind::tracking;
    cfg.duration = 70.0;
    cfg.cbf.r_min = Vec3(-1.0, -1.0, 2.0);
    cfg.cbf.r_max = Vec3(1.0, 1.0, 6.0);
    cfg.initial_state.position = Vec3(0.0, 0.0, 3.0);
    return cfg;
}

/// Constant aggressive input (19.670 N, 0, -5.130 N m, 0) inside
/// [-4,-4,2]..[4,4,13] m from rest at (0, 0, 9).
inline SimConfig barrel_roll_scenario()
{
    SimConfig cfg;
    cfg.kind = ScenarioKind::constant_input;
    cfg.duration = 15.0;
    cfg.cbf.r_min = Vec3(-4.0, -4.0, 2.0);
    cfg.cbf.r_max = Vec3(4.0, 4.0, 13.0);
    cfg.constant_input = ControlInput{19.670, Vec3(0.0, -5.130, 0.0)};
    cfg.initial_state.position = Vec3(0.0, 0.0, 9.0);
    return cfg;
}

}  // namespace cbfquad
