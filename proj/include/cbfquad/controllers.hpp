#pragma once

// Nominal controllers: a cascaded PD tracker (position loop producing a thrust
// vector, geometric attitude loop producing torques) and a constant input.

#include "cbfquad/dynamics.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace cbfquad {

struct TrajectoryRef
{
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 acceleration = Vec3::Zero();
    double yaw = 0.0;
};

/// Expanding spiral that climbs through the top of the tracking box:
/// x = 0.025 t cos(0.2 t), y = 0.025 t sin(0.2 t), z = 3 + 0.06 t.
inline TrajectoryRef spiral_reference(double t)
{
    constexpr double radius_rate = 0.025;
    constexpr double angular_rate = 0.200;
    constexpr double z0 = 3.000;
    constexpr double climb_rate = 0.060;

    const double c = std::cos(angular_rate * t);
    const double s = std::sin(angular_rate * t);
    const double w = angular_rate;
    const double k = radius_rate;

    TrajectoryRef ref;
    ref.position = Vec3(k * t * c, k * t * s, z0 + climb_rate * t);
    ref.velocity = Vec3(k * c - k * t * w * s, k * s + k * t * w * c, climb_rate);
    ref.acceleration = Vec3(-2.0 * k * w * s - k * t * w * w * c, 2.0 * k * w * c - k * t * w * w * s, 0.0);
    ref.yaw = 0.0;
    return ref;
}

struct PdGains
{
    Vec3 kp = Vec3(2.0, 2.0, 4.0);
    Vec3 kd = Vec3(3.0, 3.0, 4.0);
    Vec3 k_attitude = Vec3(80.0, 80.0, 30.0);
    Vec3 k_rate = Vec3(15.0, 15.0, 10.0);

    bool valid() const
    {
        return (kp.array() >= 0.0).all() && (kd.array() >= 0.0).all() && (k_attitude.array() >= 0.0).all() &&
               (k_rate.array() >= 0.0).all() && kp.allFinite() && kd.allFinite() && k_attitude.allFinite() &&
               k_rate.allFinite();
    }

    friend bool operator==(const PdGains&, const PdGains&) = default;
};

inline Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

inline ControlInput clamp_to_box(const ControlInput& u, const QuadParams& params)
{
    return ControlInput::from_vector(u.as_vector().cwiseMax(params.u_min).cwiseMin(params.u_max));
}

struct PdOutput
{
    ControlInput input;
    Mat3 attitude_target;
};

/// One evaluation of the cascaded PD law. `held_target` is used when the
/// commanded thrust direction is degenerate (free-fall command).
inline PdOutput pd_tracking_control(const QuadState& s, const TrajectoryRef& ref, const PdGains& g,
                                    const QuadParams& params, const std::optional<Mat3>& held_target = std::nullopt)
{
    const Mat3 R = s.attitude.normalized().toRotationMatrix();
    const Vec3 a_des = ref.acceleration + g.kp.cwiseProduct(ref.position - s.position) +
                       g.kd.cwiseProduct(ref.velocity - s.velocity);
    const Vec3 thrust_dir = a_des + params.gravity * Vec3::UnitZ();

    Mat3 Rd;
    if (thrust_dir.norm() < 1e-6) {
        Rd = held_target.value_or(R);
    } else {
        const Vec3 b3 = thrust_dir.normalized();
        const Vec3 heading(std::cos(ref.yaw), std::sin(ref.yaw), 0.0);
        Vec3 b2 = b3.cross(heading);
        if (b2.norm() < 1e-9) {
            // Thrust along the heading; keep the previous lateral axis.
            b2 = held_target.value_or(R).col(1);
            b2 = (b2 - b2.dot(b3) * b3).normalized();
        } else {
            b2.normalize();
        }
        Rd.col(0) = b2.cross(b3);
        Rd.col(1) = b2;
        Rd.col(2) = b3;
    }

    const double thrust = params.mass * thrust_dir.dot(R.col(2));
    // Attitude and rate errors point in the correcting direction.
    const Vec3 e_R = 0.5 * vee(R.transpose() * Rd - Rd.transpose() * R);
    const Vec3 e_w = -s.body_rate;
    const Vec3 Jw = params.inertia.cwiseProduct(s.body_rate);
    const Vec3 torque = params.inertia.cwiseProduct(g.k_attitude.cwiseProduct(e_R) + g.k_rate.cwiseProduct(e_w)) +
                        s.body_rate.cross(Jw);

    return {clamp_to_box(ControlInput{thrust, torque}, params), Rd};
}

/// Stateful wrapper around the spiral tracker that remembers the last
/// attitude target.
class SpiralTracker
{
public:
    SpiralTracker(PdGains gains, QuadParams params) : gains_(std::move(gains)), params_(std::move(params)) {}

    ControlInput operator()(double t, const QuadState& s)
    {
        const PdOutput out = pd_tracking_control(s, spiral_reference(t), gains_, params_, last_target_);
        last_target_ = out.attitude_target;
        return out.input;
    }

private:
    PdGains gains_;
    QuadParams params_;
    std::optional<Mat3> last_target_;
};

class ConstantInput
{
public:
    explicit ConstantInput(ControlInput u) : u_(u)
    {
        if (!u.is_finite()) throw InvalidParameters("constant input must be finite");
    }

    ControlInput operator()(double, const QuadState&) const { return u_; }

private:
    ControlInput u_;
};

inline ConstantInput constant_input(const ControlInput& u) { return ConstantInput(u); }

}  // namespace cbfquad
