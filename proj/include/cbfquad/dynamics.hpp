#pragma once

// Rigid-body quadrotor model: state, equations of motion, rotor mixer and the
// position derivative chain (acceleration, jerk, snap) under held inputs.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>
#include <string>

namespace cbfquad {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

class InvalidState : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

class InvalidParameters : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

class InfeasibleAllocation : public std::domain_error
{
public:
    InfeasibleAllocation(int rotor, double squared_speed)
        : std::domain_error("rotor " + std::to_string(rotor + 1) + " requires negative squared speed " +
                            std::to_string(squared_speed)),
          rotor_(rotor),
          squared_speed_(squared_speed)
    {
    }

    /// Zero-based index of the first rotor whose squared speed came out negative.
    int rotor() const { return rotor_; }
    double squared_speed() const { return squared_speed_; }

private:
    int rotor_;
    double squared_speed_;
};

/// Total thrust and body torques, u = [f_T, tau_x, tau_y, tau_z].
struct ControlInput
{
    double thrust = 0.0;
    Vec3 torque = Vec3::Zero();

    static ControlInput from_vector(const Vec4& u) { return {u[0], u.tail<3>()}; }

    Vec4 as_vector() const
    {
        Vec4 u;
        u << thrust, torque;
        return u;
    }

    bool is_finite() const { return std::isfinite(thrust) && torque.allFinite(); }

    friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

/// Physical constants of the vehicle. Defaults are the IF750A airframe; arm
/// length and rotor coefficients are chosen so the mixer reaches exactly the
/// listed thrust and torque limits at a 1000 rad/s rotor speed ceiling.
struct QuadParams
{
    double mass = 1.5;
    Vec3 inertia = Vec3(0.039, 0.051, 0.102);
    double arm_length = 5.13 / 9.75;
    double thrust_coeff = 9.75e-6;
    double moment_coeff = 1.2e-8;
    double gravity = 9.81;
    Vec4 u_min = Vec4(0.0, -5.13, -5.13, -0.024);
    Vec4 u_max = Vec4(39.0, 5.13, 5.13, 0.024);
    // Gyroscopic torque is not modeled by default; when enabled, a constant
    // body-frame torque is added to the rotational dynamics.
    bool gyro_torque_enabled = false;
    Vec3 gyro_torque = Vec3::Zero();

    void validate() const
    {
        if (!(mass > 0.0)) throw InvalidParameters("mass must be positive");
        if (!(inertia.array() > 0.0).all()) throw InvalidParameters("inertia components must be positive");
        if (!(arm_length > 0.0)) throw InvalidParameters("arm_length must be positive");
        if (!(thrust_coeff > 0.0)) throw InvalidParameters("thrust_coeff must be positive");
        if (!(moment_coeff > 0.0)) throw InvalidParameters("moment_coeff must be positive");
        if (!(gravity >= 0.0)) throw InvalidParameters("gravity must be non-negative");
        if (!u_min.allFinite() || !u_max.allFinite()) throw InvalidParameters("input bounds must be finite");
        if (!(u_min.array() <= u_max.array()).all()) throw InvalidParameters("u_min must not exceed u_max");
        if (u_min[0] < 0.0) throw InvalidParameters("minimum thrust must be non-negative");
        if (!gyro_torque.allFinite()) throw InvalidParameters("gyro_torque must be finite");
    }

    Vec3 body_disturbance_torque() const { return gyro_torque_enabled ? gyro_torque : Vec3::Zero(); }

    friend bool operator==(const QuadParams&, const QuadParams&) = default;
};

/// Position and velocity in the inertial frame, attitude as a body-to-inertial
/// unit quaternion, and body angular rates (p, q, r).
struct QuadState
{
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Quat attitude = Quat::Identity();
    Vec3 body_rate = Vec3::Zero();

    bool is_finite() const
    {
        return position.allFinite() && velocity.allFinite() && attitude.coeffs().allFinite() &&
               body_rate.allFinite();
    }
};

struct RotorSpeeds
{
    Vec4 omega = Vec4::Zero();
};

struct StateDerivative
{
    Vec3 position_rate;
    Vec3 acceleration;
    Vec4 attitude_rate;  // (w, x, y, z)
    Vec3 angular_acceleration;
};

inline constexpr double kUnitQuaternionTol = 1e-6;

inline Mat3 rotation_matrix(const Quat& q)
{
    const double norm = q.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitQuaternionTol)
        throw InvalidState("attitude quaternion is not unit length (norm " + std::to_string(norm) + ")");
    return q.normalized().toRotationMatrix();
}

inline Mat3 skew(const Vec3& w)
{
    Mat3 s;
    s << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return s;
}

struct EulerZyx
{
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    // Set when |pitch| = pi/2; yaw is then pinned to zero and roll absorbs it.
    bool gimbal_lock = false;
};

/// Roll/pitch/yaw for R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline EulerZyx euler_zyx(const Quat& q)
{
    const Mat3 R = rotation_matrix(q);
    EulerZyx e;
    const double cos_pitch = std::hypot(R(0, 0), R(1, 0));
    e.pitch = std::atan2(-R(2, 0), cos_pitch);
    if (cos_pitch < 1e-12) {
        e.gimbal_lock = true;
        e.yaw = 0.0;
        e.roll = R(2, 0) < 0.0 ? std::atan2(R(0, 1), R(0, 2)) : std::atan2(-R(0, 1), -R(0, 2));
    } else {
        e.roll = std::atan2(R(2, 1), R(2, 2));
        e.yaw = std::atan2(R(1, 0), R(0, 0));
    }
    return e;
}

inline Mat3 rotation_from_euler_zyx(double roll, double pitch, double yaw)
{
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(roll, Vec3::UnitX()))
        .toRotationMatrix();
}

inline Quat quaternion_from_euler_zyx(double roll, double pitch, double yaw)
{
    return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

/// Maps squared rotor speeds to (f_T, tau_x, tau_y, tau_z), plus-frame layout.
inline Mat4 mixer_matrix(const QuadParams& params)
{
    const double kf = params.thrust_coeff;
    const double kfl = kf * params.arm_length;
    const double km = params.moment_coeff;
    Mat4 m;
    m << kf, kf, kf, kf,
         0.0, kfl, 0.0, -kfl,
         -kfl, 0.0, kfl, 0.0,
         km, -km, km, -km;
    return m;
}

inline ControlInput mixer_forward(const RotorSpeeds& speeds, const QuadParams& params)
{
    return ControlInput::from_vector(mixer_matrix(params) * speeds.omega.cwiseAbs2());
}

inline RotorSpeeds mixer_inverse(const ControlInput& u, const QuadParams& params)
{
    // Closed-form inverse of the plus-frame mixer.
    const double kf = params.thrust_coeff;
    const double kfl = kf * params.arm_length;
    const double km = params.moment_coeff;
    const double f = u.thrust / (4.0 * kf);
    const double yaw = u.torque.z() / (4.0 * km);
    const double roll = u.torque.x() / (2.0 * kfl);
    const double pitch = u.torque.y() / (2.0 * kfl);
    const Vec4 squared(f - pitch + yaw, f + roll - yaw, f + pitch + yaw, f - roll - yaw);

    // Cancellation leaves roundoff of order eps * |terms|; treat that as zero.
    const double scale = std::abs(f) + std::abs(yaw) + std::abs(roll) + std::abs(pitch);
    RotorSpeeds out;
    for (int i = 0; i < 4; ++i) {
        double s = squared[i];
        if (s < 0.0) {
            if (s < -1e-12 * scale) throw InfeasibleAllocation(i, s);
            s = 0.0;
        }
        out.omega[i] = std::sqrt(s);
    }
    return out;
}

/// Equations of motion. The quaternion is normalized before use so that
/// intermediate integrator stages need not lie on the unit sphere.
inline StateDerivative state_derivative(const QuadState& s, const ControlInput& u, const QuadParams& params)
{
    const Quat q_unit = s.attitude.normalized();
    const Mat3 R = q_unit.toRotationMatrix();
    const Vec3& w = s.body_rate;
    const Vec3& J = params.inertia;

    StateDerivative d;
    d.position_rate = s.velocity;
    d.acceleration = -params.gravity * Vec3::UnitZ() + (u.thrust / params.mass) * R.col(2);

    // q_dot = 0.5 * q (x) (0, w)
    const Quat pure(0.0, w.x(), w.y(), w.z());
    const Quat qd = s.attitude * pure;
    d.attitude_rate = 0.5 * Vec4(qd.w(), qd.x(), qd.y(), qd.z());

    const Vec3 Jw = J.cwiseProduct(w);
    d.angular_acceleration = (u.torque - w.cross(Jw) + params.body_disturbance_torque()).cwiseQuotient(J);
    return d;
}

struct FlatDerivatives
{
    Vec3 acceleration;
    Vec3 jerk;
    Vec3 snap;
};

/// Acceleration, jerk and snap of the position with the thrust held constant.
inline FlatDerivatives flat_derivatives(const QuadState& s, const ControlInput& u, const QuadParams& params)
{
    const Mat3 R = s.attitude.normalized().toRotationMatrix();
    const Vec3 z_body = R.col(2);
    const Vec3 w_inertial = R * s.body_rate;
    const Vec3 wdot_inertial = R * state_derivative(s, u, params).angular_acceleration;
    const double thrust_accel = u.thrust / params.mass;

    FlatDerivatives out;
    out.acceleration = -params.gravity * Vec3::UnitZ() + thrust_accel * z_body;
    out.jerk = thrust_accel * w_inertial.cross(z_body);
    out.snap = thrust_accel * (wdot_inertial.cross(z_body) + w_inertial.cross(w_inertial.cross(z_body)));
    return out;
}

}  // namespace cbfquad
