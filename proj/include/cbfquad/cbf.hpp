#pragma once

// Non-cascaded exponential barrier for an axis-aligned position box.
//
// Each position component carries an upper barrier r_max - r and a lower
// barrier r - r_min. Both have relative degree four in u = [f_T, tau]. The
// auxiliary chain v_{i+1} = dv_i/dt + p_{i+1} v_i expands to
//
//   v_k = sum_{j=0..k} e_{k-j}(p_1..p_k) h^(j),
//
// with e_m the elementary symmetric polynomials of the pole gains, so the
// conditions v_2, v_3, v_4 >= 0 for both barriers stack into the interval
// system Q r_min <= Gamma Lambda <= Q r_max over Lambda = [r, r', r'', r''', r''''].

#include "cbfquad/dynamics.hpp"

#include <algorithm>
#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace cbfquad {

inline constexpr int kNumAxes = 3;
inline constexpr int kRelativeDegree = 4;
/// Rows of the stacked constraint: blocks for C_2, C_3, C_4, one row per axis.
inline constexpr int kNumCbfRows = 3 * kNumAxes;
inline constexpr int kLambdaSize = (kRelativeDegree + 1) * kNumAxes;

using CbfRowVec = Eigen::Matrix<double, kNumCbfRows, 1>;
using GammaMatrix = Eigen::Matrix<double, kNumCbfRows, kLambdaSize>;
using QMatrix = Eigen::Matrix<double, kNumCbfRows, kNumAxes>;
using LambdaVec = Eigen::Matrix<double, kLambdaSize, 1>;
using LambdaInputMatrix = Eigen::Matrix<double, kLambdaSize, 4>;
using ConstraintMatrix = Eigen::Matrix<double, kNumCbfRows, 4>;

struct CbfParams
{
    /// pole_gains[i] holds (p_x, p_y, p_z) of P_{i+1}.
    std::array<Vec3, kRelativeDegree> pole_gains = {Vec3(1.0, 1.0, 1.0), Vec3(4.0, 4.0, 5.0),
                                                    Vec3(5.0, 5.0, 10.0), Vec3(5.0, 5.0, 10.0)};
    Vec3 r_min = Vec3(-1.0, -1.0, 2.0);
    Vec3 r_max = Vec3(1.0, 1.0, 6.0);
    double thrust_floor = 1e-3;

    void validate() const
    {
        for (const auto& p : pole_gains)
            if (!p.allFinite() || !(p.array() > 0.0).all()) throw InvalidParameters("pole gains must be positive");
        if (!r_min.allFinite() || !r_max.allFinite()) throw InvalidParameters("safe box bounds must be finite");
        if (!(r_min.array() < r_max.array()).all()) throw InvalidParameters("r_min must be strictly below r_max");
        if (!(thrust_floor > 0.0)) throw InvalidParameters("thrust_floor must be positive");
    }

    /// The poles (p_1..p_4) of one axis.
    std::array<double, kRelativeDegree> axis_poles(int axis) const
    {
        return {pole_gains[0][axis], pole_gains[1][axis], pole_gains[2][axis], pole_gains[3][axis]};
    }

    friend bool operator==(const CbfParams&, const CbfParams&) = default;
};

/// Elementary symmetric polynomial e_k(p); e_0 = 1.
inline double elem_sym(std::span<const double> p, int k)
{
    if (k < 0 || k > static_cast<int>(p.size())) throw std::out_of_range("elem_sym: order out of range");
    // e[j] accumulates e_j over the prefix processed so far.
    std::vector<double> e(p.size() + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j >= 1; --j) e[j] += p[i] * e[j - 1];
    return e[static_cast<std::size_t>(k)];
}

struct GammaQ
{
    GammaMatrix gamma;
    QMatrix q;
};

/// Row 3*b + a belongs to barrier order k = b + 2 on axis a. Column 3*j + a
/// multiplies the j-th derivative of that axis.
inline GammaQ gamma_q_matrices(const CbfParams& cbf)
{
    cbf.validate();
    GammaQ out;
    out.gamma.setZero();
    out.q.setZero();
    for (int axis = 0; axis < kNumAxes; ++axis) {
        const auto poles = cbf.axis_poles(axis);
        for (int k = 2; k <= kRelativeDegree; ++k) {
            const std::span<const double> prefix(poles.data(), static_cast<std::size_t>(k));
            const int row = 3 * (k - 2) + axis;
            for (int j = 0; j <= k; ++j) out.gamma(row, 3 * j + axis) = elem_sym(prefix, k - j);
            out.q(row, axis) = elem_sym(prefix, k);
        }
    }
    return out;
}

/// Lambda(state, u) ~= offset + input * u. Exact except in the snap rows,
/// where the thrust multiplying the torque-driven angular acceleration is
/// frozen at `frozen_thrust`.
struct LambdaAffine
{
    LambdaVec offset;
    LambdaInputMatrix input;
};

inline LambdaAffine lambda_affine(const QuadState& s, const QuadParams& params, double frozen_thrust)
{
    const Mat3 R = s.attitude.normalized().toRotationMatrix();
    const Vec3 z_body = R.col(2);
    const Vec3& w = s.body_rate;
    const Vec3& J = params.inertia;
    const Vec3 w_inertial = R * w;
    const double inv_m = 1.0 / params.mass;

    LambdaAffine out;
    out.offset.setZero();
    out.input.setZero();

    out.offset.segment<3>(0) = s.position;
    out.offset.segment<3>(3) = s.velocity;

    out.offset.segment<3>(6) = -params.gravity * Vec3::UnitZ();
    out.input.block<3, 1>(6, 0) = inv_m * z_body;

    out.input.block<3, 1>(9, 0) = inv_m * w_inertial.cross(z_body);

    // Torque-independent part of the angular acceleration, mapped to inertial.
    const Vec3 drift_wdot = R * (params.body_disturbance_torque() - w.cross(J.cwiseProduct(w))).cwiseQuotient(J);
    const Vec3 snap_per_thrust = drift_wdot.cross(z_body) + w_inertial.cross(w_inertial.cross(z_body));
    out.input.block<3, 1>(12, 0) = inv_m * snap_per_thrust;
    for (int k = 0; k < 3; ++k) {
        const Vec3 wdot_per_torque = R.col(k) / J[k];
        out.input.block<3, 1>(12, 1 + k) = frozen_thrust * inv_m * wdot_per_torque.cross(z_body);
    }
    return out;
}

/// Two-sided system lower <= A u <= upper together with the input box.
struct ConstraintSet
{
    ConstraintMatrix coeffs;
    CbfRowVec offset;  // Gamma * Lambda_0
    CbfRowVec lower;
    CbfRowVec upper;
    Vec4 u_min;
    Vec4 u_max;
    double frozen_thrust = 0.0;

    /// Signed distance of each row from its nearest bound; negative when violated.
    CbfRowVec margins(const ControlInput& u) const
    {
        const CbfRowVec au = coeffs * u.as_vector();
        return (au - lower).cwiseMin(upper - au);
    }

    bool satisfied_by(const ControlInput& u, double tol = 0.0) const
    {
        const Vec4 uv = u.as_vector();
        return (margins(u).array() >= -tol).all() && (uv.array() >= u_min.array() - tol).all() &&
               (uv.array() <= u_max.array() + tol).all();
    }
};

inline double frozen_thrust_for(const ControlInput& nominal, const CbfParams& cbf, const QuadParams& params)
{
    return std::clamp(nominal.thrust, cbf.thrust_floor, std::max(cbf.thrust_floor, params.u_max[0]));
}

inline ConstraintSet build_constraints(const QuadState& s, const CbfParams& cbf, const QuadParams& params,
                                       const ControlInput& nominal)
{
    if (!s.is_finite()) throw InvalidState("build_constraints: non-finite state");
    if (!nominal.is_finite()) throw InvalidState("build_constraints: non-finite nominal input");
    const GammaQ gq = gamma_q_matrices(cbf);
    const double frozen = frozen_thrust_for(nominal, cbf, params);
    const LambdaAffine lam = lambda_affine(s, params, frozen);

    ConstraintSet out;
    out.coeffs = gq.gamma * lam.input;
    out.offset = gq.gamma * lam.offset;
    out.lower = gq.q * cbf.r_min - out.offset;
    out.upper = gq.q * cbf.r_max - out.offset;
    out.u_min = params.u_min;
    out.u_max = params.u_max;
    out.frozen_thrust = frozen;
    return out;
}

/// v_0..v_4 of the upper and lower barrier of each axis.
struct VChain
{
    std::array<std::array<double, kRelativeDegree + 1>, kNumAxes> upper{};
    std::array<std::array<double, kRelativeDegree + 1>, kNumAxes> lower{};

    /// Smallest v_i over both barriers and i in [0, last].
    double min_through(int axis, int last) const
    {
        double m = upper[axis][0];
        for (int i = 0; i <= last; ++i) m = std::min({m, upper[axis][i], lower[axis][i]});
        return m;
    }
};

namespace detail {

// Runs v_{i+1} = v_i' + p_{i+1} v_i on the derivative table of h: entry
// table[i][j] is the j-th time derivative of v_i.
inline std::array<double, kRelativeDegree + 1> run_chain(const std::array<double, kRelativeDegree>& poles,
                                                         std::array<double, kRelativeDegree + 1> h_derivs)
{
    std::array<double, kRelativeDegree + 1> v{};
    auto cur = h_derivs;
    v[0] = cur[0];
    for (int i = 0; i < kRelativeDegree; ++i) {
        std::array<double, kRelativeDegree + 1> next{};
        for (int j = 0; j + 1 < kRelativeDegree + 1 - i; ++j) next[j] = cur[j + 1] + poles[i] * cur[j];
        cur = next;
        v[i + 1] = cur[0];
    }
    return v;
}

}  // namespace detail

/// Evaluates the chain at input u with the exact (bilinear) snap.
inline VChain v_chain(const QuadState& s, const ControlInput& u, const CbfParams& cbf, const QuadParams& params)
{
    const FlatDerivatives fd = flat_derivatives(s, u, params);
    VChain out;
    for (int a = 0; a < kNumAxes; ++a) {
        const auto poles = cbf.axis_poles(a);
        const std::array<double, 5> r = {s.position[a], s.velocity[a], fd.acceleration[a], fd.jerk[a], fd.snap[a]};
        out.upper[a] = detail::run_chain(poles, {cbf.r_max[a] - r[0], -r[1], -r[2], -r[3], -r[4]});
        out.lower[a] = detail::run_chain(poles, {r[0] - cbf.r_min[a], r[1], r[2], r[3], r[4]});
    }
    return out;
}

struct InitialSetReport
{
    VChain chain;
    /// member[axis][i] for i = 0..3: both barriers have v_i >= 0.
    std::array<std::array<bool, kRelativeDegree>, kNumAxes> member{};

    bool all_inside() const
    {
        for (const auto& axis : member)
            for (bool b : axis)
                if (!b) return false;
        return true;
    }
};

/// Membership of the state in C_0..C_3 for every axis and barrier, the
/// precondition for forward invariance of the box.
inline InitialSetReport check_initial_set(const QuadState& s, const ControlInput& nominal, const CbfParams& cbf,
                                          const QuadParams& params)
{
    InitialSetReport rep;
    rep.chain = v_chain(s, nominal, cbf, params);
    for (int a = 0; a < kNumAxes; ++a)
        for (int i = 0; i < kRelativeDegree; ++i)
            rep.member[a][i] = rep.chain.upper[a][i] >= 0.0 && rep.chain.lower[a][i] >= 0.0;
    return rep;
}

inline bool in_safe_region(const Vec3& r, const CbfParams& cbf)
{
    return (r.array() >= cbf.r_min.array()).all() && (r.array() <= cbf.r_max.array()).all();
}

}  // namespace cbfquad
