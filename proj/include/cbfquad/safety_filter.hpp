#pragma once

#include "cbfquad/cbf.hpp"
#include "cbfquad/qp.hpp"

#include <chrono>

namespace cbfquad {

struct FilterOptions
{
    /// Objective weights (w_f, w_tau, w_tau, w_tau) of ||u - u0||^2.
    Vec4 weights = Vec4::Ones();
    double slack_penalty = 1e6;
};

struct FilterDiagnostics
{
    bool filter_active = false;
    CbfRowVec margins = CbfRowVec::Zero();
    double slack_total = 0.0;
    VChain chain;
    QpStatus status = QpStatus::optimal;
    double kkt_residual = 0.0;
    double wall_time = 0.0;  // seconds
};

struct FilterResult
{
    ControlInput input;
    FilterDiagnostics diagnostics;
};

inline constexpr double kFilterActiveTol = 1e-9;

inline QpProblem safety_qp(const ConstraintSet& cs, const ControlInput& nominal, const Vec4& weights)
{
    QpProblem p;
    const Vec4 w2 = 2.0 * weights;
    p.hessian = w2.asDiagonal();
    p.linear = -w2.cwiseProduct(nominal.as_vector());
    p.rows = cs.coeffs;
    p.lower = cs.lower;
    p.upper = cs.upper;
    p.lo = cs.u_min;
    p.hi = cs.u_max;
    return p;
}

/// Returns the input closest to `nominal` (in the weighted norm) that
/// satisfies the barrier rows and the actuator box. Rows are softened only when
/// they cannot all hold inside the box.
inline FilterResult filter(const QuadState& s, const ControlInput& nominal, const CbfParams& cbf,
                           const QuadParams& params, const FilterOptions& options = {})
{
    const auto start = std::chrono::steady_clock::now();
    if (!(options.weights.array() > 0.0).all()) throw InvalidParameters("filter weights must be positive");
    const ConstraintSet cs = build_constraints(s, cbf, params, nominal);
    const QpSolver solver(QpOptions{.slack_penalty = options.slack_penalty});
    const QpSolution sol = solver.solve(safety_qp(cs, nominal, options.weights));

    FilterResult out;
    out.input = ControlInput::from_vector(sol.u);
    auto& diag = out.diagnostics;
    diag.status = sol.status;
    diag.kkt_residual = sol.kkt_residual;
    diag.slack_total = sol.slack.sum();
    diag.margins = cs.margins(out.input);
    diag.filter_active = (out.input.as_vector() - nominal.as_vector()).norm() > kFilterActiveTol;
    const Vec4 nv = nominal.as_vector();
    const bool nominal_in_box = (nv.array() >= params.u_min.array()).all() && (nv.array() <= params.u_max.array()).all();
    if (!diag.filter_active && nominal_in_box) out.input = nominal;
    diag.chain = v_chain(s, out.input, cbf, params);
    diag.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace cbfquad
