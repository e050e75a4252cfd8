#pragma once

// Small dense strictly convex QP:
//
//   minimize    0.5 u'Hu + f'u
//   subject to  lower_i <= a_i'u <= upper_i     (interval rows)
//               lo <= u <= hi                   (box)
//
// solved with the Goldfarb-Idnani dual active-set method. The method starts at
// the unconstrained minimizer and adds the most violated constraint each major
// iteration, keeping dual feasibility throughout, so it terminates exactly in
// a finite number of steps. Infinite bounds are allowed and simply skipped.
//
// When the interval rows cannot be satisfied inside the box, the rows are
// softened with one non-negative slack each and the relaxed problem is solved
// instead; the box stays hard.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cbfquad {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem
{
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    Eigen::MatrixXd rows;  // m x n, one constraint row per line
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    int num_vars() const { return static_cast<int>(hessian.rows()); }
    int num_rows() const { return static_cast<int>(rows.rows()); }

    double objective(const Eigen::VectorXd& u) const { return 0.5 * u.dot(hessian * u) + linear.dot(u); }

    /// Shape, symmetry and ordering checks; box emptiness is reported by the
    /// solver as a status instead.
    void validate() const
    {
        const int n = num_vars();
        if (n <= 0 || hessian.cols() != n) throw std::invalid_argument("QpProblem: hessian must be square and non-empty");
        if (linear.size() != n || lo.size() != n || hi.size() != n)
            throw std::invalid_argument("QpProblem: vector sizes do not match the hessian");
        if (rows.cols() != n && rows.rows() > 0) throw std::invalid_argument("QpProblem: row width mismatch");
        if (lower.size() != num_rows() || upper.size() != num_rows())
            throw std::invalid_argument("QpProblem: row bound sizes mismatch");
        if (!hessian.allFinite() || !linear.allFinite() || !rows.allFinite())
            throw std::invalid_argument("QpProblem: non-finite data");
        const double scale = std::max(1.0, hessian.cwiseAbs().maxCoeff());
        if ((hessian - hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw std::invalid_argument("QpProblem: hessian is not symmetric");
        for (int i = 0; i < num_rows(); ++i) {
            if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i])
                throw std::invalid_argument("QpProblem: row " + std::to_string(i) + " has lower > upper");
        }
        if (lo.hasNaN() || hi.hasNaN()) throw std::invalid_argument("QpProblem: NaN box bound");
    }
};

enum class QpStatus
{
    optimal,
    relaxed_optimal,
    infeasible_box,
};

inline const char* to_string(QpStatus s)
{
    switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::relaxed_optimal: return "relaxed-optimal";
    case QpStatus::infeasible_box: return "infeasible-box";
    }
    return "unknown";
}

struct QpSolution
{
    Eigen::VectorXd u;
    QpStatus status = QpStatus::optimal;
    /// Per-row widening needed to admit u; all zero when optimal.
    Eigen::VectorXd slack;
    double kkt_residual = 0.0;
    /// Interval rows with an active bound, ascending.
    std::vector<int> active_set;
    /// Variables sitting on a box bound, ascending.
    std::vector<int> active_bounds;
    /// Signed multipliers: positive on an active lower bound, negative on an
    /// active upper bound, so that H u + f = rows' * row_mult + bound_mult.
    Eigen::VectorXd row_multipliers;
    Eigen::VectorXd bound_multipliers;
    int iterations = 0;
};

struct QpOptions
{
    double slack_penalty = 1e6;
    double pivot_tol = 1e-12;
    double activity_tol = 1e-9;
};

/// Softens every interval row to lower - s <= a'u <= upper + s with s >= 0.
/// The penalty rho * (s^2 + s) is exact: as long as rho exceeds the row
/// multipliers of a feasible original, the slacks stay at zero, while the
/// quadratic part keeps the problem strictly convex.
inline QpProblem relax_with_slacks(const QpProblem& p, double rho = 1e6)
{
    if (!(rho > 0.0)) throw std::invalid_argument("relax_with_slacks: penalty must be positive");
    const int n = p.num_vars();
    const int m = p.num_rows();
    QpProblem r;
    r.hessian = Eigen::MatrixXd::Zero(n + m, n + m);
    r.hessian.topLeftCorner(n, n) = p.hessian;
    r.hessian.bottomRightCorner(m, m).diagonal().setConstant(2.0 * rho);
    r.linear.resize(n + m);
    r.linear << p.linear, Eigen::VectorXd::Constant(m, rho);

    r.rows = Eigen::MatrixXd::Zero(2 * m, n + m);
    r.lower.resize(2 * m);
    r.upper.resize(2 * m);
    for (int i = 0; i < m; ++i) {
        r.rows.block(2 * i, 0, 1, n) = p.rows.row(i);
        r.rows(2 * i, n + i) = 1.0;
        r.lower[2 * i] = p.lower[i];
        r.upper[2 * i] = kInf;
        r.rows.block(2 * i + 1, 0, 1, n) = p.rows.row(i);
        r.rows(2 * i + 1, n + i) = -1.0;
        r.lower[2 * i + 1] = -kInf;
        r.upper[2 * i + 1] = p.upper[i];
    }
    r.lo.resize(n + m);
    r.hi.resize(n + m);
    r.lo << p.lo, Eigen::VectorXd::Zero(m);
    r.hi << p.hi, Eigen::VectorXd::Constant(m, kInf);
    return r;
}

/// Worst violation among stationarity, primal feasibility, dual feasibility
/// and complementarity. Stationarity is measured relative to the size of the
/// gradient terms; constraint terms use unit-normalized rows.
inline double kkt_residual(const QpProblem& p, const Eigen::VectorXd& u, const Eigen::VectorXd& row_mult,
                           const Eigen::VectorXd& bound_mult)
{
    const int n = p.num_vars();
    const Eigen::VectorXd grad = p.hessian * u + p.linear;
    Eigen::VectorXd rhs = bound_mult;
    if (p.num_rows() > 0) rhs += p.rows.transpose() * row_mult;
    const double grad_scale = std::max({1.0, grad.cwiseAbs().maxCoeff(), p.linear.cwiseAbs().maxCoeff(),
                                        (p.hessian * u).cwiseAbs().maxCoeff()});
    double res = (grad - rhs).cwiseAbs().maxCoeff() / grad_scale;

    auto one_sided = [&res](double value, double lo, double hi, double mult, double norm) {
        const double low_gap = (value - lo) / norm;
        const double high_gap = (hi - value) / norm;
        res = std::max({res, -low_gap, -high_gap});
        if (mult > 0.0) res = std::max(res, std::isfinite(lo) ? mult * norm * std::abs(low_gap) : mult);
        if (mult < 0.0) res = std::max(res, std::isfinite(hi) ? -mult * norm * std::abs(high_gap) : -mult);
    };
    for (int i = 0; i < p.num_rows(); ++i) {
        const double norm = std::max(p.rows.row(i).norm(), 1e-300);
        one_sided(p.rows.row(i).dot(u), p.lower[i], p.upper[i], row_mult[i], norm);
    }
    for (int j = 0; j < n; ++j) one_sided(u[j], p.lo[j], p.hi[j], bound_mult[j], 1.0);
    return res;
}

namespace detail {

// One-sided constraint c'u >= b derived from an interval row or a box side.
struct OneSided
{
    Eigen::VectorXd normal;
    double rhs;
    double norm;
    int source;  // row index, or num_rows + variable index for the box
    bool upper;  // derived from an upper bound (normal is negated)
};

struct DualActiveSetResult
{
    bool feasible = false;
    Eigen::VectorXd x;
    std::vector<int> active;  // indices into the constraint list
    std::vector<double> multipliers;
    int iterations = 0;
};

class DualActiveSet
{
public:
    DualActiveSet(const Eigen::MatrixXd& hessian, const QpOptions& opt) : n_(static_cast<int>(hessian.rows())), opt_(opt)
    {
        Eigen::LLT<Eigen::MatrixXd> llt(hessian);
        const double scale = std::max(1.0, hessian.diagonal().cwiseAbs().maxCoeff());
        if (llt.info() != Eigen::Success) throw std::invalid_argument("QP hessian is not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        if ((L.diagonal().array().square() <= opt.pivot_tol * scale).any())
            throw std::invalid_argument("QP hessian is numerically singular");
        // J = L^{-T}, so that J J' = H^{-1}.
        J0_ = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n_, n_));
    }

    DualActiveSetResult solve(const Eigen::VectorXd& linear, const std::vector<OneSided>& cons)
    {
        const int n = n_;
        const int num_cons = static_cast<int>(cons.size());
        Eigen::MatrixXd J = J0_;
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
        std::vector<int> active;
        std::vector<double> mult;
        std::vector<char> is_active(static_cast<std::size_t>(num_cons), 0);

        DualActiveSetResult res;
        Eigen::VectorXd x = -(J * (J.transpose() * linear));
        const int max_iter = 50 * (n + num_cons + 1);

        auto slack_of = [&](int i) { return (cons[i].normal.dot(x) - cons[i].rhs) / cons[i].norm; };

        for (int iter = 0; iter < max_iter; ++iter) {
            // Most violated inactive constraint; strict comparison keeps the lowest index on ties.
            int p = -1;
            double worst = -opt_.activity_tol;
            for (int i = 0; i < num_cons; ++i) {
                if (is_active[i]) continue;
                const double s = slack_of(i);
                if (s < worst) {
                    worst = s;
                    p = i;
                }
            }
            res.iterations = iter;
            if (p < 0) {
                res.feasible = true;
                res.x = x;
                res.active = active;
                res.multipliers = mult;
                return res;
            }

            const Eigen::VectorXd& np = cons[p].normal;
            double sp = np.dot(x) - cons[p].rhs;
            double u_new = 0.0;

            for (;;) {
                const int q = static_cast<int>(active.size());
                Eigen::VectorXd d = J.transpose() * np;
                const Eigen::VectorXd z = J.rightCols(n - q) * d.tail(n - q);
                Eigen::VectorXd r(q);
                if (q > 0) r = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

                double t1 = kInf;
                int drop = -1;
                for (int j = 0; j < q; ++j) {
                    if (r[j] > 0.0) {
                        const double ratio = mult[j] / r[j];
                        if (ratio < t1) {
                            t1 = ratio;
                            drop = j;
                        }
                    }
                }
                double t2 = kInf;
                const double zn = z.dot(np);
                if (z.norm() > opt_.pivot_tol * std::max(1.0, np.norm()) && zn > 0.0) t2 = -sp / zn;

                const double t = std::min(t1, t2);
                if (!std::isfinite(t)) {
                    res.feasible = false;
                    res.x = x;
                    res.iterations = iter;
                    return res;
                }

                if (!std::isfinite(t2)) {
                    // Dual step only.
                    for (int j = 0; j < q; ++j) mult[j] -= t * r[j];
                    u_new += t;
                    remove(drop, active, mult, is_active, R, J);
                    continue;
                }

                x += t * z;
                for (int j = 0; j < q; ++j) mult[j] -= t * r[j];
                u_new += t;

                if (t2 <= t1) {
                    if (!add(d, J, R, q)) {
                        res.feasible = false;
                        res.x = x;
                        return res;
                    }
                    active.push_back(p);
                    mult.push_back(u_new);
                    is_active[p] = 1;
                    break;
                }
                remove(drop, active, mult, is_active, R, J);
                sp = np.dot(x) - cons[p].rhs;
            }
        }
        throw std::logic_error("dual active-set solver exceeded its iteration bound");
    }

private:
    // Rotates d = J'n so that only its first q+1 entries are nonzero and appends
    // it as column q of R.
    bool add(Eigen::VectorXd& d, Eigen::MatrixXd& J, Eigen::MatrixXd& R, int q) const
    {
        for (int j = n_ - 1; j > q; --j) {
            const double a = d[j - 1];
            const double b = d[j];
            if (b == 0.0) continue;
            const double h = std::hypot(a, b);
            const double c = a / h;
            const double s = b / h;
            d[j - 1] = h;
            d[j] = 0.0;
            for (int k = 0; k < n_; ++k) {
                const double ja = J(k, j - 1);
                const double jb = J(k, j);
                J(k, j - 1) = c * ja + s * jb;
                J(k, j) = -s * ja + c * jb;
            }
        }
        if (std::abs(d[q]) <= opt_.pivot_tol * std::max(1.0, d.head(q + 1).norm())) return false;
        R.col(q).head(q + 1) = d.head(q + 1);
        return true;
    }

    void remove(int l, std::vector<int>& active, std::vector<double>& mult, std::vector<char>& is_active,
                Eigen::MatrixXd& R, Eigen::MatrixXd& J) const
    {
        const int q = static_cast<int>(active.size());
        is_active[active[l]] = 0;
        active.erase(active.begin() + l);
        mult.erase(mult.begin() + l);
        for (int j = l; j < q - 1; ++j) R.col(j) = R.col(j + 1);
        R.col(q - 1).setZero();
        // R is now upper Hessenberg from column l; restore triangularity.
        for (int j = l; j < q - 1; ++j) {
            const double a = R(j, j);
            const double b = R(j + 1, j);
            if (b == 0.0) continue;
            const double h = std::hypot(a, b);
            const double c = a / h;
            const double s = b / h;
            for (int k = j; k < q - 1; ++k) {
                const double ra = R(j, k);
                const double rb = R(j + 1, k);
                R(j, k) = c * ra + s * rb;
                R(j + 1, k) = -s * ra + c * rb;
            }
            R(j + 1, j) = 0.0;
            for (int k = 0; k < n_; ++k) {
                const double ja = J(k, j);
                const double jb = J(k, j + 1);
                J(k, j) = c * ja + s * jb;
                J(k, j + 1) = -s * ja + c * jb;
            }
        }
    }

    int n_;
    QpOptions opt_;
    Eigen::MatrixXd J0_;
};

inline std::vector<OneSided> one_sided_constraints(const QpProblem& p)
{
    std::vector<OneSided> out;
    const int n = p.num_vars();
    const int m = p.num_rows();
    out.reserve(static_cast<std::size_t>(2 * (m + n)));
    for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd a = p.rows.row(i).transpose();
        const double norm = a.norm();
        if (norm == 0.0) continue;  // zero rows are checked separately
        if (std::isfinite(p.lower[i])) out.push_back({a, p.lower[i], norm, i, false});
        if (std::isfinite(p.upper[i])) out.push_back({-a, -p.upper[i], norm, i, true});
    }
    for (int j = 0; j < n; ++j) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, j);
        if (std::isfinite(p.lo[j])) out.push_back({e, p.lo[j], 1.0, m + j, false});
        if (std::isfinite(p.hi[j])) out.push_back({-e, -p.hi[j], 1.0, m + j, true});
    }
    return out;
}

inline bool zero_rows_consistent(const QpProblem& p, double tol)
{
    for (int i = 0; i < p.num_rows(); ++i)
        if (p.rows.row(i).norm() == 0.0 && (p.lower[i] > tol || p.upper[i] < -tol)) return false;
    return true;
}

}  // namespace detail

/// Holds no state between calls; one instance may be reused freely on a
/// single thread.
class QpSolver
{
public:
    explicit QpSolver(QpOptions options = {}) : opt_(options) {}

    const QpOptions& options() const { return opt_; }

    QpSolution solve(const QpProblem& p) const
    {
        p.validate();
        const int n = p.num_vars();
        const int m = p.num_rows();

        QpSolution sol;
        sol.slack = Eigen::VectorXd::Zero(m);
        sol.row_multipliers = Eigen::VectorXd::Zero(m);
        sol.bound_multipliers = Eigen::VectorXd::Zero(n);
        if ((p.lo.array() > p.hi.array()).any()) {
            sol.status = QpStatus::infeasible_box;
            sol.u = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
            sol.kkt_residual = kInf;
            return sol;
        }

        const auto cons = detail::one_sided_constraints(p);
        detail::DualActiveSet das(p.hessian, opt_);
        detail::DualActiveSetResult r;
        if (detail::zero_rows_consistent(p, opt_.activity_tol)) r = das.solve(p.linear, cons);

        if (r.feasible) {
            sol.status = QpStatus::optimal;
            sol.u = r.x;
            sol.iterations = r.iterations;
            scatter_multipliers(p, cons, r, sol.row_multipliers, sol.bound_multipliers);
        } else {
            const QpProblem relaxed = relax_with_slacks(p, opt_.slack_penalty);
            const auto rcons = detail::one_sided_constraints(relaxed);
            detail::DualActiveSet rdas(relaxed.hessian, opt_);
            const auto rr = rdas.solve(relaxed.linear, rcons);
            if (!rr.feasible) throw std::logic_error("slack relaxation unexpectedly infeasible");
            sol.status = QpStatus::relaxed_optimal;
            sol.u = rr.x.head(n);
            sol.slack = rr.x.tail(m).cwiseMax(0.0);
            sol.iterations = rr.iterations;
            Eigen::VectorXd rrow = Eigen::VectorXd::Zero(relaxed.num_rows());
            Eigen::VectorXd rbound = Eigen::VectorXd::Zero(n + m);
            scatter_multipliers(relaxed, rcons, rr, rrow, rbound);
            for (int i = 0; i < m; ++i) sol.row_multipliers[i] = rrow[2 * i] + rrow[2 * i + 1];
            sol.bound_multipliers = rbound.head(n);
            sol.kkt_residual = kkt_residual(relaxed, rr.x, rrow, rbound);
        }

        // The box is hard; clip roundoff-level excursions.
        sol.u = sol.u.cwiseMax(p.lo).cwiseMin(p.hi);

        const double tol = 10.0 * opt_.activity_tol;
        for (int i = 0; i < m; ++i)
            if (sol.row_multipliers[i] != 0.0) sol.active_set.push_back(i);
        for (int j = 0; j < n; ++j)
            if (sol.bound_multipliers[j] != 0.0 || std::abs(sol.u[j] - p.lo[j]) <= tol ||
                std::abs(sol.u[j] - p.hi[j]) <= tol)
                sol.active_bounds.push_back(j);
        if (sol.status == QpStatus::optimal)
            sol.kkt_residual = kkt_residual(p, sol.u, sol.row_multipliers, sol.bound_multipliers);
        return sol;
    }

private:
    static void scatter_multipliers(const QpProblem& p, const std::vector<detail::OneSided>& cons,
                                    const detail::DualActiveSetResult& r, Eigen::VectorXd& row_mult,
                                    Eigen::VectorXd& bound_mult)
    {
        const int m = p.num_rows();
        for (std::size_t k = 0; k < r.active.size(); ++k) {
            const auto& c = cons[static_cast<std::size_t>(r.active[k])];
            const double lambda = r.multipliers[k] * (c.upper ? -1.0 : 1.0);
            if (c.source < m)
                row_mult[c.source] += lambda;
            else
                bound_mult[c.source - m] += lambda;
        }
    }

    QpOptions opt_;
};

inline QpSolution solve(const QpProblem& p, const QpOptions& options = {}) { return QpSolver(options).solve(p); }

}  // namespace cbfquad
