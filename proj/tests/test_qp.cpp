#include "cbfquad/qp.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cbfquad;

namespace {

QpProblem box_only(const Eigen::VectorXd& target, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
    const int n = static_cast<int>(target.size());
    QpProblem p;
    p.hessian = 2.0 * Eigen::MatrixXd::Identity(n, n);
    p.linear = -2.0 * target;
    p.rows.resize(0, n);
    p.lower.resize(0);
    p.upper.resize(0);
    p.lo = lo;
    p.hi = hi;
    return p;
}

}  // namespace

TEST(Qp, UnconstrainedInteriorMinimum)
{
    const Eigen::Vector4d t(1, 2, 3, 4);
    const QpSolution s = solve(box_only(t, Eigen::Vector4d::Constant(-10), Eigen::Vector4d::Constant(10)));
    EXPECT_EQ(s.status, QpStatus::optimal);
    EXPECT_NEAR((s.u - t).norm(), 0.0, 1e-12);
    EXPECT_TRUE(s.active_set.empty());
    EXPECT_TRUE(s.active_bounds.empty());
}

TEST(Qp, BoxClipping)
{
    const Eigen::Vector4d t(5, -5, 0.5, 0);
    const QpSolution s = solve(box_only(t, Eigen::Vector4d::Constant(-1), Eigen::Vector4d::Constant(1)));
    EXPECT_NEAR((s.u - Eigen::Vector4d(1, -1, 0.5, 0)).norm(), 0.0, 1e-12);
    EXPECT_EQ(s.active_bounds, (std::vector<int>{0, 1}));
    EXPECT_LT(s.bound_multipliers[0], 0.0);
    EXPECT_GT(s.bound_multipliers[1], 0.0);
}

TEST(Qp, SingleRowProjection)
{
    QpProblem p = box_only(Eigen::Vector2d(2, 2), Eigen::Vector2d::Constant(-10), Eigen::Vector2d::Constant(10));
    p.rows.resize(1, 2);
    p.rows << 1, 1;
    p.lower.resize(1);
    p.upper.resize(1);
    p.lower << -kInf;
    p.upper << 1.0;
    const QpSolution s = solve(p);
    EXPECT_NEAR((s.u - Eigen::Vector2d(0.5, 0.5)).norm(), 0.0, 1e-12);
    EXPECT_EQ(s.active_set, std::vector<int>{0});
    EXPECT_NEAR(s.row_multipliers[0], -3.0, 1e-12);  // upper side: negative
    EXPECT_LT(s.kkt_residual, 1e-10);
}

TEST(Qp, EqualityRow)
{
    QpProblem p = box_only(Eigen::Vector2d(0, 0), Eigen::Vector2d::Constant(-10), Eigen::Vector2d::Constant(10));
    p.rows.resize(1, 2);
    p.rows << 1, -1;
    p.lower = Eigen::VectorXd::Constant(1, 2.0);
    p.upper = Eigen::VectorXd::Constant(1, 2.0);
    const QpSolution s = solve(p);
    EXPECT_EQ(s.status, QpStatus::optimal);
    EXPECT_NEAR((s.u - Eigen::Vector2d(1, -1)).norm(), 0.0, 1e-12);
}

TEST(Qp, InfeasibleRowsAreRelaxed)
{
    QpProblem p = box_only(Eigen::Vector2d(0, 0), Eigen::Vector2d::Constant(-1), Eigen::Vector2d::Constant(1));
    p.rows.resize(1, 2);
    p.rows << 1, 1;
    p.lower = Eigen::VectorXd::Constant(1, 3.0);  // max of u1 + u2 in the box is 2
    p.upper = Eigen::VectorXd::Constant(1, kInf);
    const QpSolution s = solve(p);
    EXPECT_EQ(s.status, QpStatus::relaxed_optimal);
    EXPECT_NEAR((s.u - Eigen::Vector2d(1, 1)).norm(), 0.0, 1e-6);
    EXPECT_NEAR(s.slack[0], 1.0, 1e-6);
}

TEST(Qp, ZeroRowHandledWithoutPivoting)
{
    QpProblem p = box_only(Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d::Constant(-1), Eigen::Vector2d::Constant(1));
    p.rows = Eigen::MatrixXd::Zero(1, 2);
    p.lower = Eigen::VectorXd::Constant(1, -1.0);
    p.upper = Eigen::VectorXd::Constant(1, 1.0);
    QpSolution s = solve(p);
    EXPECT_EQ(s.status, QpStatus::optimal);
    EXPECT_NEAR((s.u - Eigen::Vector2d(0.3, 0.1)).norm(), 0.0, 1e-12);

    p.lower[0] = 0.5;  // 0 >= 0.5 is impossible
    s = solve(p);
    EXPECT_EQ(s.status, QpStatus::relaxed_optimal);
    EXPECT_NEAR(s.slack[0], 0.5, 1e-6);
}

TEST(Qp, EmptyBoxIsReported)
{
    const QpSolution s = solve(box_only(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)));
    EXPECT_EQ(s.status, QpStatus::infeasible_box);
}

TEST(Qp, ValidateRejectsBadShapes)
{
    QpProblem p = box_only(Eigen::Vector2d(0, 0), Eigen::Vector2d::Constant(-1), Eigen::Vector2d::Constant(1));
    p.hessian(0, 1) = 1.0;
    EXPECT_THROW(solve(p), std::invalid_argument);
    p = box_only(Eigen::Vector2d(0, 0), Eigen::Vector2d::Constant(-1), Eigen::Vector2d::Constant(1));
    p.rows = Eigen::MatrixXd::Ones(1, 2);
    p.lower = Eigen::VectorXd::Constant(1, 2.0);
    p.upper = Eigen::VectorXd::Constant(1, 1.0);
    EXPECT_THROW(solve(p), std::invalid_argument);
}

TEST(Qp, MatchesEnumerationOracle)
{
    std::mt19937_64 rng(42);
    int with_active = 0;
    for (int i = 0; i < 200; ++i) {
        const QpProblem p = oracle::random_qp(rng);
        const QpSolution s = solve(p);
        const auto ref = oracle::enumerate_active_sets(p);
        ASSERT_TRUE(ref.feasible);
        ASSERT_EQ(s.status, QpStatus::optimal) << "problem " << i;
        EXPECT_NEAR(p.objective(s.u), ref.objective, 1e-6 * std::max(1.0, std::abs(ref.objective))) << i;
        EXPECT_LT(oracle::independent_kkt_residual(p, s.u), 1e-8) << i;
        EXPECT_LT(s.kkt_residual, 1e-8) << i;
        with_active += !s.active_set.empty();
    }
    EXPECT_GT(with_active, 100);
}

TEST(Qp, RelaxedSolutionStaysInBox)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        QpProblem p = oracle::random_qp(rng);
        // Contradictory rows: force a'u >= big where big is outside the reach of the box.
        p.lower[0] = 1e3;
        p.upper[0] = kInf;
        const QpSolution s = solve(p);
        EXPECT_EQ(s.status, QpStatus::relaxed_optimal);
        EXPECT_TRUE((s.u.array() >= p.lo.array()).all() && (s.u.array() <= p.hi.array()).all());
        EXPECT_GT(s.slack[0], 0.0);
    }
}

TEST(Qp, ExactPenaltyKeepsFeasibleProblemsUnrelaxed)
{
    // The relaxed problem's optimum coincides with the original one when rows
    // are consistent.
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
        const QpProblem p = oracle::random_qp(rng);
        const QpSolution direct = solve(p);
        const QpProblem r = relax_with_slacks(p, 1e6);
        const QpSolution relaxed = solve(r);
        EXPECT_NEAR((relaxed.u.head(4) - direct.u).norm(), 0.0, 1e-7);
        EXPECT_LT(relaxed.u.tail(9).maxCoeff(), 1e-9);
    }
}
