#include "cbfquad/cbf.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace cbfquad;

namespace {

CbfParams box_gains()
{
    CbfParams c;
    c.pole_gains = {Vec3(1, 1, 1), Vec3(4, 4, 5), Vec3(5, 5, 10), Vec3(5, 5, 10)};
    return c;
}

QuadState random_state(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    QuadState s;
    s.position = Vec3(0.5 * U(rng), 0.5 * U(rng), 4.0 + U(rng));
    s.velocity = 0.5 * Vec3(U(rng), U(rng), U(rng));
    s.attitude = Quat(Eigen::AngleAxisd(0.5 * U(rng), Vec3(U(rng), U(rng), U(rng)).normalized()));
    s.body_rate = Vec3(U(rng), U(rng), U(rng));
    return s;
}

}  // namespace

TEST(ElemSym, MatchesSubsetSums)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.1, 10.0);
    for (int n = 0; n <= 6; ++n) {
        std::vector<double> p(n);
        for (double& v : p) v = U(rng);
        for (int k = 0; k <= n; ++k) EXPECT_NEAR(elem_sym(p, k), oracle::subset_elem_sym(p, k), 1e-9);
    }
}

TEST(ElemSym, RejectsBadOrder)
{
    const std::vector<double> p = {1.0, 2.0};
    EXPECT_THROW(elem_sym(p, 3), std::out_of_range);
    EXPECT_THROW(elem_sym(p, -1), std::out_of_range);
    EXPECT_DOUBLE_EQ(elem_sym(p, 0), 1.0);
}

TEST(GammaQ, SpotRowsForXAxis)
{
    const GammaQ gq = gamma_q_matrices(box_gains());
    const double rows[3][5] = {{4, 5, 1, 0, 0}, {20, 29, 10, 1, 0}, {100, 165, 79, 15, 1}};
    const double q[3] = {4, 20, 100};
    for (int b = 0; b < 3; ++b) {
        for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(gq.gamma(3 * b, 3 * j), rows[b][j]);
        EXPECT_DOUBLE_EQ(gq.q(3 * b, 0), q[b]);
    }
}

TEST(GammaQ, MatchesRecursionExpansion)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.2, 12.0);
    for (int trial = 0; trial < 20; ++trial) {
        CbfParams c;
        for (auto& p : c.pole_gains) p = Vec3(U(rng), U(rng), U(rng));
        const GammaQ gq = gamma_q_matrices(c);
        for (int axis = 0; axis < 3; ++axis) {
            const auto pa = c.axis_poles(axis);
            const std::vector<double> poles(pa.begin(), pa.end());
            for (int k = 2; k <= 4; ++k) {
                const auto coeff = oracle::expand_recursion(poles, k);
                const int row = 3 * (k - 2) + axis;
                for (int col = 0; col < kLambdaSize; ++col) {
                    const int j = col / 3;
                    const double expected = (col % 3 == axis && j <= k) ? coeff[j] : 0.0;
                    EXPECT_NEAR(gq.gamma(row, col), expected, 1e-12 * std::max(1.0, std::abs(expected)));
                }
                for (int a = 0; a < 3; ++a)
                    EXPECT_NEAR(gq.q(row, a), a == axis ? coeff[0] : 0.0, 1e-12 * std::max(1.0, coeff[0]));
            }
        }
    }
}

TEST(GammaQ, RejectsNonPositivePoles)
{
    CbfParams c;
    c.pole_gains[2].y() = 0.0;
    EXPECT_THROW(gamma_q_matrices(c), InvalidParameters);
}

TEST(Lambda, AffineInputMatchesFlatDerivativesAtFreezePoint)
{
    std::mt19937_64 rng(3);
    const QuadParams p;
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 30; ++i) {
        const QuadState s = random_state(rng);
        const ControlInput u{10.0 + 5.0 * U(rng), Vec3(U(rng), U(rng), 0.02 * U(rng))};
        const LambdaAffine lam = lambda_affine(s, p, u.thrust);
        const LambdaVec v = lam.offset + lam.input * u.as_vector();
        const FlatDerivatives fd = flat_derivatives(s, u, p);
        EXPECT_NEAR((v.segment<3>(0) - s.position).norm(), 0.0, 1e-12);
        EXPECT_NEAR((v.segment<3>(3) - s.velocity).norm(), 0.0, 1e-12);
        EXPECT_NEAR((v.segment<3>(6) - fd.acceleration).norm(), 0.0, 1e-10);
        EXPECT_NEAR((v.segment<3>(9) - fd.jerk).norm(), 0.0, 1e-10);
        EXPECT_NEAR((v.segment<3>(12) - fd.snap).norm(), 0.0, 1e-9);
    }
}

TEST(Lambda, SnapIsExactOnlyAtFreezePoint)
{
    const QuadParams p;
    QuadState s;
    s.body_rate = Vec3(0.5, -0.2, 0.1);
    const ControlInput u{20.0, Vec3(1.0, 0.0, 0.0)};
    const LambdaAffine lam = lambda_affine(s, p, 10.0);
    const LambdaVec v = lam.offset + lam.input * u.as_vector();
    EXPECT_GT((v.segment<3>(12) - flat_derivatives(s, u, p).snap).norm(), 1e-3);
}

TEST(Constraints, RowsReproduceChainAtFreezePoint)
{
    // a_i' u - lower_i equals v_k of the lower barrier and upper_i - a_i' u
    // equals v_k of the upper barrier when u is the freeze point.
    std::mt19937_64 rng(4);
    const QuadParams p;
    const CbfParams c = box_gains();
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 30; ++i) {
        const QuadState s = random_state(rng);
        const ControlInput u{12.0 + 3.0 * U(rng), 0.5 * Vec3(U(rng), U(rng), 0.02 * U(rng))};
        const ConstraintSet cs = build_constraints(s, c, p, u);
        const VChain ch = v_chain(s, u, c, p);
        const CbfRowVec au = cs.coeffs * u.as_vector();
        for (int k = 2; k <= 4; ++k)
            for (int a = 0; a < 3; ++a) {
                const int row = 3 * (k - 2) + a;
                EXPECT_NEAR(au[row] - cs.lower[row], ch.lower[a][k], 1e-8);
                EXPECT_NEAR(cs.upper[row] - au[row], ch.upper[a][k], 1e-8);
            }
    }
}

TEST(Constraints, FrozenThrustIsClamped)
{
    const QuadParams p;
    const CbfParams c;
    EXPECT_DOUBLE_EQ(frozen_thrust_for(ControlInput{-3.0, Vec3::Zero()}, c, p), c.thrust_floor);
    EXPECT_DOUBLE_EQ(frozen_thrust_for(ControlInput{100.0, Vec3::Zero()}, c, p), p.u_max[0]);
    EXPECT_DOUBLE_EQ(frozen_thrust_for(ControlInput{12.5, Vec3::Zero()}, c, p), 12.5);
}

TEST(Constraints, NonFiniteStateThrows)
{
    QuadState s;
    s.position.x() = std::nan("");
    EXPECT_THROW(build_constraints(s, CbfParams{}, QuadParams{}, ControlInput{}), InvalidState);
}

TEST(Constraints, HoverAtCentreSatisfiesAllRows)
{
    const QuadParams p;
    QuadState s;
    s.position = Vec3(0, 0, 4);
    const ControlInput hover{p.mass * p.gravity, Vec3::Zero()};
    EXPECT_TRUE(build_constraints(s, CbfParams{}, p, hover).satisfied_by(hover));
}

TEST(VChain, RecursionOnPolynomialBarrier)
{
    // h(t) derivatives (h, h', ...) through the chain equal the expanded
    // polynomial weights.
    const std::array<double, 4> poles = {1.0, 4.0, 5.0, 5.0};
    const std::array<double, 5> h = {2.0, -0.5, 0.3, 0.1, -0.7};
    const auto v = detail::run_chain(poles, h);
    const std::vector<double> pv(poles.begin(), poles.end());
    for (int k = 0; k <= 4; ++k) {
        const auto c = oracle::expand_recursion(pv, k);
        double expected = 0.0;
        for (int j = 0; j <= k; ++j) expected += c[j] * h[j];
        EXPECT_NEAR(v[k], expected, 1e-12);
    }
}

TEST(InitialSet, OutsideBoxFlagsC0)
{
    QuadState s;
    s.position = Vec3(0.0, 0.0, 7.0);
    const QuadParams p;
    const InitialSetReport r = check_initial_set(s, ControlInput{p.mass * p.gravity, Vec3::Zero()}, CbfParams{}, p);
    EXPECT_FALSE(r.member[2][0]);
    EXPECT_TRUE(r.member[0][0]);
    EXPECT_FALSE(r.all_inside());
}

TEST(InitialSet, FastOutwardMotionFlagsC1)
{
    const CbfParams c;
    const QuadParams p;
    QuadState s;
    s.position = Vec3(0.0, 0.0, 5.0);
    s.velocity = Vec3(0.0, 0.0, 3.0);  // p_z1 * (6 - 5) = 1 < 3
    const InitialSetReport r = check_initial_set(s, ControlInput{p.mass * p.gravity, Vec3::Zero()}, c, p);
    EXPECT_TRUE(r.member[2][0]);
    EXPECT_FALSE(r.member[2][1]);
    EXPECT_NEAR(r.chain.upper[2][1], -s.velocity.z() + c.pole_gains[0].z() * (c.r_max.z() - s.position.z()), 1e-12);
}

TEST(InitialSet, HoverInsideIsMember)
{
    const QuadParams p;
    QuadState s;
    s.position = Vec3(0.2, -0.3, 3.5);
    EXPECT_TRUE(check_initial_set(s, ControlInput{p.mass * p.gravity, Vec3::Zero()}, CbfParams{}, p).all_inside());
    EXPECT_TRUE(in_safe_region(s.position, CbfParams{}));
    EXPECT_FALSE(in_safe_region(Vec3(0, 0, 1.9), CbfParams{}));
}
