#include "common.hpp"

#include "dgreen/oracle.hpp"

#include <gtest/gtest.h>

#include <vector>

using namespace dgreen;
using namespace dgreen::testing;

namespace {

const std::vector<double> kTimes{-12.0, -5.0, -2.3, -1.0, -0.4, -0.1, 0.0, 0.1, 0.37, 1.0, 2.0, 3.3, 7.0, 12.0};
const std::vector<double> kResidualTimes{-6.0, -2.0, -0.5, 0.5, 1.3, 4.0};

double gauss_kernel_integral() {
    return 2.0 * integrate([](double t) { return std::exp(-t - t * t); }, 0.0, std::numeric_limits<double>::infinity());
}

}  // namespace

TEST(Green, ZeroForcing) {
    const auto s = scalar_stable();
    const GreenSolution sol(s.ctx, Forcing::zero(1));
    for (double t : kTimes) EXPECT_EQ(sol(t).norm(), 0.0);
    EXPECT_EQ(sol.g().norm(), 0.0);
    const auto jc = jump_check(sol);
    EXPECT_EQ(jc.jump.norm(), 0.0);
    EXPECT_EQ(jc.expected.norm(), 0.0);
}

TEST(Green, ScalarStableClosedForm) {
    const auto s = scalar_stable();
    const GreenSolution sol(s.ctx, Forcing::exp_abs(vec({1.0})));
    for (double t : kTimes) EXPECT_NEAR(std::abs(sol(t)(0) - stable_exp_closed(t)), 0.0, 1e-6) << "t = " << t;
    EXPECT_EQ(s.ctx->pinv().rank, 1);
    EXPECT_LT(sol.residual().norm, 1e-12);
}

TEST(Green, ScalarStableOffGrid) {
    const auto s = scalar_stable();
    const GreenSolution sol(s.ctx, Forcing::exp_abs(vec({1.0})));
    for (double t : {0.0123, 0.51234, 1.98765, -0.7777, -3.14159})
        EXPECT_NEAR(std::abs(sol(t)(0) - stable_exp_closed(t)), 0.0, 1e-6) << "t = " << t;
}

TEST(Green, HomoclinicFamily) {
    const auto s = homoclinic();
    EXPECT_EQ(s.ctx->pinv().rank, 0);
    const GreenSolution sol(s.ctx, Forcing::gaussian(vec({1.0})));
    for (double c : {0.0, 1.0, -2.5})
        for (double t : kTimes) {
            const double expect = c * std::exp(-std::abs(t)) + homoclinic_gauss_particular(t);
            EXPECT_NEAR(std::abs(bounded_family(sol, vec({c}), t)(0) - expect), 0.0, 1e-6) << "t = " << t;
        }
}

TEST(Green, HomoclinicKernelVanishes) {
    const auto s = homoclinic();
    for (double t : {-3.0, 0.0, 2.0}) EXPECT_LT(s.ctx->kernel(t).norm(), 1e-15);
}

TEST(Green, ReducesToGreenApplyAtZeroC) {
    const auto s = homoclinic();
    const Forcing f = Forcing::gaussian(vec({1.0}));
    for (double t : {-1.0, 0.5}) EXPECT_LT((bounded_family(s.ctx, f, vec({0.0}), t) - green_apply(s.ctx, f, t)).norm(), 1e-15);
}

TEST(Green, GrowoutKernel) {
    const auto s = growout();
    EXPECT_LT((s.ctx->kernel(0.0) - identity(1)).norm(), 1e-14);
    for (double t : {-4.0, -1.3, 0.7, 2.0, 5.5})
        EXPECT_NEAR(std::abs(s.ctx->kernel(t)(0, 0) - std::exp(-std::abs(t))), 0.0, 1e-10) << t;
}

TEST(Green, GrowoutResidualAndRhs) {
    const auto s = growout();
    const Forcing f = Forcing::gaussian(vec({1.0}));
    const double oracle = gauss_kernel_integral();
    const auto r = solvability_residual(s.ctx, f);
    EXPECT_GT(r.norm, 0.5);
    EXPECT_NEAR(std::abs(r.r(0) - oracle), 0.0, 1e-6);
    EXPECT_FALSE(r.satisfied);
    // D = 0 and P+(0) = 0, P-(0) = 1: both pieces of g are one-sided kernel integrals.
    EXPECT_NEAR(std::abs(rhs_g(s.ctx, f)(0) - oracle), 0.0, 1e-6);
}

TEST(Green, GrowoutJumpIdentity) {
    const auto s = growout();
    const auto jc = jump_check(s.ctx, Forcing::gaussian(vec({1.0})));
    EXPECT_GT(jc.jump.norm(), 0.5);
    EXPECT_LT(jc.err, 1e-6);
    EXPECT_NEAR(std::abs(jc.jump(0) + gauss_kernel_integral()), 0.0, 1e-6);
}

TEST(Green, OddForcingIsSolvableAndContinuous) {
    const auto s = growout();
    const Forcing f = Forcing::odd_gaussian(vec({1.0}));
    const auto r = solvability_residual(s.ctx, f);
    EXPECT_LT(r.norm, 1e-8);
    EXPECT_TRUE(r.satisfied);
    EXPECT_LT(jump_check(s.ctx, f).jump.norm(), 1e-6);
}

// Property: the solvability condition holds exactly when the Green solution is continuous at 0.
TEST(Green, SolvabilityIffContinuity) {
    const auto s = growout();
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
        const double a = trial % 3 == 0 ? 0.0 : u(rng), b = u(rng);
        const Forcing f = Forcing::gaussian(vec({a})) + Forcing::odd_gaussian(vec({b}));
        const GreenSolution sol(s.ctx, f);
        const auto jc = jump_check(sol);
        const bool solvable = solvability_residual(s.ctx, f).satisfied;
        const bool continuous = jc.jump.norm() <= 1e-6;
        EXPECT_EQ(solvable, continuous) << "a = " << a << " b = " << b;
        EXPECT_LT(jc.err, 1e-6);
    }
}

TEST(Green, InvertibleDHasNoConditions) {
    const auto s = saddle();
    EXPECT_EQ(s.ctx->pinv().rank, 2);
    for (double t : {-2.0, 0.0, 3.0}) EXPECT_LT(s.ctx->kernel(t).norm(), 1e-15);
    const Forcing f = Forcing::exp_abs(vec({1.0, 1.0}));
    EXPECT_LT(solvability_residual(s.ctx, f).norm, 1e-15);
    const GreenSolution sol(s.ctx, f);
    EXPECT_LT(jump_check(sol).jump.norm(), 1e-6);
    for (double t : {-1.0, 0.5, 4.0})
        EXPECT_LT((bounded_family(sol, vec({3.0, -7.0}), t) - bounded_family(sol, vec({0.0, 0.0}), t)).norm(), 1e-14);
}

TEST(Green, SaddleMatchesScalarConvolutions) {
    const auto s = saddle();
    const Forcing f = Forcing::exp_abs(vec({1.0, 1.0}));
    const GreenSolution sol(s.ctx, f);
    for (double t : kTimes) {
        const Vector x = sol(t);
        EXPECT_NEAR(std::abs(x(0) - convolution_scalar(-1.0, f, t, 0)), 0.0, 1e-6) << t;
        EXPECT_NEAR(std::abs(x(1) - convolution_scalar(1.0, f, t, 1)), 0.0, 1e-6) << t;
    }
}

TEST(Green, DifferentialIdentity) {
    const Forcing fe = Forcing::exp_abs(vec({1.0}));
    const Forcing fg = Forcing::gaussian(vec({1.0}));
    EXPECT_LT(diff_residual(scalar_stable().ctx, fe, kResidualTimes), 1e-4);
    EXPECT_LT(diff_residual(homoclinic().ctx, fg, kResidualTimes), 1e-4);
    EXPECT_LT(diff_residual(growout().ctx, Forcing::odd_gaussian(vec({1.0})), kResidualTimes), 1e-4);
    // Off 0 the identity holds branchwise even when the solvability condition fails.
    EXPECT_LT(diff_residual(growout().ctx, fg, kResidualTimes), 1e-4);
    EXPECT_LT(diff_residual(saddle().ctx, Forcing::exp_abs(vec({1.0, 1.0})), kResidualTimes), 1e-4);
}

TEST(Green, DifferentialIdentityWithKernelMember) {
    const auto s = homoclinic();
    const GreenSolution sol(s.ctx, Forcing::gaussian(vec({1.0})));
    const Vector c = vec({2.0});
    EXPECT_LT(diff_residual(sol, kResidualTimes, 1e-3, &c), 1e-4);
}

TEST(Green, DifferentialResidualSecondOrderInStep) {
    const auto s = scalar_stable();
    const GreenSolution sol(s.ctx, Forcing::exp_abs(vec({1.0})));
    const std::vector<double> sample{0.5, 1.5, -1.0};
    const double r1 = diff_residual(sol, sample, 0.05), r2 = diff_residual(sol, sample, 0.025);
    EXPECT_NEAR(r1 / r2, 4.0, 0.4);
}

TEST(Green, StencilAcrossZeroRejected) {
    const auto s = scalar_stable();
    const std::vector<double> sample{0.0005};
    EXPECT_THROW(diff_residual(s.ctx, Forcing::exp_abs(vec({1.0})), sample), InputError);
}

TEST(Green, BoundedByDichotomyEstimate) {
    for (const auto& [setup, f] : {std::pair{scalar_stable(), Forcing::exp_abs(vec({1.0}))},
                                   std::pair{homoclinic(), Forcing::gaussian(vec({1.0}))},
                                   std::pair{saddle(), Forcing::sinusoidal(vec({1.0, -1.0}), 2.0)}}) {
        const GreenSolution sol(setup.ctx, f);
        const auto tr = sample_trajectory(sol, Vector::Zero(setup.ctx->dim()), grid_times(*setup.ctx, 8));
        EXPECT_LE(tr.max_norm(), green_bound(*setup.ctx, f.sup_norm()));
    }
}

TEST(Green, Linearity) {
    const auto s = saddle();
    const Forcing f1 = Forcing::exp_abs(vec({1.0, 0.5}));
    const Forcing f2 = Forcing::gaussian(vec({cplx(0.0, 1.0), 2.0}));
    const GreenSolution a(s.ctx, f1), b(s.ctx, f2), ab(s.ctx, f1 + f2);
    for (double t : kTimes) EXPECT_LT((ab(t) - a(t) - b(t)).norm(), 1e-12);
}

TEST(Green, DecaysOutsideSupport) {
    // Gaussian forcing: the solution decays like e^{-|t|} away from the bump.
    const auto s = scalar_stable();
    const GreenSolution sol(s.ctx, Forcing::gaussian(vec({1.0})));
    const double x6 = sol(6.0).norm(), x10 = sol(10.0).norm();
    EXPECT_NEAR(x10 / x6, std::exp(-4.0), 1e-3 * std::exp(-4.0));
    EXPECT_LT(sol(-8.0).norm(), 1e-20);
}

TEST(Green, ParallelSamplingIsDeterministic) {
    const auto s = saddle();
    const GreenSolution sol(s.ctx, Forcing::exp_abs(vec({1.0, 1.0})));
    const auto times = grid_times(*s.ctx, 3);
    const auto a = sample_trajectory(sol, Vector::Zero(2), times, 1);
    const auto b = sample_trajectory(sol, Vector::Zero(2), times, 4);
    ASSERT_EQ(a.values.size(), b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_EQ((a.values[i] - b.values[i]).norm(), 0.0);
}

TEST(Green, TruncationAndTailBound) {
    const auto s = scalar_stable();
    EXPECT_GE(s.ctx->t_cut(), 20.0);
    EXPECT_LT(s.ctx->t_cut(), 20.0 + 2.0 * s.ctx->delta() + 1e-12);
    EXPECT_LT(s.ctx->tail_bound(1.0), 1e-7);
    EXPECT_THROW(s.ctx->kernel(25.0), InputError);
}

TEST(Green, ContextValidation) {
    const auto fam = std::make_shared<const EvolutionFamily>(Generator::general(TimeOperator::constant(scalar(-1.0))),
                                                             -10.0, 10.0, 0.05);
    const auto p = make_dichotomy(fam, scalar(1.0), Side::Plus);
    const auto m = make_dichotomy(fam, scalar(1.0), Side::Minus);
    EXPECT_THROW(GreenContext(m, p, QuadratureConfig{}), InputError);
    EXPECT_THROW(GreenContext(p, m, QuadratureConfig{20.0, 32, 1e-9}), InputError);  // family too short
    EXPECT_THROW(GreenContext(p, m, QuadratureConfig{5.0, 2, 1e-9}), InputError);
    const GreenContext ok(p, m, QuadratureConfig{5.0, 16, 1e-9});
    EXPECT_THROW(GreenSolution(std::make_shared<const GreenContext>(ok), Forcing::zero(2)), InputError);
}

TEST(Green, RefinementConvergesToClosedForm) {
    // Error at 16 nodes per unit is an order of magnitude above 32: the rule is high order.
    const Forcing f = Forcing::gaussian(vec({1.0}));
    double errs[2];
    int i = 0;
    for (int npu : {8, 16}) {
        const auto s = homoclinic(QuadratureConfig{20.0, npu, 1e-9});
        const GreenSolution sol(s.ctx, f);
        double e = 0.0;
        for (double t : kTimes) e = std::max(e, std::abs(sol(t)(0) - homoclinic_gauss_particular(t)));
        errs[i++] = e;
    }
    EXPECT_GT(errs[0] / errs[1], 6.0);
}
