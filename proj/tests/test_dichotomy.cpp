#include "common.hpp"

#include <gtest/gtest.h>

using namespace dgreen;
using namespace dgreen::testing;

namespace {

std::shared_ptr<const EvolutionFamily> autonomous(const Operator& a, double extent = 20.0, double h = 0.05) {
    return std::make_shared<const EvolutionFamily>(Generator::general(TimeOperator::constant(a)), -extent, extent, h);
}

}  // namespace

TEST(SpectralProjector, Diagonal) {
    EXPECT_LT((spectral_projector(diag({-1.0, 2.0})) - diag({1.0, 0.0})).norm(), 1e-14);
    EXPECT_LT((spectral_projector(-identity(3)) - identity(3)).norm(), 1e-14);
}

TEST(SpectralProjector, NonNormal) {
    Operator a(2, 2);
    a << -1, 1, 0, 1;
    Operator expect(2, 2);
    expect << 1, -0.5, 0, 0;
    EXPECT_LT((spectral_projector(a) - expect).norm(), 1e-13);
}

TEST(SpectralProjector, Defective) {
    Operator a(3, 3);
    a << -1, 1, 0, 0, -1, 0, 0, 0, 2;
    const Operator p = spectral_projector(a);
    EXPECT_LT((p - diag({1.0, 1.0, 0.0})).norm(), 1e-12);
}

TEST(SpectralProjector, NearAxisRejected) {
    Operator a(2, 2);
    a << 1e-10, 1, -1, 1e-10;
    EXPECT_THROW(spectral_projector(a), NoDichotomyError);
    try {
        spectral_projector(a);
    } catch (const NoDichotomyError& e) {
        EXPECT_NE(std::string(e.what()).find("eigenvalue"), std::string::npos);
    }
}

TEST(SpectralProjector, CommutesAndIdempotent) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Operator a = random_complex(rng, 4, 4);
        const Operator p = spectral_projector(a);
        EXPECT_LT((p * p - p).norm(), 1e-10);
        EXPECT_LT((a * p - p * a).norm(), 1e-10 * a.norm());
    }
}

TEST(VerifyDichotomy, SaddlePlus) {
    const auto fam = autonomous(diag({-1.0, 1.0}));
    const auto rep = verify_dichotomy(*fam, diag({1.0, 0.0}), Side::Plus, 21);
    EXPECT_TRUE(rep.ok) << rep.reason;
    EXPECT_NEAR(rep.alpha_est, 1.0, 0.05);
    EXPECT_LT(rep.idempotency_err, 1e-12);
}

TEST(VerifyDichotomy, WrongSubspace) {
    const auto fam = autonomous(diag({-1.0, 1.0}));
    const auto rep = verify_dichotomy(*fam, diag({0.0, 1.0}), Side::Plus, 21);
    EXPECT_FALSE(rep.ok);
    EXPECT_FALSE(rep.reason.empty());
}

TEST(VerifyDichotomy, SignGeneratorMinusSide) {
    const auto fam = std::make_shared<const EvolutionFamily>(
        Generator::general(TimeOperator::piecewise_sign(scalar(-1.0), scalar(1.0))), -20.0, 20.0, 0.05);
    const auto rep = verify_dichotomy(*fam, scalar(1.0), Side::Minus, 21);
    EXPECT_TRUE(rep.ok) << rep.reason;
    EXPECT_NEAR(rep.alpha_est, 1.0, 0.05);
}

TEST(VerifyDichotomy, RandomHyperbolicRates) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> re(0.5, 2.0), im(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(2, 5);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = dim(rng);
        Vector lam(n);
        double min_re = 1e9;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double r = re(rng) * (i % 2 ? 1.0 : -1.0);
            lam(i) = cplx(r, im(rng));
            min_re = std::min(min_re, std::abs(r));
        }
        const Operator s = identity(n) + 0.3 * random_complex(rng, n, n);
        const Operator a = s * lam.asDiagonal() * s.inverse();
        const auto fam = autonomous(a);
        for (Side side : {Side::Plus, Side::Minus}) {
            const auto rep = verify_dichotomy(*fam, spectral_projector(a), side, 21);
            EXPECT_TRUE(rep.ok) << rep.reason;
            EXPECT_NEAR(rep.alpha_est, min_re, 0.1 * min_re) << "trial " << trial;
        }
    }
}

TEST(VerifyDichotomy, UnitaryRejected) {
    Operator h0(2, 2);
    h0 << 1, 0.5, 0.5, -1;
    const auto fam = std::make_shared<const EvolutionFamily>(
        Generator::schrodinger(h0, TimeOperator::constant(Operator::Zero(2, 2))), -20.0, 20.0, 0.05);
    for (const Operator& p0 : {diag({1.0, 0.0}), identity(2), Operator(Operator::Zero(2, 2))}) {
        EXPECT_FALSE(verify_dichotomy(*fam, p0, Side::Plus, 21).ok);
    }
    EXPECT_THROW(spectral_projector(fam->generator()(0.0)), NoDichotomyError);
    EXPECT_THROW(make_dichotomy(fam, diag({1.0, 0.0}), Side::Plus), NoDichotomyError);
}

TEST(VerifyDichotomy, TimeDependentRates) {
    // a(t) = diag(-1.5, 1) + 0.5 sin(t) I: exact exponents -1.5 and 1 on average.
    const auto fam = std::make_shared<const EvolutionFamily>(
        Generator::general(TimeOperator::sinusoidal(diag({-1.5, 1.0}), 0.5 * identity(2), 1.0)), -30.0, 30.0, 0.02);
    for (Side side : {Side::Plus, Side::Minus}) {
        const auto d = make_dichotomy(fam, diag({1.0, 0.0}), side);
        EXPECT_NEAR(d.alpha, 1.0, 0.1);
        EXPECT_GE(d.M, 1.0);
        for (double t : {1.0, 3.0, 6.0}) {
            const double ts = side == Side::Plus ? t : -t;
            EXPECT_LT((d.projector(ts) - diag({1.0, 0.0})).norm(), 1e-8);
        }
    }
}

TEST(Gluing, Examples) {
    EXPECT_LT((build_gluing(diag({1.0, 0.0}), diag({1.0, 0.0})) - diag({1.0, -1.0})).norm(), 1e-15);
    EXPECT_LT(build_gluing(scalar(0.0), scalar(1.0)).norm(), 1e-15);
    EXPECT_LT(build_gluing(diag({1.0, 0.0}), diag({0.0, 1.0})).norm(), 1e-15);
    EXPECT_THROW(build_gluing(diag({1.0, 0.5}), diag({1.0, 0.0})), InputError);
    EXPECT_THROW(build_gluing(identity(2), identity(3)), InputError);
}
