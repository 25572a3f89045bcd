#include <gtest/gtest.h>

#include <cmath>

#include "musolve/nonlinearity.hpp"

using namespace musolve;

TEST(Nonlinearity, RationalDecayValues) {
    Nonlinearity nl = Nonlinearity::rational(-7.0, 10.0);
    EXPECT_DOUBLE_EQ(nl.f(0.0), 0.0);
    EXPECT_DOUBLE_EQ(nl.f(1.0), -3.5);
    EXPECT_DOUBLE_EQ(nl.f(-1.0), 3.5);
    EXPECT_DOUBLE_EQ(nl.F(0.0), 0.0);
    EXPECT_NEAR(nl.F(2.0), -3.5 * std::log(5.0), 1e-14);
    EXPECT_DOUBLE_EQ(nl.F(2.0), nl.F(-2.0));
}

TEST(Nonlinearity, GaussianDecayValues) {
    Nonlinearity nl = Nonlinearity::gaussian(2.0, 0.0);
    EXPECT_DOUBLE_EQ(nl.f(1.0), 2.0 * std::exp(-1.0));
    EXPECT_NEAR(nl.F(10.0), 1.0, 1e-12); // saturates at lambda0 / 2
}

TEST(Nonlinearity, DerivativeMatchesFiniteDifferences) {
    for (const Nonlinearity &nl :
         {Nonlinearity::rational(-7.0, 10.0), Nonlinearity::gaussian(3.0, 1.0)}) {
        for (double t : {-2.0, -0.3, 0.0, 0.4, 1.7, 9.0}) {
            const double eps = 1e-6;
            const double fd = (nl.f(t + eps) - nl.f(t - eps)) / (2.0 * eps);
            EXPECT_NEAR(nl.fprime(t), fd, 1e-7 * (1.0 + std::abs(fd)));
        }
    }
}

TEST(Nonlinearity, PrimitiveMatchesDerivative) {
    Nonlinearity nl = Nonlinearity::rational(4.0, 0.0);
    for (double t : {-1.5, 0.2, 0.9, 3.0}) {
        const double eps = 1e-6;
        const double fd = (nl.F(t + eps) - nl.F(t - eps)) / (2.0 * eps);
        EXPECT_NEAR(fd, nl.f(t), 1e-7 * (1.0 + std::abs(nl.f(t))));
    }
}

TEST(Nonlinearity, TableInterpolatesAndClampsOddly) {
    Nonlinearity nl = Nonlinearity::tabulated({1.0, 2.0}, {0.5, 0.25}, 0.5, 0.0);
    EXPECT_DOUBLE_EQ(nl.f(0.0), 0.0);
    EXPECT_DOUBLE_EQ(nl.f(0.5), 0.25);
    EXPECT_DOUBLE_EQ(nl.f(1.5), 0.375);
    EXPECT_DOUBLE_EQ(nl.f(10.0), 0.25);   // clamped
    EXPECT_DOUBLE_EQ(nl.f(-1.5), -0.375); // exact oddness
    // primitive of the piecewise-linear interpolant, by hand:
    // int_0^1 = 0.25, int_1^2 = 0.375, beyond: 0.25 (t - 2)
    EXPECT_NEAR(nl.F(1.0), 0.25, 1e-15);
    EXPECT_NEAR(nl.F(2.0), 0.625, 1e-15);
    EXPECT_NEAR(nl.F(3.0), 0.875, 1e-15);
    EXPECT_DOUBLE_EQ(nl.F(3.0), nl.F(-3.0));
}

TEST(Nonlinearity, TableRejectsBadInput) {
    EXPECT_THROW(Nonlinearity::tabulated({}, {}, 1.0, 0.0), ConfigError);
    EXPECT_THROW(Nonlinearity::tabulated({1.0, 0.5}, {1.0, 1.0}, 1.0, 0.0), ConfigError);
    EXPECT_THROW(Nonlinearity::tabulated({1.0}, {0.5}, 0.0, 0.0), ConfigError); // lambda0 = 0
}

TEST(Nonlinearity, ZeroSlopeAtOriginRejected) {
    EXPECT_THROW(Nonlinearity::rational(0.0, 1.0), ConfigError);
}

TEST(Growth, EpsilonAboveSlopeNeedsNoConstant) {
    Nonlinearity nl = Nonlinearity::rational(1.0, 0.0);
    GrowthBound b = check_growth(nl, 1.0);
    EXPECT_EQ(b.a_epsilon, 0.0);
    EXPECT_FALSE(b.sublinear_violated);
}

TEST(Growth, SmallEpsilonGivesFiniteConstant) {
    Nonlinearity nl = Nonlinearity::rational(1.0, 0.0);
    GrowthBound b = check_growth(nl, 0.1);
    EXPECT_GT(b.a_epsilon, 0.0);
    EXPECT_TRUE(std::isfinite(b.a_epsilon));
    EXPECT_FALSE(b.sublinear_violated);
    // independent 1D maximization of f(t) - eps t on a fine grid
    double best = 0.0;
    for (int i = 0; i <= 2000000; ++i) {
        const double t = 10.0 * i / 2000000.0;
        best = std::max(best, std::abs(nl.f(t)) - 0.1 * t);
    }
    EXPECT_NEAR(b.a_epsilon, best, 1e-3 * best);
    // the bound holds on an independent grid, up to the scan resolution
    for (int i = 0; i <= 10000; ++i) {
        const double t = std::pow(10.0, -6.0 + 10.0 * i / 10000.0);
        EXPECT_LE(std::abs(nl.f(t)), 0.1 * t + b.a_epsilon + 1e-4 * (1.0 + b.a_epsilon));
    }
}

TEST(Growth, LinearGrowthIsFlagged) {
    // f(t) = t via a linearly extrapolated table: never dominated by eps |t|
    Nonlinearity nl =
        Nonlinearity::tabulated({1.0}, {1.0}, 1.0, 0.0, TableExtension::linear);
    GrowthBound b = check_growth(nl, 0.5);
    EXPECT_TRUE(b.sublinear_violated);
}

TEST(Asymptotics, RationalSatisfiesAllThree) {
    Nonlinearity nl = Nonlinearity::rational(-7.0, 10.0);
    AsymptoticCertificates cert = certify_asymptotics(nl);
    EXPECT_TRUE(cert.bounded_on_compacts);
    EXPECT_TRUE(cert.decays_at_infinity);
    EXPECT_TRUE(cert.slope_matches_at_zero);
}

TEST(Asymptotics, LinearTableFailsDecay) {
    Nonlinearity nl =
        Nonlinearity::tabulated({1.0}, {1.0}, 1.0, 0.0, TableExtension::linear);
    AsymptoticCertificates cert = certify_asymptotics(nl);
    EXPECT_FALSE(cert.decays_at_infinity);
}

TEST(Asymptotics, DeclaredSlopeMismatchIsCaught) {
    // A table whose actual origin slope (0.5) differs from the declared one.
    Nonlinearity nl = Nonlinearity::tabulated({1.0}, {0.5}, 2.0, 0.0);
    AsymptoticCertificates cert = certify_asymptotics(nl);
    EXPECT_FALSE(cert.slope_matches_at_zero);
    EXPECT_NEAR(cert.origin_slope_dev, 1.5, 1e-9);
}
