#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "fdemm/errors.hpp"
#include "fdemm/levy.hpp"

using namespace fdemm;

namespace {
LevyTriplet bs(double b, double c) { return {b, c, LevyMeasure::none()}; }
}

TEST(CharExponent, PureBrownian) {
    const auto psi = characteristic_exponent(bs(0.0, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(psi.real(), -0.5);
    EXPECT_DOUBLE_EQ(psi.imag(), 0.0);
}

TEST(CharExponent, DriftAndDiffusion) {
    const auto psi = characteristic_exponent(bs(0.1, 0.04), 2.0);
    EXPECT_NEAR(psi.real(), -0.08, 1e-15);
    EXPECT_NEAR(psi.imag(), 0.2, 1e-15);
}

TEST(CharExponent, SingleAtomHandSum) {
    LevyTriplet m{0.0, 0.0, LevyMeasure::atoms({{0.5, 2.0}})};
    const std::complex<double> expected =
        2.0 * (std::exp(std::complex<double>(0.0, 0.5)) - 1.0 - std::complex<double>(0.0, 0.5));
    const auto psi = characteristic_exponent(m, 1.0);
    EXPECT_NEAR(psi.real(), expected.real(), 1e-15);
    EXPECT_NEAR(psi.imag(), expected.imag(), 1e-15);
}

TEST(CharExponent, ZeroAndConjugateSymmetry) {
    LevyTriplet m{0.05, 0.02, LevyMeasure::merton(1.5, -0.1, 0.2)};
    const auto z = characteristic_exponent(m, 0.0);
    EXPECT_EQ(z.real(), 0.0);
    EXPECT_EQ(z.imag(), 0.0);
    for (double u : {0.3, 1.0, 2.5}) {
        const auto p = characteristic_exponent(m, u);
        const auto q = characteristic_exponent(m, -u);
        EXPECT_NEAR(p.real(), q.real(), 1e-12);
        EXPECT_NEAR(p.imag(), -q.imag(), 1e-12);
    }
}

TEST(CharExponent, MertonMatchesGaussianCharFn) {
    // int (e^{iuy} - 1) nu(dy) = lam (e^{iu mu - u^2 s^2/2} - 1); truncation term by quadrature
    // is avoided by comparing real parts only.
    const double lam = 1.5, mu = -0.1, s = 0.2, u = 1.7;
    LevyTriplet m{0.0, 0.0, LevyMeasure::merton(lam, mu, s)};
    const double expected = lam * (std::exp(-0.5 * u * u * s * s) * std::cos(u * mu) - 1.0);
    EXPECT_NEAR(characteristic_exponent(m, u).real(), expected, 1e-11);
}

TEST(NuIntegral, AtomMass) {
    LevyTriplet m{0.0, 0.0, LevyMeasure::atoms({{0.5, 2.0}})};
    EXPECT_EQ(nu_integral(m, Integrand{[](double) { return 1.0; }, {}, {}, {}}), 2.0);
}

TEST(NuIntegral, SymmetricMertonMean) {
    LevyTriplet m{0.0, 0.0, LevyMeasure::merton(1.0, 0.0, 0.1)};
    EXPECT_NEAR(nu_integral(m, Integrand{[](double y) { return y; }, {}, {}, {}}), 0.0, 1e-14);
}

TEST(NuIntegral, KouExponentialMoment) {
    const double lam = 2.0, p = 0.5, eu = 10.0, ed = 10.0;
    LevyTriplet m{0.0, 0.0, LevyMeasure::kou(lam, p, eu, ed)};
    const double expected = lam * (p * eu / (eu - 1.0) + (1.0 - p) * ed / (ed + 1.0) - 1.0);
    Integrand g{[](double y) { return std::expm1(y); }, {}, {}, TailGrowth{1.0, false}};
    EXPECT_NEAR(nu_integral(m, g), expected, 1e-10 * std::abs(expected));
}

TEST(NuIntegral, MertonExponentialMoment) {
    const double lam = 0.7, mu = 0.05, s = 0.3;
    LevyTriplet m{0.0, 0.0, LevyMeasure::merton(lam, mu, s)};
    const double expected = lam * (std::exp(mu + 0.5 * s * s) - 1.0);
    Integrand g{[](double y) { return std::expm1(y); }, {}, {}, TailGrowth{1.0, false}};
    EXPECT_NEAR(nu_integral(m, g), expected, 1e-10 * std::abs(expected));
}

TEST(NuIntegral, KouDivergentTail) {
    LevyTriplet m{0.0, 0.0, LevyMeasure::kou(1.0, 0.5, 0.9, 5.0)};
    Integrand g{[](double y) { return std::expm1(y); }, {}, {}, TailGrowth{1.0, false}};
    EXPECT_THROW(nu_integral(m, g), DivergentIntegral);
}

TEST(NuIntegral, SuperExponentialRejected) {
    LevyTriplet m{0.0, 0.0, LevyMeasure::merton(1.0, 0.0, 0.2)};
    Integrand g{[](double y) { return std::exp(std::expm1(y)); }, {}, {}, TailGrowth{0.0, true}};
    EXPECT_THROW(nu_integral(m, g), DivergentIntegral);
}

TEST(NuIntegral, LinearInIntegrand) {
    LevyTriplet m{0.0, 0.0, LevyMeasure::kou(3.0, 0.4, 6.0, 4.0)};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int i = 0; i < 5; ++i) {
        const double a = U(rng), b = U(rng), w1 = U(rng), w2 = U(rng);
        Integrand f{[w1](double y) { return std::sin(w1 * y); }, {}, {}, {}};
        Integrand g{[w2](double y) { return std::cos(w2 * y) * y; }, {}, {}, {}};
        Integrand h{[&](double y) { return a * f.fn(y) + b * g.fn(y); }, {}, {}, {}};
        EXPECT_NEAR(nu_integral(m, h), a * nu_integral(m, f) + b * nu_integral(m, g), 1e-12);
    }
}

TEST(NuIntegral, AtomsSummedInAscendingAbsOrder) {
    const auto nu = LevyMeasure::atoms({{0.7, 0.3}, {-0.2, 1.1}, {0.2, 0.9}, {-1.5, 0.05}});
    const auto& a = nu.atom_list();
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a[0].size, -0.2);
    EXPECT_EQ(a[1].size, 0.2);
    EXPECT_EQ(a[2].size, 0.7);
    EXPECT_EQ(a[3].size, -1.5);
    auto g = [](double y) { return std::exp(3.0 * y) / 7.0; };
    double sum = 0.0;
    sum += 1.1 * g(-0.2);
    sum += 0.9 * g(0.2);
    sum += 0.3 * g(0.7);
    sum += 0.05 * g(-1.5);
    EXPECT_EQ(nu_integral(nu, Integrand{g, {}, {}, {}}), sum);
}

TEST(DriftResidual, Examples) {
    Integrand one{[](double) { return 1.0; }, {}, {}, {}};
    EXPECT_NEAR(drift_residual(bs(-0.02, 0.04), 0.0, one), 0.0, 1e-17);
    EXPECT_NEAR(drift_residual(bs(0.1, 0.04), -3.0, one), 0.0, 1e-15);
    EXPECT_NEAR(drift_residual(bs(0.1, 0.04), 0.0, one), 0.12, 1e-15);
}

TEST(DriftResidual, IncreasingInBeta) {
    LevyTriplet m{0.1, 0.04, LevyMeasure::merton(1.0, -0.05, 0.1)};
    Integrand one{[](double) { return 1.0; }, {}, {}, TailGrowth{0.0, false}};
    double prev = -1e300;
    for (double beta = -5.0; beta <= 5.0; beta += 0.5) {
        const double r = drift_residual(m, beta, one);
        EXPECT_GT(r, prev);
        prev = r;
    }
}

TEST(LevyTriplet, Validation) {
    EXPECT_THROW(bs(0.0, -1.0).validate(), InvalidModel);
    EXPECT_THROW(bs(0.1, 0.0).validate(), InvalidModel);
    EXPECT_THROW(LevyMeasure::atoms({{0.0, 1.0}}), InvalidModel);
    EXPECT_THROW(LevyMeasure::atoms({{0.1, -1.0}}), InvalidModel);
    EXPECT_THROW(LevyMeasure::kou(1.0, 1.5, 2.0, 2.0), InvalidModel);
    EXPECT_NO_THROW((LevyTriplet{0.1, 0.0, LevyMeasure::atoms({{0.1, 1.0}})}.validate()));
}
