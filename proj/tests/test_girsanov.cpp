#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "fdemm/errors.hpp"
#include "fdemm/girsanov.hpp"

using namespace fdemm;

namespace {

LevyTriplet bs(double b, double c) { return {b, c, LevyMeasure::none()}; }

const double kLn2 = std::log(2.0);

// Independent oracle: composite Simpson on a wide finite window, split where
// the truncation and the Kou density jump.
double simpson_piece(const std::function<double(double)>& f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double s = f(std::nextafter(lo, hi)) + f(std::nextafter(hi, lo));
    for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 100000) {
    double total = 0.0;
    double a = lo;
    for (double cut : {-1.0, 0.0, 1.0, hi}) {
        if (cut <= a) continue;
        const double b = std::min(cut, hi);
        total += simpson_piece(f, a, b, n);
        a = b;
    }
    return total;
}

double merton_density(double y, double lam, double mu, double s) {
    const double z = (y - mu) / s;
    return lam * std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * M_PI));
}

double h(double y) { return std::abs(y) <= 1.0 ? y : 0.0; }

}  // namespace

TEST(Solve, BlackScholesClosedForm) {
    for (auto fam : {DivergenceFamily::entropy(), DivergenceFamily::log(), DivergenceFamily::power(0.0),
                     DivergenceFamily::power(-3.0)}) {
        const auto sol = solve_minimal(bs(0.1, 0.04), fam);
        EXPECT_NEAR(sol.beta_star, -3.0, 1e-14);
        EXPECT_EQ(sol.Y_star(0.3), 1.0);
        EXPECT_LT(std::abs(sol.diagnostics.residual), 1e-10);
    }
}

TEST(Solve, MartingaleRegime) {
    for (auto fam : {DivergenceFamily::entropy(), DivergenceFamily::log(), DivergenceFamily::power(0.0)}) {
        const auto sol = solve_minimal(bs(-0.02, 0.04), fam);
        EXPECT_EQ(sol.beta_star, 0.0);
        EXPECT_EQ(divergence_value(sol, fam, 1.0), fam.kind() == FamilyKind::Power ? 1.0 : 0.0);
        EXPECT_EQ(sol.divergence_rate, 0.0);
    }
}

TEST(Solve, EntropyAtomAgainstScanBisection) {
    const double b = 0.05, c = 0.04;
    LevyTriplet m{b, c, LevyMeasure::atoms({{kLn2, 1.0}})};
    auto R = [&](double th) { return b + 0.5 * c + c * th + 1.0 * std::exp(th) - kLn2; };
    ASSERT_GT(R(0.0), 0.0);
    double lo = -50.0, hi = 0.0;
    for (double t = 0.0; t > -50.0; t -= 0.01)
        if (R(t) < 0.0) { lo = t; hi = t + 0.01; break; }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (R(mid) < 0.0 ? lo : hi) = mid;
    }
    const auto sol = solve_minimal(m, DivergenceFamily::entropy());
    EXPECT_NEAR(sol.theta_star, 0.5 * (lo + hi), 1e-9);
    EXPECT_LT(std::abs(sol.diagnostics.residual), 1e-10);
    EXPECT_EQ(sol.beta_star, sol.theta_star);
}

TEST(Solve, PureJumpEntropyClosedForm) {
    // c = 0: b + e^theta - ln 2 = 0.
    const double b = 0.2;
    LevyTriplet m{b, 0.0, LevyMeasure::atoms({{kLn2, 1.0}})};
    const auto sol = solve_minimal(m, DivergenceFamily::entropy());
    EXPECT_EQ(sol.beta_star, 0.0);
    EXPECT_NEAR(sol.theta_star, std::log(kLn2 - b), 1e-10);
}

TEST(Solve, MertonResidualByIndependentQuadrature) {
    const double lam = 1.0, mu = -0.1, s = 0.15, c = 0.04;
    for (auto [b, fam] : {std::pair{-0.03, DivergenceFamily::entropy()},
                          std::pair{-0.03, DivergenceFamily::log()},
                          std::pair{-0.03, DivergenceFamily::power(-3.0)},
                          std::pair{-0.06, DivergenceFamily::power(0.0)}}) {
        SCOPED_TRACE(to_string(fam.kind()));
        LevyTriplet m{b, c, LevyMeasure::merton(lam, mu, s)};
        MinimalMeasureSolution sol = [&] {
            try {
                return solve_minimal(m, fam);
            } catch (const Error& e) {
                ADD_FAILURE() << e.what();
                throw;
            }
        }();
        const YFunction& Y = sol.Y_star;
        const double jumps = simpson(
            [&](double y) { return (std::expm1(y) * Y(y) - h(y)) * merton_density(y, lam, mu, s); },
            mu - 20 * s, mu + 20 * s);
        EXPECT_NEAR(b + 0.5 * c + c * sol.beta_star + jumps, 0.0, 1e-9);
        EXPECT_LT(std::abs(sol.diagnostics.residual), 1e-10);
        EXPECT_TRUE(sol.diagnostics.hellinger_finite);
        EXPECT_TRUE(sol.diagnostics.integrability_finite);
        EXPECT_TRUE(sol.diagnostics.tail_finite);
        EXPECT_TRUE(sol.diagnostics.implication_holds);
    }
}

TEST(Solve, KouRegime) {
    const double lam = 1.0, p = 0.4, eu = 12.0, ed = 8.0, b = -0.015, c = 0.04;
    LevyTriplet m{b, c, LevyMeasure::kou(lam, p, eu, ed)};
    auto dens = [&](double y) {
        return y > 0 ? lam * p * eu * std::exp(-eu * y) : lam * (1 - p) * ed * std::exp(ed * y);
    };
    for (auto fam : {DivergenceFamily::entropy(), DivergenceFamily::log(), DivergenceFamily::power(-3.0)}) {
        SCOPED_TRACE(to_string(fam.kind()));
        const auto sol = solve_minimal(m, fam);
        const YFunction& Y = sol.Y_star;
        auto g = [&](double y) { return (std::expm1(y) * Y(y) - h(y)) * dens(y); };
        const double jumps = simpson(g, -8.0, 8.0);
        EXPECT_NEAR(b + 0.5 * c + c * sol.beta_star + jumps, 0.0, 1e-9);
        EXPECT_LT(std::abs(sol.diagnostics.residual), 1e-10);
    }
}

TEST(Solve, EquivalenceFailureBeyondPositivity) {
    LevyTriplet m{1.0, 0.04, LevyMeasure::atoms({{kLn2, 1.0}})};
    EXPECT_THROW(solve_minimal(m, DivergenceFamily::power(0.0)), EquivalenceFailure);
}

TEST(Solve, NoRootPureJump) {
    // c = 0: clipped Y only removes the atom, residual stays b - ln 2 > 0.
    LevyTriplet m{1.0, 0.0, LevyMeasure::atoms({{kLn2, 1.0}})};
    EXPECT_THROW(solve_minimal(m, DivergenceFamily::power(0.0)), NoRoot);
}

TEST(Solve, NoRootEntropySameSignJumps) {
    // All jumps up, no diffusion, b - int h dnu > 0: no martingale measure at all.
    LevyTriplet m{1.0, 0.0, LevyMeasure::atoms({{0.2, 1.0}, {0.5, 1.0}})};
    EXPECT_THROW(solve_minimal(m, DivergenceFamily::entropy()), NoRoot);
}

TEST(Solve, LogFamilyMertonLargeDriftFails) {
    LevyTriplet m{1.0, 0.04, LevyMeasure::merton(1.0, -0.1, 0.15)};
    EXPECT_THROW(solve_minimal(m, DivergenceFamily::log()), EquivalenceFailure);
}

TEST(Solve, PowerMertonPositiveExcessFails) {
    LevyTriplet m{0.1, 0.04, LevyMeasure::merton(1.0, -0.1, 0.15)};
    EXPECT_THROW(solve_minimal(m, DivergenceFamily::power(0.0)), EquivalenceFailure);
}

TEST(Solve, ResidualIncreasingInTheta) {
    LevyTriplet m{-0.03, 0.04, LevyMeasure::merton(1.0, -0.1, 0.15)};
    for (auto fam : {DivergenceFamily::entropy(), DivergenceFamily::log(), DivergenceFamily::power(-3.0)}) {
        const auto sol = solve_minimal(m, fam);
        double prev = -1e300;
        for (int i = -10; i <= 10; ++i) {
            const double th = sol.theta_star + 0.05 * std::abs(sol.theta_star) * i;
            const double r = theta_residual(m, fam, th);
            EXPECT_GT(r, prev);
            prev = r;
        }
    }
}

TEST(Solve, AffineSlackBitIdentical) {
    LevyTriplet m{-0.015, 0.04, LevyMeasure::kou(1.0, 0.4, 12.0, 8.0)};
    for (double gamma : {-3.0, -2.0, -1.0}) {
        const auto a = solve_minimal(m, DivergenceFamily::with_slack(gamma, 1.0, 0.0, 0.0));
        const auto b = solve_minimal(m, DivergenceFamily::with_slack(gamma, 4.5, -2.0, 7.0));
        const auto c = solve_minimal(m, DivergenceFamily::from_curvature(gamma, 0.3));
        EXPECT_EQ(std::memcmp(&a.beta_star, &b.beta_star, sizeof(double)), 0);
        EXPECT_EQ(std::memcmp(&a.theta_star, &c.theta_star, sizeof(double)), 0);
        for (double y : {-0.5, -0.1, 0.05, 0.3}) {
            EXPECT_EQ(a.Y_star(y), b.Y_star(y));
            EXPECT_EQ(a.Y_star(y), c.Y_star(y));
        }
    }
}

TEST(Moments, BlackScholes) {
    const auto sol = solve_minimal(bs(0.1, 0.04), DivergenceFamily::power(0.0));
    EXPECT_NEAR(moment_exponent(sol, 2.0), 0.36, 1e-14);
    EXPECT_EQ(moment_exponent(sol, 1.0), 0.0);
    EXPECT_EQ(moment_exponent(sol, 0.0), 0.0);
    EXPECT_NEAR(divergence_value(sol, DivergenceFamily::power(0.0), 1.0), std::exp(0.36), 1e-13);
    const auto ent = solve_minimal(bs(0.1, 0.04), DivergenceFamily::entropy());
    EXPECT_NEAR(divergence_value(ent, DivergenceFamily::entropy(), 1.0), 0.18, 1e-14);
}

TEST(Moments, AtomHandFormula) {
    const double b = 0.05, c = 0.04;
    LevyTriplet m{b, c, LevyMeasure::atoms({{kLn2, 1.0}, {-0.3, 0.5}})};
    const auto sol = solve_minimal(m, DivergenceFamily::entropy());
    const double th = sol.theta_star;
    const double q = 2.5;
    double expected = 0.5 * q * (q - 1) * th * th * c;
    for (auto [y, w] : {std::pair{kLn2, 1.0}, std::pair{-0.3, 0.5}}) {
        const double Y = std::exp(th * std::expm1(y));
        expected += w * (std::pow(Y, q) - 1 - q * (Y - 1));
    }
    EXPECT_NEAR(moment_exponent(sol, q), expected, 1e-14);
}

TEST(Moments, TimeLinearity) {
    LevyTriplet m{-0.03, 0.04, LevyMeasure::merton(1.0, -0.1, 0.15)};
    for (auto fam : {DivergenceFamily::entropy(), DivergenceFamily::log()}) {
        const auto sol = solve_minimal(m, fam);
        EXPECT_NEAR(divergence_value(sol, fam, 2.0), 2.0 * divergence_value(sol, fam, 1.0), 1e-15);
    }
    const auto pw = DivergenceFamily::power(-3.0);
    const auto sol = solve_minimal(m, pw);
    const double v1 = divergence_value(sol, pw, 1.0), v2 = divergence_value(sol, pw, 2.0);
    EXPECT_NEAR(std::log(v2 / pw.c_gamma()), 2.0 * std::log(v1 / pw.c_gamma()), 1e-13);
}

TEST(Validate, UnitY) {
    LevyTriplet m{0.0, 0.04, LevyMeasure::merton(1.0, 0.0, 0.1)};
    const auto d = validate(m, 0.0, YFunction(DivergenceFamily::entropy(), 0.0));
    EXPECT_EQ(d.hellinger, 0.0);
    EXPECT_EQ(d.integrability, 0.0);
    EXPECT_TRUE(d.equivalence_ok);
    EXPECT_TRUE(d.failure.empty());
}

TEST(Validate, LogFamilyNonpositiveAtAtom) {
    LevyTriplet m{0.0, 0.04, LevyMeasure::atoms({{kLn2, 1.0}})};
    // 1 - theta (e^{ln2} - 1) = 1 - 2 < 0.
    const auto d = validate(m, 0.0, YFunction(DivergenceFamily::log(), 2.0));
    EXPECT_FALSE(d.positive);
    EXPECT_FALSE(d.equivalence_ok);
    EXPECT_EQ(d.failure, "positivity");
}

TEST(Validate, EntropyMertonImplication) {
    LevyTriplet m{-0.03, 0.04, LevyMeasure::merton(1.0, -0.1, 0.15)};
    const auto sol = solve_minimal(m, DivergenceFamily::entropy());
    const auto& d = sol.diagnostics;
    EXPECT_TRUE(d.tail_finite);
    EXPECT_TRUE(d.hellinger_finite);
    EXPECT_TRUE(d.implication_holds);
    const YFunction& Y = sol.Y_star;
    const double hel = simpson(
        [&](double y) {
            const double r = std::sqrt(Y(y)) - 1.0;
            return r * r * merton_density(y, 1.0, -0.1, 0.15);
        },
        -3.1, 2.9);
    EXPECT_NEAR(d.hellinger, hel, 1e-12);
}
