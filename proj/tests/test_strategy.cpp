#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "fdemm/errors.hpp"
#include "fdemm/strategy.hpp"

using namespace fdemm;

namespace {

LevyTriplet bs(double b, double c) { return {b, c, LevyMeasure::none()}; }

ChangePointSpec bs_spec(const DivergenceFamily& fam, TauLaw tau = TauLaw::uniform(1.0)) {
    return ChangePointSpec::build(bs(0.1, 0.04), bs(-0.1, 0.04), tau, fam);
}

ChangePointSpec merton_spec(const DivergenceFamily& fam) {
    const auto nu = LevyMeasure::merton(1.0, -0.1, 0.15);
    return ChangePointSpec::build({-0.03, 0.04, nu}, {-0.02, 0.04, nu},
                                  TauLaw::uniform(1.0, {{1.0, 0.2}}, 128), fam);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// Families with the slack needed for a positive lambda at x = 1.
std::vector<DivergenceFamily> families() {
    return {DivergenceFamily::entropy(), DivergenceFamily::log(),
            DivergenceFamily::with_slack(0.0, 1.0, -2.0, 0.0),
            DivergenceFamily::with_slack(-0.5, 1.0, -2.0, 0.0),
            DivergenceFamily::power(-3.0)};
}

// Simpson on [-12, 12] against the standard normal density.
template <class G>
double gauss_expect(G g) {
    const int n = 4000;
    const double lo = -12.0, h = 24.0 / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * g(x) * std::exp(-0.5 * x * x);
    }
    return s * h / 3.0 / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST(Calibrate, LogUtility) {
    const auto spec = bs_spec(conjugate_of_utility(UtilitySpec::log()));
    EXPECT_NEAR(calibrate_lambda(spec, UtilitySpec::log(), 5.0), 0.2, 1e-15);
    EXPECT_THROW(make_wealth_problem(spec, UtilitySpec::log(), -1.0), DomainError);
    EXPECT_THROW(make_wealth_problem(spec, UtilitySpec::exponential(), 1.0), DomainError);
}

TEST(Calibrate, ExponentialTrivialMarket) {
    const auto fam = conjugate_of_utility(UtilitySpec::exponential());
    const auto spec = ChangePointSpec::build(bs(-0.02, 0.04), bs(-0.02, 0.04), TauLaw::uniform(1.0), fam);
    EXPECT_NEAR(calibrate_lambda(spec, UtilitySpec::exponential(), 2.0), std::exp(-2.0), 1e-15);
}

TEST(Calibrate, PowerUtilityIdenticalRegimes) {
    // p = 1/2: f(y) = 1/y, f' = -y^-2, so lambda^2 x = E[Z^-1] = exp(T (-1)(-2)/2 c theta^2).
    const auto u = UtilitySpec::power(0.5);
    const auto spec = ChangePointSpec::build(bs(0.1, 0.04), bs(0.1, 0.04), TauLaw::uniform(1.0),
                                             conjugate_of_utility(u));
    const double M = std::exp(0.04 * 9.0);
    EXPECT_NEAR(calibrate_lambda(spec, u, 3.0), std::sqrt(M / 3.0), 1e-12);
}

TEST(Calibrate, IdentityHoldsForEveryFamily) {
    // E_Q[-f'(lambda Z)] = x, evaluated through the tau mixture with the scaling c*.
    for (const auto& fam : families()) {
        const auto spec = bs_spec(fam);
        const auto p = make_wealth_problem(spec, 1.0);
        const double g = fam.gamma();
        double lhs = 0.0;
        if (fam.kind() == FamilyKind::Log) {
            lhs = fam.A() / p.lambda - fam.B();
        } else if (fam.kind() == FamilyKind::Entropy) {
            lhs = -(fam.A() * (std::log(p.lambda) + 1.0 + p.mean_log_Q) + fam.B());
        } else {
            const double m = spec.tau.integrate([&](double t) {
                return std::pow(p.profile(t), g + 2.0) * z_moment(spec, t, g + 2.0);
            });
            lhs = -(fam.A() * (g + 2.0) * fam.c_gamma() * std::pow(p.lambda, g + 1.0) * m + fam.B());
        }
        EXPECT_NEAR(lhs, 1.0, 1e-10) << to_string(fam.kind()) << " " << g;
    }
}

TEST(Calibrate, InfeasibleCapitalIsRangeError) {
    EXPECT_THROW(make_wealth_problem(bs_spec(DivergenceFamily::power(0.0)), 1.0), RangeError);
    EXPECT_THROW(make_wealth_problem(bs_spec(DivergenceFamily::log()), -1.0), RangeError);
}

TEST(Xi, ClosedFormMatchesGaussianQuadrature) {
    const auto fam = DivergenceFamily::from_curvature(0.5, 2.0);
    const auto spec = ChangePointSpec::build(bs(0.1, 0.04), bs(0.1, 0.04), TauLaw::uniform(1.0), fam);
    const double theta = -3.0, c = 0.04;
    for (double t : {0.0, 0.3, 0.8}) {
        const double s = 1.0 - t;
        for (double x : {0.5, 2.0}) {
            const double oracle = gauss_expect([&](double z) {
                const double eta = std::exp(theta * std::sqrt(c * s) * z - 0.5 * theta * theta * c * s);
                return eta * eta * fam.f_second(x * eta);
            });
            EXPECT_NEAR(xi(spec, 0.5, t, x), oracle, 1e-10 * oracle);
        }
    }
}

TEST(Xi, Examples) {
    const auto quad = bs_spec(DivergenceFamily::from_curvature(0.0, 3.0));
    EXPECT_NEAR(xi(quad, 0.5, 0.2, 7.0), 3.0 * eta_moment(quad, 0.5, 0.2, 2.0), 1e-14);
    EXPECT_EQ(xi(quad, 0.5, 1.0, 7.0), 3.0);
    const auto ent = bs_spec(DivergenceFamily::entropy());
    EXPECT_EQ(xi(ent, 0.2, 0.5, 4.0), 0.25);
}

TEST(OptimalPhi, BlackScholesExponentialClosedForm) {
    const auto u = UtilitySpec::exponential();
    const auto spec = bs_spec(conjugate_of_utility(u));
    const auto p = make_wealth_problem(spec, u, 1.0);
    for (double t : {0.0, 0.25, 0.7}) {
        for (double Z : {0.3, 1.0, 2.5}) {
            EXPECT_NEAR(optimal_phi(spec, p, {t, Side::Pre, 0.9, 100.0, Z}), 0.12 / (0.04 * 100.0), 1e-12);
            EXPECT_NEAR(optimal_phi(spec, p, {t, Side::Post, 0.1, 100.0, Z}), -0.08 / (0.04 * 100.0), 1e-12);
        }
    }
}

TEST(OptimalPhi, MartingaleRegimesGiveZero) {
    const auto spec = ChangePointSpec::build(bs(-0.02, 0.04), bs(-0.02, 0.04), TauLaw::uniform(1.0),
                                             DivergenceFamily::log());
    const auto p = make_wealth_problem(spec, 1.0);
    EXPECT_EQ(optimal_phi(spec, p, {0.3, Side::Pre, 0.5, 1.0, 1.0}), 0.0);
    EXPECT_EQ(coro1_phi(spec, p, {0.7, Side::Post, 0.5, 1.0, 1.0}), 0.0);
    EXPECT_EQ(pasted_strategy_factors(spec, p, 0.5), std::make_pair(1.0, 1.0));
}

TEST(Coro1, AgreesWithOptimalOnStateGrid) {
    std::vector<ChangePointSpec> specs;
    for (const auto& fam : families()) specs.push_back(bs_spec(fam));
    specs.push_back(merton_spec(DivergenceFamily::entropy()));
    specs.push_back(merton_spec(DivergenceFamily::log()));
    for (const auto& spec : specs) {
        const auto p = make_wealth_problem(spec, 1.0);
        for (int i = 0; i < 100; ++i) {
            const double t = 0.01 * i;
            const double tau = std::fmod(0.37 + 0.61 * i, 1.0);
            const StrategyState s{t, tau > t ? Side::Pre : Side::Post, tau, 0.5 + 0.02 * i, 0.2 + 0.03 * i};
            const double a = optimal_phi(spec, p, s);
            EXPECT_LE(rel(coro1_phi(spec, p, s), a), 1e-10) << to_string(spec.family.kind()) << " i=" << i;
        }
    }
}

TEST(Pasting, FactorsReproduceOptimalStrategy) {
    for (const auto& fam : families()) {
        const auto spec = bs_spec(fam);
        const auto p = make_wealth_problem(spec, 1.0);
        for (double tau : {0.15, 0.5, 0.85}) {
            const double c = p.profile(tau);
            for (double t : {0.0, 0.1, 0.6, 0.95}) {
                const double S = 1.3;
                if (t < tau) {
                    const double zeta = 0.7;
                    const auto [B, Bt] = pasted_strategy_factors(spec, p, tau);
                    const double lhs = optimal_phi(spec, p, {t, Side::Pre, tau, S, c * zeta});
                    const double rhs = B * single_regime_phi(spec.sol_pre, fam, 1.0, t, S, zeta);
                    EXPECT_LE(rel(lhs, rhs), 1e-10);
                } else {
                    const double zeta_tau = 0.8, ratio = 1.4;  // zeta~_t / zeta~_tau
                    const auto [B, Bt] = pasted_strategy_factors(spec, p, tau, zeta_tau);
                    const double lhs = optimal_phi(spec, p, {t, Side::Post, tau, S, c * zeta_tau * ratio});
                    const double rhs = Bt * single_regime_phi(spec.sol_post, fam, 1.0, t, S, ratio);
                    EXPECT_LE(rel(lhs, rhs), 1e-10);
                }
            }
        }
    }
}

TEST(Pasting, IdenticalRegimesFactor) {
    const auto fam = DivergenceFamily::with_slack(0.0, 1.0, -2.0, 0.0);
    const auto spec = ChangePointSpec::build(bs(0.1, 0.04), bs(0.1, 0.04), TauLaw::uniform(1.0), fam);
    const auto p = make_wealth_problem(spec, 1.0);
    // zeta^2 moments: exp(rate tau) exp(rate (T - tau)) / E[Z^2], rate = c theta^2.
    const double rate = 0.04 * 9.0;
    const auto [B, Bt] = pasted_strategy_factors(spec, p, 0.3);
    EXPECT_NEAR(B, std::exp(rate * 0.3) * std::exp(rate * 0.7) / std::exp(rate), 1e-12);
    EXPECT_NEAR(Bt, std::exp(rate) / std::exp(rate), 1e-12);
}

TEST(Pasting, ExponentialUtilityIsExactlyOne) {
    const auto u = UtilitySpec::exponential();
    const auto spec = bs_spec(conjugate_of_utility(u));
    const auto p = make_wealth_problem(spec, u, 0.5);
    EXPECT_EQ(pasted_strategy_factors(spec, p, 0.4, 3.0), std::make_pair(1.0, 1.0));
    // Only the side matters, not the value of tau or Z.
    const double a = optimal_phi(spec, p, {0.2, Side::Pre, 0.3, 1.1, 0.5});
    EXPECT_EQ(a, optimal_phi(spec, p, {0.2, Side::Pre, 0.9, 1.1, 2.0}));
    EXPECT_EQ(a, single_regime_phi(spec.sol_pre, spec.family, 0.5, 0.2, 1.1, 0.5));
}

TEST(PureJump, AlphaStarIsIndependentOfY0) {
    const LevyTriplet atoms{-0.3, 0.0, LevyMeasure::atoms({{std::log(2.0), 1.0}, {-0.3, 0.5}})};
    const LevyTriplet kou{-0.015, 0.0, LevyMeasure::kou(1.0, 0.4, 12.0, 8.0)};
    const LevyTriplet kou_ent{-0.005, 0.0, LevyMeasure::kou(1.0, 0.4, 12.0, 8.0)};
    for (const auto& fam : {DivergenceFamily::entropy(), DivergenceFamily::log(), DivergenceFamily::power(-3.0),
                            DivergenceFamily::power(0.0)}) {
        int solved = 0;
        for (const auto& m : {atoms, kou, kou_ent}) {
            std::optional<MinimalMeasureSolution> found;
            try {
                found.emplace(solve_minimal(m, fam));
            } catch (const EquivalenceFailure&) {
                continue;
            } catch (const NoRoot&) {
                continue;
            } catch (const DivergentIntegral&) {
                continue;
            }
            const auto& sol = *found;
            ++solved;
            const bool at = m.nu.kind() == JumpKind::Atoms;
            const double y0 = default_y0(m.nu);
            const double y1 = at ? m.nu.atom_list()[1].size : -0.1;
            const double a0 = regime_slope(sol, y0);
            EXPECT_NEAR(regime_slope(sol, y1), a0, 1e-10);
            EXPECT_NEAR(a0, sol.theta_star, 1e-10);
        }
        EXPECT_GT(solved, 0) << to_string(fam.kind());
    }
}

TEST(PureJump, DefaultY0Rule) {
    EXPECT_EQ(default_y0(LevyMeasure::atoms({{0.5, 1.0}, {-0.2, 1.0}})), -0.2);
    EXPECT_EQ(default_y0(LevyMeasure::merton(1.0, 0.0, 0.1)), 0.1);
}

TEST(Invariance, ConstantSlackLeavesEverythingBitIdentical) {
    const auto base = DivergenceFamily::with_slack(-0.5, 1.0, -2.0, 0.0);
    const auto spec = bs_spec(base);
    const auto moved = spec.with_family(base.reslacked(1.0, -2.0, 5.0));
    const auto p = make_wealth_problem(spec, 1.0);
    const auto q = make_wealth_problem(moved, 1.0);
    EXPECT_EQ(p.lambda, q.lambda);
    const StrategyState s{0.3, Side::Pre, 0.6, 1.2, 0.9};
    EXPECT_EQ(optimal_phi(spec, p, s), optimal_phi(moved, q, s));
    EXPECT_EQ(coro1_phi(spec, p, s), coro1_phi(moved, q, s));
}

TEST(Invariance, UtilityScaleLeavesStrategyUnchanged) {
    // k u has conjugate k f(y / k): the slack moves, the optimal strategy does not.
    const double k = 3.7;
    struct Case {
        DivergenceFamily f, fk;
    };
    const std::vector<Case> cases{
        {conjugate_of_utility(UtilitySpec::exponential()),
         DivergenceFamily::with_slack(-1.0, 1.0, -1.0 - std::log(k), k)},
        {conjugate_of_utility(UtilitySpec::log()), DivergenceFamily::with_slack(-2.0, k, 0.0, k * std::log(k) - k)},
        {conjugate_of_utility(UtilitySpec::power(0.5)), DivergenceFamily::with_slack(-3.0, k * k, 0.0, 0.0)},
    };
    for (const auto& cs : cases) {
        for (double y : {0.3, 1.7}) EXPECT_NEAR(cs.fk.f(y), k * cs.f.f(y / k), 1e-12 * k);
        const auto spec = bs_spec(cs.f);
        const auto scaled = spec.with_family(cs.fk);
        const auto p = make_wealth_problem(spec, 1.0);
        const auto q = make_wealth_problem(scaled, 1.0);
        for (const StrategyState& s : {StrategyState{0.2, Side::Pre, 0.5, 1.1, 0.8},
                                       StrategyState{0.7, Side::Post, 0.5, 0.9, 1.3}}) {
            EXPECT_EQ(coro1_phi(spec, p, s), coro1_phi(scaled, q, s));
            EXPECT_LE(rel(optimal_phi(scaled, q, s), optimal_phi(spec, p, s)), 1e-12);
        }
    }
}
