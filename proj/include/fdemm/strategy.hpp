#pragma once

#include <optional>
#include <utility>

#include "fdemm/changepoint.hpp"
#include "fdemm/divergence.hpp"

namespace fdemm {

enum class Side { Pre, Post };

const char* to_string(Side s);

/// Utility problem on a ChangePointSpec whose family is the utility's conjugate.
struct WealthProblem {
    std::optional<UtilitySpec> utility;  // empty when built from the family alone
    double x = 0.0;          // initial capital
    double lambda = 0.0;     // calibrated multiplier
    double moment_M = 1.0;   // E[Z*_T^{gamma+2}] (1 for gamma = -1)
    double mean_log_Q = 0.0; // E_{Q*}[ln Z*_T] (entropy family only)
    ScalingProfile profile;
};

/// Strategy evaluation point. tau is known to the strategy (initially
/// enlarged information); side says which regime drives the interval
/// starting at t.
struct StrategyState {
    double t;
    Side side;
    double tau;
    double S_minus;
    double Z_minus;  // Z*_{t-}(tau)
};

/// E[Z*_T^{gamma+2}] and E_{Q*}[ln Z*_T] under the scaling c*.
double mixture_moment(const ChangePointSpec& spec, const ScalingProfile& prof, double q);
double mean_log_density_Q(const ChangePointSpec& spec, const ScalingProfile& prof);

/// lambda with E_{Q*}[-f'(lambda Z*_T)] = x, closed form per family.
/// RangeError if no positive lambda reaches x.
double calibrate_lambda(const ChangePointSpec& spec, const ScalingProfile& prof, double x);

/// Same, for a utility whose conjugate must equal spec.family.
double calibrate_lambda(const ChangePointSpec& spec, const UtilitySpec& utility, double x);

/// Builds the problem; spec.family must be the conjugate of `utility`.
WealthProblem make_wealth_problem(const ChangePointSpec& spec, const UtilitySpec& utility, double x);
/// Builds the problem straight from spec.family (any slack).
WealthProblem make_wealth_problem(const ChangePointSpec& spec, double x);

/// E[eta_{T-t}(u)^q] with eta = z*_T(u) / z*_t(u).
double eta_moment(const ChangePointSpec& spec, double u, double t, double q);

/// xi^{(u)}_t(x) = E[eta^2 f''(x eta)] = a x^gamma E[eta^{gamma+2}].
double xi(const ChangePointSpec& spec, double u, double t, double x);

/// Girsanov slope driving the strategy in a regime: beta* if c != 0, else
/// alpha* = e^{-y0} Y*(y0)^gamma Y*'(y0) at y0.
double regime_slope(const MinimalMeasureSolution& sol, double y0);
/// Deterministic y0: the atom nearest 0, or 0.1 for jump densities.
double default_y0(const LevyMeasure& nu);
double regime_slope(const MinimalMeasureSolution& sol);

/// phi*_t = -lambda beta*_t(tau) Z*_{t-} xi^{(tau)}_t(lambda Z*_{t-}) / S_{t-}.
double optimal_phi(const ChangePointSpec& spec, const WealthProblem& prob, const StrategyState& s);

/// alpha_gamma(x) = a - (gamma+1)(x + f'(1)), evaluated after cancellation:
/// A for gamma = -1, -(gamma+1)(x + B) otherwise.
double alpha_gamma(const DivergenceFamily& fam, double x);

/// phi*_t = -A_t(tau) beta*_t(tau) Z*_{t-}^{gamma+1} / S_{t-},
/// A_t(tau) = alpha_gamma(x) E[eta^{gamma+2} | tau] / E[Z*_T^{gamma+2}].
double coro1_phi(const ChangePointSpec& spec, const WealthProblem& prob, const StrategyState& s);

/// Single-regime optimal strategy psi*_t = -alpha_gamma(x) beta zeta_{t-}^{gamma+1} / (e^{t k} S_{t-}),
/// k = A^{(gamma+2)}/T of the regime.
double single_regime_phi(const MinimalMeasureSolution& sol, const DivergenceFamily& fam, double x,
                         double t, double S_minus, double zeta_minus);

/// Factors (B, B~) with phi* = B psi* on {tau > t} and B~ psi~* on {tau <= t}.
/// zeta_ratio_at_tau = zeta_tau / zeta~_tau for the B~ factor.
std::pair<double, double> pasted_strategy_factors(const ChangePointSpec& spec, const WealthProblem& prob,
                                                  double tau, double zeta_ratio_at_tau = 1.0);

}  // namespace fdemm
