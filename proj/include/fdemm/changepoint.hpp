#pragma once

#include <functional>
#include <vector>

#include "fdemm/divergence.hpp"
#include "fdemm/girsanov.hpp"
#include "fdemm/levy.hpp"

namespace fdemm {

struct TauAtom {
    double t;
    double p;
};

/// Law of the change-point on [0, T]: atoms plus a nonnegative piecewise-linear
/// density on a uniform grid. An atom at T means "no change before the horizon".
class TauLaw {
public:
    /// `density` holds values at the n+1 grid nodes (empty for atoms only).
    TauLaw(double horizon, std::vector<TauAtom> atoms, std::vector<double> density);

    /// Uniform density carrying whatever mass the atoms leave over.
    static TauLaw uniform(double horizon, std::vector<TauAtom> atoms = {}, int cells = 512);
    /// Node values rescaled so that atoms + density have total mass 1.
    static TauLaw from_samples(double horizon, std::vector<TauAtom> atoms, std::vector<double> values);

    double horizon() const { return horizon_; }
    const std::vector<TauAtom>& atoms() const { return atoms_; }
    const std::vector<double>& density() const { return density_; }
    int cells() const { return density_.empty() ? 0 : static_cast<int>(density_.size()) - 1; }
    double node(int k) const { return horizon_ * k / cells(); }
    double density_at(double t) const;
    double density_mass() const;
    double atom_mass() const;

    /// int g d alpha: atoms summed exactly, density cells by Romberg.
    double integrate(const std::function<double(double)>& g, double rel_tol = 1e-13) const;

    double cdf(double t) const;
    /// Inverse CDF; atoms are returned exactly.
    double quantile(double u) const;

private:
    double horizon_;
    std::vector<TauAtom> atoms_;    // sorted by t
    std::vector<double> density_;
    std::vector<double> cum_nodes_; // density mass on [0, node k]
};

struct ChangePointSpec {
    LevyTriplet pre;
    LevyTriplet post;
    double horizon;
    TauLaw tau;
    DivergenceFamily family;
    MinimalMeasureSolution sol_pre;
    MinimalMeasureSolution sol_post;

    /// Validates, applies the local-equivalence gate and solves both regimes.
    static ChangePointSpec build(const LevyTriplet& pre, const LevyTriplet& post, const TauLaw& tau,
                                 const DivergenceFamily& family, const SolverOptions& opts = {});

    /// Same regimes and tau law, family slack replaced (no re-solve needed).
    ChangePointSpec with_family(const DivergenceFamily& fam) const;
};

/// Rejects regime pairs whose laws are not locally equivalent.
void check_local_equivalence(const LevyTriplet& pre, const LevyTriplet& post);

/// E[z*_T(t)^q] = exp(t k_pre(q) + (T - t) k_post(q)).
double z_moment(const ChangePointSpec& spec, double t, double q);
/// E[z*_T(t) ln z*_T(t)] and E[-ln z*_T(t)].
double entropy_term(const ChangePointSpec& spec, double t);
double log_term(const ChangePointSpec& spec, double t);

/// lambda_t(c) = E[z*_T(t) f'(c z*_T(t))].
double lambda_t(const ChangePointSpec& spec, double t, double c);
/// Closed-form inverse of lambda_t in c; RangeError outside its range.
double c_t_inverse(const ChangePointSpec& spec, double t, double lambda);
/// Same inverse by bracketing + Brent on lambda_t (right-continuous sup form).
double c_t_inverse_numeric(const ChangePointSpec& spec, double t, double lambda);

enum class ScalingMethod { ClosedForm, GeneralRoot };

struct ScalingProfile {
    double horizon = 0.0;
    // c*(t) = exp(log_slope * t - log_norm) for the canonical families.
    double log_slope = 0.0;
    double log_norm = 0.0;
    double lambda_star = 0.0;
    bool lambda_closed_form = true;
    double normalization_residual = 0.0;
    std::vector<double> grid_t;
    std::vector<double> grid_c;
    std::vector<double> atom_t;
    std::vector<double> atom_c;

    double operator()(double t) const;
};

ScalingProfile scaling_profile(const ChangePointSpec& spec,
                               ScalingMethod method = ScalingMethod::ClosedForm);

/// Path quantities needed for the terminal density of the pasted measure.
struct PathStatistics {
    double tau;
    double zeta_tau;          // zeta_{tau ^ T}
    double zeta_tilde_ratio;  // zeta~_T / zeta~_tau (1 if tau = T)
};

/// Density c(tau) z_T of an EMM of the change-point model, for a scaling
/// function with E c(tau) = 1 (checked once at construction).
class ScaledDensity {
public:
    ScaledDensity(const TauLaw& tau, std::function<double(double)> cfun, double tol = 1e-10);
    double terminal(const PathStatistics& s) const;
    double scale(double t) const { return cfun_(t); }

private:
    std::function<double(double)> cfun_;
};

double emm_density_terminal(const TauLaw& tau, const std::function<double(double)>& cfun,
                            const PathStatistics& s);

/// F(c) = int E[f(c(t) z*_T(t))] d alpha(t) in closed form.
double f_divergence_of_scaling(const ChangePointSpec& spec, const std::function<double(double)>& cfun);
/// E[f(c z*_T(t))] for a constant c.
double expected_f(const ChangePointSpec& spec, double t, double c);

}  // namespace fdemm
