#pragma once

#include <map>
#include <optional>
#include <string>

#include "fdemm/divergence.hpp"
#include "fdemm/levy.hpp"

namespace fdemm {

/// Jump part of the Girsanov pair for the canonical families, parameterized
/// by the scalar theta:
///   power/log  Y(y) = (1 + (gamma+1) theta (e^y - 1))^{1/(gamma+1)}
///   entropy    Y(y) = exp(theta (e^y - 1))
/// With `clipped`, Y is 0 wherever the power base is <= 0.
class YFunction {
public:
    YFunction(const DivergenceFamily& family, double theta, bool clipped = false);

    const DivergenceFamily& family() const { return family_; }
    double theta() const { return theta_; }
    bool clipped() const { return clipped_; }

    double operator()(double y) const;
    double derivative(double y) const;
    /// 1 + (gamma+1) theta (e^y - 1); 1 for the entropy form.
    double base(double y) const;
    /// Location where base(y) = 0, if any.
    std::optional<double> zero_location() const;

    /// Smallest base value over supp(nu) (infimum for unbounded supports).
    double min_base_on(const LevyMeasure& nu) const;
    bool positive_on(const LevyMeasure& nu) const;

    /// The function as a nu-integrand, with kinks and tail growth filled in.
    Integrand as_integrand() const;
    /// Wraps g(Y(y), y) keeping kinks; tail growth supplied by the caller.
    Integrand compose(std::function<double(double, double)> g, TailGrowth lower,
                      TailGrowth upper) const;
    TailGrowth upper_growth() const;
    TailGrowth lower_growth() const;

private:
    DivergenceFamily family_;
    double theta_;
    bool clipped_;
};

struct Diagnostics {
    double residual = 0.0;
    double hellinger = 0.0;       // int (sqrt Y - 1)^2 dnu
    double integrability = 0.0;   // int [f(Y) - f(1) - f'(1)(Y - 1)] dnu
    double large_jump_tail = 0.0; // int_{|y|>=1} (e^y - 1) Y dnu
    bool positive = true;
    bool hellinger_finite = true;
    bool integrability_finite = true;
    bool tail_finite = true;
    /// Finite large-jump tail implies finite Hellinger and integrability terms.
    bool implication_holds = true;
    bool equivalence_ok = true;
    std::string failure;  // empty, or the name of the violated condition
};

struct MinimalMeasureSolution {
    LevyTriplet model;
    double beta_star = 0.0;   // 0 in the pure-jump case
    double theta_star = 0.0;  // the scalar of the Y form
    YFunction Y_star;
    Diagnostics diagnostics;
    double compensator = 0.0;     // int (Y* - 1) dnu
    double entropy_rate = 0.0;    // beta^2 c / 2 + int (Y ln Y - Y + 1) dnu
    double log_rate = 0.0;        // beta^2 c / 2 + int (-ln Y + Y - 1) dnu
    double divergence_rate = 0.0; // entropy/log rate, or A^{(gamma+2)}/T for power
    std::map<double, double> moment_rates;  // q -> A^{(q)}_T / T
};

struct SolverOptions {
    double positivity_eps = 1e-12;
    double residual_requested = 1e-12;
    double residual_accepted = 1e-10;
};

/// f-minimal EMM of one Levy regime for a canonical family. Throws NoRoot,
/// EquivalenceFailure or DivergentIntegral when it does not exist.
MinimalMeasureSolution solve_minimal(const LevyTriplet& model, const DivergenceFamily& fam,
                                     const SolverOptions& opts = {});

/// The scalar drift condition R(theta) used by the solver (beta slot = theta
/// for c != 0, 0 for c = 0).
double theta_residual(const LevyTriplet& model, const DivergenceFamily& fam, double theta,
                      bool clipped = false);

double drift_residual(const LevyTriplet& model, double beta, const YFunction& Y);

/// A^{(q)}_T / T = q(q-1) beta^2 c / 2 + int [Y^q - 1 - q (Y - 1)] dnu.
double moment_exponent(const MinimalMeasureSolution& sol, double q);

/// f(Q*_T | P_T) in closed form.
double divergence_value(const MinimalMeasureSolution& sol, const DivergenceFamily& fam, double T);

/// Validity conditions for an arbitrary Girsanov candidate (beta, Y).
Diagnostics validate(const LevyTriplet& model, double beta, const YFunction& Y);
Diagnostics validate(const MinimalMeasureSolution& sol);

}  // namespace fdemm
