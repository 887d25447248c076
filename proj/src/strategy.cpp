#include "fdemm/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fdemm/errors.hpp"

namespace fdemm {

const char* to_string(Side s) { return s == Side::Pre ? "pre" : "post"; }

double mixture_moment(const ChangePointSpec& spec, const ScalingProfile& prof, double q) {
    if (q == 1.0) return 1.0;
    return spec.tau.integrate([&](double t) { return std::pow(prof(t), q) * z_moment(spec, t, q); });
}

double mean_log_density_Q(const ChangePointSpec& spec, const ScalingProfile& prof) {
    // E_P[Z ln Z] = int c (ln c + E[z ln z]) d alpha.
    return spec.tau.integrate([&](double t) {
        const double c = prof(t);
        return c * (std::log(c) + entropy_term(spec, t));
    });
}

double calibrate_lambda(const ChangePointSpec& spec, const ScalingProfile& prof, double x) {
    const DivergenceFamily& f = spec.family;
    switch (f.kind()) {
        case FamilyKind::Log: {
            if (!(x + f.B() > 0.0))
                throw RangeError("log family: x + B must be positive for lambda > 0", -f.B(), INFINITY);
            return f.A() / (x + f.B());
        }
        case FamilyKind::Entropy:
            return std::exp(-(x + f.B()) / f.A() - 1.0 - mean_log_density_Q(spec, prof));
        case FamilyKind::Power: {
            const double g = f.gamma();
            const double M = mixture_moment(spec, prof, g + 2.0);
            const double rhs = -(x + f.B()) / (f.A() * (g + 2.0) * f.c_gamma() * M);
            if (!(rhs > 0.0)) {
                std::ostringstream os;
                os << "power family: no lambda > 0 reaches x=" << x;
                throw RangeError(os.str(), -f.B(), -f.B());
            }
            return std::pow(rhs, 1.0 / (g + 1.0));
        }
    }
    return 0.0;
}

namespace {
void check_conjugate(const ChangePointSpec& spec, const UtilitySpec& utility, double x) {
    if (!(x > utility.lower_bound()) || !std::isfinite(x))
        throw DomainError("initial capital must exceed the utility's domain bound");
    const DivergenceFamily conj = conjugate_of_utility(utility);
    const DivergenceFamily& f = spec.family;
    if (conj.gamma() != f.gamma() || conj.A() != f.A() || conj.B() != f.B() || conj.C() != f.C())
        throw DomainError("spec family is not the convex conjugate of the utility");
}
}  // namespace

double calibrate_lambda(const ChangePointSpec& spec, const UtilitySpec& utility, double x) {
    check_conjugate(spec, utility, x);
    return calibrate_lambda(spec, scaling_profile(spec), x);
}

WealthProblem make_wealth_problem(const ChangePointSpec& spec, double x) {
    if (!std::isfinite(x)) throw DomainError("initial capital must be finite");
    const DivergenceFamily& f = spec.family;
    WealthProblem p{std::nullopt, x, 0.0, 1.0, 0.0, scaling_profile(spec)};
    p.moment_M = mixture_moment(spec, p.profile, f.gamma() + 2.0);
    if (f.kind() == FamilyKind::Entropy) p.mean_log_Q = mean_log_density_Q(spec, p.profile);
    p.lambda = calibrate_lambda(spec, p.profile, x);
    return p;
}

WealthProblem make_wealth_problem(const ChangePointSpec& spec, const UtilitySpec& utility, double x) {
    check_conjugate(spec, utility, x);
    WealthProblem p = make_wealth_problem(spec, x);
    p.utility = utility;
    return p;
}

double eta_moment(const ChangePointSpec& spec, double u, double t, double q) {
    const double T = spec.horizon;
    if (!(t >= 0.0 && t <= T)) throw DomainError("t outside [0, T]");
    const double kp = moment_exponent(spec.sol_pre, q);
    const double ko = moment_exponent(spec.sol_post, q);
    const double pre_time = std::max(u - t, 0.0);
    const double post_time = T - std::max(t, u);
    return std::exp(kp * pre_time + ko * post_time);
}

double xi(const ChangePointSpec& spec, double u, double t, double x) {
    if (!(x > 0.0)) throw DomainError("xi needs x > 0");
    const DivergenceFamily& f = spec.family;
    return f.f_second(x) * eta_moment(spec, u, t, f.gamma() + 2.0);
}

double default_y0(const LevyMeasure& nu) {
    if (nu.kind() == JumpKind::Atoms) return nu.atom_list().front().size;
    return 0.1;
}

double regime_slope(const MinimalMeasureSolution& sol, double y0) {
    if (sol.model.c != 0.0) return sol.beta_star;
    const YFunction& Y = sol.Y_star;
    const double g = Y.family().gamma();
    return std::exp(-y0) * std::pow(Y(y0), g) * Y.derivative(y0);
}

double regime_slope(const MinimalMeasureSolution& sol) {
    return regime_slope(sol, default_y0(sol.model.nu));
}

namespace {
const MinimalMeasureSolution& side_solution(const ChangePointSpec& spec, Side s) {
    return s == Side::Pre ? spec.sol_pre : spec.sol_post;
}

void check_state(const StrategyState& s) {
    if (!(s.S_minus > 0.0)) throw DomainError("price must be positive");
    if (!(s.Z_minus > 0.0)) throw DomainError("density must be positive");
}
}  // namespace

double optimal_phi(const ChangePointSpec& spec, const WealthProblem& prob, const StrategyState& s) {
    check_state(s);
    const double beta = regime_slope(side_solution(spec, s.side));
    if (beta == 0.0) return 0.0;
    const double lz = prob.lambda * s.Z_minus;
    return -prob.lambda * beta * s.Z_minus * xi(spec, s.tau, s.t, lz) / s.S_minus;
}

double alpha_gamma(const DivergenceFamily& fam, double x) {
    if (fam.kind() == FamilyKind::Entropy) return fam.a();
    return -(fam.gamma() + 1.0) * (x + fam.B());
}

double coro1_phi(const ChangePointSpec& spec, const WealthProblem& prob, const StrategyState& s) {
    check_state(s);
    const DivergenceFamily& f = spec.family;
    const double beta = regime_slope(side_solution(spec, s.side));
    if (beta == 0.0) return 0.0;
    const double q = f.gamma() + 2.0;
    const double At = alpha_gamma(f, prob.x) * eta_moment(spec, s.tau, s.t, q) / prob.moment_M;
    return -At * beta * std::pow(s.Z_minus, f.gamma() + 1.0) / s.S_minus;
}

double single_regime_phi(const MinimalMeasureSolution& sol, const DivergenceFamily& fam, double x,
                         double t, double S_minus, double zeta_minus) {
    if (!(S_minus > 0.0) || !(zeta_minus > 0.0)) throw DomainError("price and density must be positive");
    const double beta = regime_slope(sol);
    if (beta == 0.0) return 0.0;
    const double k = moment_exponent(sol, fam.gamma() + 2.0);
    return -alpha_gamma(fam, x) * beta * std::pow(zeta_minus, fam.gamma() + 1.0) /
           (std::exp(t * k) * S_minus);
}

std::pair<double, double> pasted_strategy_factors(const ChangePointSpec& spec, const WealthProblem& prob,
                                                  double tau, double zeta_ratio_at_tau) {
    const DivergenceFamily& f = spec.family;
    if (f.kind() == FamilyKind::Entropy) return {1.0, 1.0};
    const double g = f.gamma();
    const double cg = std::pow(prob.profile(tau), g + 1.0);
    const double B = cg * z_moment(spec, tau, g + 2.0) / prob.moment_M;
    const double ko = moment_exponent(spec.sol_post, g + 2.0);
    const double Bt = cg * std::pow(zeta_ratio_at_tau, g + 1.0) * std::exp(ko * spec.horizon) / prob.moment_M;
    return {B, Bt};
}

}  // namespace fdemm
