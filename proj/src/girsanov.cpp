#include "fdemm/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fdemm/errors.hpp"
#include "fdemm/roots.hpp"

namespace fdemm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_entropy(const DivergenceFamily& fam) { return fam.kind() == FamilyKind::Entropy; }

// gamma + 1; -1 for the log family.
double power_k(const DivergenceFamily& fam) { return fam.gamma() + 1.0; }

// Tail growth of Y^q (q may be negative).
TailGrowth upper_growth_pow(const YFunction& Y, double q) {
    const double th = Y.theta();
    if (is_entropy(Y.family())) {
        if (th * q > 0.0) return {0.0, true};
        return {0.0, false};
    }
    const double s = power_k(Y.family()) * th;
    if (s > 0.0) return {std::max(0.0, q / power_k(Y.family())), false};
    return {0.0, false};
}

// Growth rate of ln Y on the upper tail.
double upper_growth_log(const YFunction& Y) {
    return (is_entropy(Y.family()) && Y.theta() != 0.0) ? 1.0 : 0.0;
}

TailGrowth max_growth(TailGrowth a, TailGrowth b) {
    return {std::max(a.rate, b.rate), a.super_exponential || b.super_exponential};
}

}  // namespace

YFunction::YFunction(const DivergenceFamily& family, double theta, bool clipped)
    : family_(family), theta_(theta), clipped_(clipped) {
    if (!std::isfinite(theta)) throw DomainError("theta must be finite");
}

double YFunction::base(double y) const {
    if (is_entropy(family_)) return 1.0;
    return 1.0 + power_k(family_) * theta_ * std::expm1(y);
}

double YFunction::operator()(double y) const {
    if (is_entropy(family_)) return std::exp(theta_ * std::expm1(y));
    const double b = base(y);
    if (!(b > 0.0)) return clipped_ ? 0.0 : kNaN;
    switch (family_.kind()) {
        case FamilyKind::Log: return 1.0 / b;
        default: break;
    }
    const double k = power_k(family_);
    if (k == 1.0) return b;
    return std::pow(b, 1.0 / k);
}

double YFunction::derivative(double y) const {
    if (is_entropy(family_)) return theta_ * std::exp(y) * (*this)(y);
    const double b = base(y);
    if (!(b > 0.0)) return clipped_ ? 0.0 : kNaN;
    const double k = power_k(family_);
    return theta_ * std::exp(y) * std::pow(b, 1.0 / k - 1.0);
}

std::optional<double> YFunction::zero_location() const {
    if (is_entropy(family_) || theta_ == 0.0) return std::nullopt;
    const double d = -1.0 / (power_k(family_) * theta_);
    if (!(d > -1.0)) return std::nullopt;
    return std::log1p(d);
}

double YFunction::min_base_on(const LevyMeasure& nu) const {
    if (is_entropy(family_) || nu.empty()) return 1.0;
    if (nu.kind() == JumpKind::Atoms) {
        double m = kInf;
        for (const auto& a : nu.atom_list()) m = std::min(m, base(a.size));
        return m;
    }
    const double s = power_k(family_) * theta_;
    if (s > 0.0) return 1.0 - s;
    if (s < 0.0) return -kInf;
    return 1.0;
}

bool YFunction::positive_on(const LevyMeasure& nu) const {
    if (nu.kind() == JumpKind::Atoms) {
        for (const auto& a : nu.atom_list()) {
            const double v = (*this)(a.size);
            if (!(v > 0.0) || !std::isfinite(v)) return false;
        }
        return true;
    }
    return min_base_on(nu) > 0.0;
}

TailGrowth YFunction::upper_growth() const { return upper_growth_pow(*this, 1.0); }

TailGrowth YFunction::lower_growth() const { return {}; }

Integrand YFunction::compose(std::function<double(double, double)> g, TailGrowth lower,
                             TailGrowth upper) const {
    Integrand out;
    YFunction self = *this;
    out.fn = [self, g = std::move(g)](double y) { return g(self(y), y); };
    if (auto z = zero_location()) out.kinks.push_back(*z);
    out.lower = lower;
    out.upper = upper;
    return out;
}

Integrand YFunction::as_integrand() const {
    return compose([](double v, double) { return v; }, lower_growth(), upper_growth());
}

double drift_residual(const LevyTriplet& model, double beta, const YFunction& Y) {
    return drift_residual(model, beta, Y.as_integrand());
}

double theta_residual(const LevyTriplet& model, const DivergenceFamily& fam, double theta,
                      bool clipped) {
    const YFunction Y(fam, theta, clipped);
    return drift_residual(model, model.c != 0.0 ? theta : 0.0, Y);
}

namespace {

enum class Boundary { Infinite, Positivity, Divergence };

struct Endpoint {
    double value;
    Boundary type;
    bool inclusive;
};

struct Feasible {
    Endpoint lo;
    Endpoint hi;
};

Feasible feasible_theta(const LevyTriplet& model, const DivergenceFamily& fam, double eps) {
    const Endpoint neg_inf{-kInf, Boundary::Infinite, false};
    const Endpoint pos_inf{kInf, Boundary::Infinite, false};
    const LevyMeasure& nu = model.nu;
    if (is_entropy(fam)) {
        if (nu.has_bounded_support()) return {neg_inf, pos_inf};
        // exp(theta e^y) is super-exponential for theta > 0.
        return {neg_inf, Endpoint{0.0, Boundary::Divergence, true}};
    }

    // Constraint on s = (gamma+1) theta.
    Endpoint s_lo = neg_inf;
    Endpoint s_hi = pos_inf;
    if (nu.has_bounded_support()) {
        const double dmin = std::expm1(nu.support_min());
        const double dmax = std::expm1(nu.support_max());
        if (dmax > 0.0) s_lo = {(eps - 1.0) / dmax, Boundary::Positivity, false};
        if (dmin < 0.0) s_hi = {(1.0 - eps) / (-dmin), Boundary::Positivity, false};
    } else {
        s_lo = {0.0, Boundary::Positivity, true};
        s_hi = {1.0 - eps, Boundary::Positivity, false};
        if (nu.kind() == JumpKind::Kou) {
            const double rate = 1.0 + 1.0 / power_k(fam);
            if (!(rate < nu.kou_params().eta_up)) s_hi = {0.0, Boundary::Divergence, true};
        }
    }
    const double k = power_k(fam);
    auto scaled = [k](Endpoint e) {
        e.value = std::isinf(e.value) ? e.value * (k > 0.0 ? 1.0 : -1.0) : e.value / k;
        if (e.value == 0.0) e.value = 0.0;  // no -0
        return e;
    };
    if (k > 0.0) return {scaled(s_lo), scaled(s_hi)};
    return {scaled(s_hi), scaled(s_lo)};
}

std::string describe(const LevyTriplet& m, const DivergenceFamily& fam) {
    std::ostringstream os;
    os << to_string(fam.kind()) << " family (gamma=" << fam.gamma() << "), b=" << m.b
       << ", c=" << m.c << ", jumps=" << to_string(m.nu.kind());
    return os.str();
}

[[noreturn]] void boundary_failure(const LevyTriplet& model, const DivergenceFamily& fam,
                                   const Endpoint& e, double dir) {
    const std::string who = describe(model, fam);
    if (e.type == Boundary::Infinite)
        throw NoRoot("drift condition has no root: residual keeps its sign as theta -> " +
                     std::string(dir > 0 ? "+inf" : "-inf") + " (" + who + ")");
    if (e.type == Boundary::Divergence)
        throw DivergentIntegral(
            "drift condition needs theta beyond the integrability boundary; "
            "int_{|y|>=1} (e^y-1) Y dnu diverges there (" + who + ")");

    std::ostringstream at;
    at << e.value;
    if (is_entropy(fam) || power_k(fam) < 0.0)
        throw EquivalenceFailure("drift condition is only met with Y vanishing on part of the "
                                 "jump support (positivity boundary theta=" + at.str() + "; " +
                                 who + ")");

    // Continue with Y clipped at zero: a root there is an absolutely
    // continuous, non-equivalent martingale measure.
    const double scale = std::max(1.0, std::abs(e.value));
    const double f0 = theta_residual(model, fam, e.value, true);
    for (double step = 1e-9 * scale; step < 1e12; step *= 2.0) {
        const double th = e.value + dir * step;
        double f;
        try {
            f = theta_residual(model, fam, th, true);
        } catch (const DivergentIntegral&) {
            break;
        }
        if (!std::isfinite(f)) break;
        if ((f > 0.0) != (f0 > 0.0) || f == 0.0)
            throw EquivalenceFailure("drift root lies beyond the positivity boundary theta=" +
                                     at.str() + ": Y* = 0 on part of the jump support (" +
                                     who + ")");
    }
    throw NoRoot("drift condition has no root, even allowing Y to vanish (" + who + ")");
}

}  // namespace

MinimalMeasureSolution solve_minimal(const LevyTriplet& model, const DivergenceFamily& fam,
                                     const SolverOptions& opts) {
    model.validate();

    double theta = 0.0;
    if (model.nu.empty()) {
        theta = -(model.b + 0.5 * model.c) / model.c;
    } else {
        auto R = [&](double th) { return theta_residual(model, fam, th); };
        const Feasible feas = feasible_theta(model, fam, opts.positivity_eps);
        const double f0 = R(0.0);
        if (std::abs(f0) <= opts.residual_requested) {
            theta = 0.0;
        } else {
            const double dir = f0 > 0.0 ? -1.0 : 1.0;
            const Endpoint end = dir < 0.0 ? feas.lo : feas.hi;
            double prev = 0.0;
            double fprev = f0;
            double next = 0.0;
            double fnext = f0;
            bool found = false;

            auto crosses = [&](double f) { return f == 0.0 || (f > 0.0) != (fprev > 0.0); };

            for (double step = 0.5; !found; step *= 2.0) {
                const double th = dir * step;
                const bool beyond = dir > 0.0 ? th >= end.value : th <= end.value;
                if (beyond) break;
                if (std::abs(th) > 1e12) boundary_failure(model, fam, end, dir);
                const double f = R(th);
                if (!std::isfinite(f)) boundary_failure(model, fam, end, dir);
                if (crosses(f)) {
                    next = th, fnext = f, found = true;
                } else {
                    prev = th, fprev = f;
                }
            }
            if (!found) {
                if (end.inclusive) {
                    if (end.value != prev) {
                        const double f = R(end.value);
                        if (crosses(f)) next = end.value, fnext = f, found = true;
                    }
                } else {
                    for (int j = 0; j < 80 && !found; ++j) {
                        const double th = prev + 0.5 * (end.value - prev);
                        if (th == prev) break;
                        const double f = R(th);
                        if (crosses(f)) {
                            next = th, fnext = f, found = true;
                        } else {
                            prev = th, fprev = f;
                        }
                    }
                }
                if (!found) boundary_failure(model, fam, end, dir);
            }
            roots::Options ro;
            ro.f_tol_requested = opts.residual_requested;
            ro.f_tol_accepted = opts.residual_accepted;
            theta = roots::brent(R, prev, next, fprev, fnext, ro).x;
        }
    }

    // Without jumps Y* plays no role; keep it at 1.
    MinimalMeasureSolution sol{model, model.c != 0.0 ? theta : 0.0, theta,
                               YFunction(fam, model.nu.empty() ? 0.0 : theta),
                               {}, 0.0, 0.0, 0.0, 0.0, {}};
    sol.diagnostics = validate(model, sol.beta_star, sol.Y_star);
    const Diagnostics& d = sol.diagnostics;
    if (!d.positive) throw EquivalenceFailure("solved Y* is not positive on the jump support");
    if (!d.tail_finite) throw DivergentIntegral("large-jump tail integral of Y* diverges");
    if (!(std::abs(d.residual) < opts.residual_accepted)) {
        std::ostringstream os;
        os << "drift residual " << d.residual << " above " << opts.residual_accepted;
        throw ToleranceNotMet(os.str(), std::abs(d.residual));
    }

    const YFunction& Y = sol.Y_star;
    const double diff = 0.5 * sol.beta_star * sol.beta_star * model.c;
    auto jump_term = [&](std::function<double(double, double)> g, TailGrowth up) {
        if (model.nu.empty()) return 0.0;
        return nu_integral(model, Y.compose(std::move(g), {}, up));
    };
    auto optional_rate = [&](auto&& fn) {
        try {
            return fn();
        } catch (const DivergentIntegral&) {
            return kInf;
        }
    };
    const TailGrowth yg = Y.upper_growth();
    sol.compensator = jump_term([](double v, double) { return v - 1.0; }, yg);
    sol.entropy_rate = optional_rate([&] {
        return diff + jump_term([](double v, double) { return v * std::log(v) - v + 1.0; },
                                max_growth({}, yg));
    });
    sol.log_rate = optional_rate([&] {
        return diff + jump_term([](double v, double) { return -std::log(v) + v - 1.0; },
                                max_growth({upper_growth_log(Y), false}, yg));
    });

    std::vector<double> qs{2.0};
    if (fam.kind() == FamilyKind::Power) {
        qs.push_back(fam.gamma() + 1.0);
        qs.push_back(fam.gamma() + 2.0);
    }
    for (double q : qs) {
        if (q == 0.0 || q == 1.0) continue;
        sol.moment_rates[q] = optional_rate([&] { return moment_exponent(sol, q); });
    }

    switch (fam.kind()) {
        case FamilyKind::Entropy: sol.divergence_rate = sol.entropy_rate; break;
        case FamilyKind::Log: sol.divergence_rate = sol.log_rate; break;
        case FamilyKind::Power: sol.divergence_rate = moment_exponent(sol, fam.gamma() + 2.0); break;
    }
    if (!std::isfinite(sol.divergence_rate))
        throw DivergentIntegral("divergence of the minimal measure is infinite");
    return sol;
}

double moment_exponent(const MinimalMeasureSolution& sol, double q) {
    if (q == 0.0 || q == 1.0) return 0.0;
    if (auto it = sol.moment_rates.find(q); it != sol.moment_rates.end()) {
        if (!std::isfinite(it->second)) {
            std::ostringstream os;
            os << "moment of order " << q << " of the density is infinite";
            throw DivergentIntegral(os.str());
        }
        return it->second;
    }
    const double diff = 0.5 * q * (q - 1.0) * sol.beta_star * sol.beta_star * sol.model.c;
    if (sol.model.nu.empty()) return diff;
    const YFunction& Y = sol.Y_star;
    const TailGrowth up = max_growth(max_growth({}, upper_growth_pow(Y, q)), Y.upper_growth());
    const Integrand g = Y.compose(
        [q](double v, double) { return std::pow(v, q) - 1.0 - q * (v - 1.0); }, {}, up);
    return diff + nu_integral(sol.model, g);
}

double divergence_value(const MinimalMeasureSolution& sol, const DivergenceFamily& fam, double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("horizon T must be positive");
    const DivergenceFamily& own = sol.Y_star.family();
    if (fam.kind() != own.kind() || fam.gamma() != own.gamma())
        throw DomainError("divergence family does not match the solved family");
    switch (fam.kind()) {
        case FamilyKind::Power:
            return fam.A() * fam.c_gamma() * std::exp(T * moment_exponent(sol, fam.gamma() + 2.0)) +
                   fam.B() + fam.C();
        case FamilyKind::Entropy: return fam.A() * T * sol.entropy_rate + fam.B() + fam.C();
        case FamilyKind::Log: return fam.A() * T * sol.log_rate + fam.B() + fam.C();
    }
    return kNaN;
}

Diagnostics validate(const LevyTriplet& model, double beta, const YFunction& Y) {
    Diagnostics d;
    try {
        d.residual = drift_residual(model, beta, Y);
    } catch (const Error&) {
        d.residual = kNaN;
    }
    if (model.nu.empty()) return d;

    d.positive = Y.positive_on(model.nu);
    if (!d.positive) {
        d.hellinger = d.integrability = d.large_jump_tail = kNaN;
        d.hellinger_finite = d.integrability_finite = d.tail_finite = false;
        d.implication_holds = true;
        d.equivalence_ok = false;
        d.failure = "positivity";
        return d;
    }

    const TailGrowth yg = max_growth({}, Y.upper_growth());
    auto eval = [&](std::function<double(double, double)> g, TailGrowth up, double& out,
                    bool& finite) {
        try {
            out = nu_integral(model, Y.compose(std::move(g), {}, up));
            finite = std::isfinite(out);
        } catch (const Error&) {
            out = kInf;
            finite = false;
        }
    };

    eval([](double v, double) {
             const double r = std::sqrt(v) - 1.0;
             return r * r;
         },
         yg, d.hellinger, d.hellinger_finite);

    const DivergenceFamily& fam = Y.family();
    const double f1 = fam.f(1.0);
    const double fp1 = fam.f_prime(1.0);
    TailGrowth fg = yg;
    if (fam.kind() == FamilyKind::Power)
        fg = max_growth(yg, upper_growth_pow(Y, fam.gamma() + 2.0));
    else if (fam.kind() == FamilyKind::Log)
        fg = max_growth(yg, {upper_growth_log(Y), false});
    eval([&fam, f1, fp1](double v, double) { return fam.f(v) - f1 - fp1 * (v - 1.0); }, fg,
         d.integrability, d.integrability_finite);

    eval([](double v, double y) { return std::abs(y) >= 1.0 ? std::expm1(y) * v : 0.0; },
         TailGrowth{1.0 + yg.rate, yg.super_exponential}, d.large_jump_tail, d.tail_finite);

    d.implication_holds = !d.tail_finite || (d.hellinger_finite && d.integrability_finite);
    d.equivalence_ok = d.positive && d.hellinger_finite;
    if (!d.hellinger_finite) d.failure = "hellinger";
    else if (!d.integrability_finite) d.failure = "integrability";
    else if (!d.tail_finite) d.failure = "large_jump_tail";
    return d;
}

Diagnostics validate(const MinimalMeasureSolution& sol) {
    return validate(sol.model, sol.beta_star, sol.Y_star);
}

}  // namespace fdemm
