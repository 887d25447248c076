#include "fdemm/changepoint.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fdemm/errors.hpp"
#include "fdemm/roots.hpp"

namespace fdemm {

namespace {

// Romberg on [a, b] for a smooth integrand. Aims for rel_tol; once the
// extrapolation stagnates at rounding level it accepts anything below 1e-10.
// `floor` is the caller's share of the total integral: a cell whose integrand
// nearly cancels is judged against it instead of its own tiny value.
double romberg(const std::function<double(double)>& f, double a, double b, double rel_tol, double floor = 0.0) {
    constexpr int kMax = 14;
    constexpr double kAccepted = 1e-10;
    double R[kMax][kMax];
    double h = b - a;
    double fmax = 0.0;
    auto F = [&](double x) {
        const double v = f(x);
        fmax = std::max(fmax, std::abs(v));
        return v;
    };
    R[0][0] = 0.5 * h * (F(a) + F(b));
    double prev_diff = std::numeric_limits<double>::infinity();
    for (int i = 1; i < kMax; ++i) {
        h *= 0.5;
        double s = 0.0;
        const int n = 1 << (i - 1);
        for (int k = 0; k < n; ++k) s += F(a + (2 * k + 1) * h);
        R[i][0] = 0.5 * R[i - 1][0] + h * s;
        double p = 4.0;
        for (int j = 1; j <= i; ++j, p *= 4.0) R[i][j] = R[i][j - 1] + (R[i][j - 1] - R[i - 1][j - 1]) / (p - 1.0);
        // Relative to the cell's own scale so cells with a near-zero integral still converge.
        const double scale = std::max({std::abs(R[i][i]), 1e-3 * (b - a) * fmax, floor});
        const double diff = std::abs(R[i][i] - R[i - 1][i - 1]);
        if (i >= 3 && diff <= rel_tol * scale + 1e-300) return R[i][i];
        if (i >= 5 && diff >= 0.5 * prev_diff && diff <= kAccepted * scale) return R[i][i];
        prev_diff = diff;
    }
    const double diff = std::abs(R[kMax - 1][kMax - 1] - R[kMax - 2][kMax - 2]);
    const double scale = std::max({std::abs(R[kMax - 1][kMax - 1]), 1e-3 * (b - a) * fmax, floor});
    if (diff <= kAccepted * scale) return R[kMax - 1][kMax - 1];
    throw ToleranceNotMet("Romberg did not converge on a tau-density cell", diff);
}

}  // namespace

TauLaw::TauLaw(double horizon, std::vector<TauAtom> atoms, std::vector<double> density)
    : horizon_(horizon), atoms_(std::move(atoms)), density_(std::move(density)) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidModel("horizon T must be positive");
    for (const auto& a : atoms_) {
        if (!(a.t >= 0.0 && a.t <= horizon)) throw InvalidModel("tau atom outside [0, T]");
        if (!(a.p > 0.0) || !std::isfinite(a.p)) throw InvalidModel("tau atom mass must be positive");
    }
    std::stable_sort(atoms_.begin(), atoms_.end(), [](const TauAtom& x, const TauAtom& y) { return x.t < y.t; });
    for (std::size_t i = 1; i < atoms_.size(); ++i)
        if (atoms_[i].t == atoms_[i - 1].t) throw InvalidModel("duplicate tau atom");
    if (density_.size() == 1) throw InvalidModel("tau density needs at least two grid nodes");
    for (double v : density_)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidModel("tau density must be finite and nonnegative");

    cum_nodes_.assign(density_.size(), 0.0);
    if (!density_.empty()) {
        const double h = horizon_ / cells();
        for (int k = 0; k < cells(); ++k)
            cum_nodes_[k + 1] = cum_nodes_[k] + 0.5 * h * (density_[k] + density_[k + 1]);
    }
    const double total = atom_mass() + density_mass();
    if (!(std::abs(total - 1.0) <= 1e-12)) {
        std::ostringstream os;
        os << "tau law has total mass " << total << ", expected 1";
        throw InvalidModel(os.str());
    }
}

TauLaw TauLaw::uniform(double horizon, std::vector<TauAtom> atoms, int cells) {
    if (cells < 1) throw InvalidModel("tau density needs at least one cell");
    double m = 0.0;
    for (const auto& a : atoms) m += a.p;
    const double rest = 1.0 - m;
    if (rest < -1e-12) throw InvalidModel("tau atoms carry more than unit mass");
    if (rest <= 1e-12) return TauLaw(horizon, std::move(atoms), {});
    return TauLaw(horizon, std::move(atoms), std::vector<double>(cells + 1, rest / horizon));
}

TauLaw TauLaw::from_samples(double horizon, std::vector<TauAtom> atoms, std::vector<double> values) {
    if (values.size() < 2) throw InvalidModel("tau density needs at least two grid nodes");
    double m = 0.0;
    for (const auto& a : atoms) m += a.p;
    const double rest = 1.0 - m;
    if (rest < -1e-12) throw InvalidModel("tau atoms carry more than unit mass");
    const double h = horizon / (values.size() - 1);
    double raw = 0.0;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) raw += 0.5 * h * (values[k] + values[k + 1]);
    if (rest <= 1e-12) return TauLaw(horizon, std::move(atoms), {});
    if (!(raw > 0.0)) throw InvalidModel("tau density samples have zero mass");
    for (double& v : values) v *= rest / raw;
    return TauLaw(horizon, std::move(atoms), std::move(values));
}

double TauLaw::atom_mass() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.p;
    return m;
}

double TauLaw::density_mass() const { return cum_nodes_.empty() ? 0.0 : cum_nodes_.back(); }

double TauLaw::density_at(double t) const {
    if (density_.empty() || t < 0.0 || t > horizon_) return 0.0;
    const double x = t / horizon_ * cells();
    const int k = std::min(static_cast<int>(x), cells() - 1);
    const double w = x - k;
    return (1.0 - w) * density_[k] + w * density_[k + 1];
}

double TauLaw::integrate(const std::function<double(double)>& g, double rel_tol) const {
    double sum = 0.0;
    for (const auto& a : atoms_) sum += a.p * g(a.t);
    if (cells() == 0) return sum;
    // trapezoid of |g d| over the nodes sets the per-cell floor
    std::vector<double> gn(density_.size());
    double mass_abs = 0.0;
    for (int k = 0; k <= cells(); ++k) {
        gn[k] = density_[k] == 0.0 ? 0.0 : std::abs(g(node(k)) * density_[k]);
        mass_abs += (k == 0 || k == cells() ? 0.5 : 1.0) * gn[k];
    }
    const double floor = mass_abs * (horizon_ / cells()) / cells();
    for (int k = 0; k < cells(); ++k) {
        const double lo = node(k), hi = node(k + 1);
        const double dlo = density_[k], dhi = density_[k + 1];
        if (dlo == 0.0 && dhi == 0.0) continue;
        auto fk = [&](double t) {
            const double w = (t - lo) / (hi - lo);
            return g(t) * ((1.0 - w) * dlo + w * dhi);
        };
        sum += romberg(fk, lo, hi, rel_tol, floor);
    }
    return sum;
}

double TauLaw::cdf(double t) const {
    if (t < 0.0) return 0.0;
    if (t >= horizon_) return 1.0;
    double m = 0.0;
    for (const auto& a : atoms_)
        if (a.t <= t) m += a.p;
    if (!density_.empty()) {
        const double x = t / horizon_ * cells();
        const int k = std::min(static_cast<int>(x), cells() - 1);
        const double h = horizon_ / cells();
        const double d = t - node(k);
        const double slope = (density_[k + 1] - density_[k]) / h;
        m += cum_nodes_[k] + density_[k] * d + 0.5 * slope * d * d;
    }
    return m;
}

double TauLaw::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    // Walk breakpoints (grid nodes and atoms) in time order.
    double acc = 0.0;
    std::size_t ai = 0;
    const int n = cells();
    const double h = n > 0 ? horizon_ / n : 0.0;
    auto take_atoms_at_or_before = [&](double t) -> std::optional<double> {
        while (ai < atoms_.size() && atoms_[ai].t <= t) {
            acc += atoms_[ai].p;
            if (u < acc) return atoms_[ai].t;
            ++ai;
        }
        return std::nullopt;
    };
    if (n == 0) {
        if (auto r = take_atoms_at_or_before(horizon_)) return *r;
        return atoms_.empty() ? horizon_ : atoms_.back().t;
    }
    if (auto r = take_atoms_at_or_before(0.0)) return *r;
    for (int k = 0; k < n; ++k) {
        double a = node(k);
        const double b = node(k + 1);
        const double slope = (density_[k + 1] - density_[k]) / h;
        // Sub-segments of the cell split by interior atoms.
        while (true) {
            const double next_atom =
                (ai < atoms_.size() && atoms_[ai].t < b) ? atoms_[ai].t : b;
            const double da = density_[k] + slope * (a - node(k));
            const double len = next_atom - a;
            const double mass = da * len + 0.5 * slope * len * len;
            if (u < acc + mass && mass > 0.0) {
                const double r = u - acc;
                if (!(r > 0.0)) return a;
                const double disc = std::max(0.0, da * da + 2.0 * slope * r);
                const double d = 2.0 * r / (da + std::sqrt(disc));
                return std::min(a + d, next_atom);
            }
            acc += mass;
            if (next_atom == b) break;
            if (auto r = take_atoms_at_or_before(next_atom)) return *r;
            a = next_atom;
        }
        if (auto r = take_atoms_at_or_before(b)) return *r;
    }
    // Rounding in the last ulps.
    if (!atoms_.empty() && atoms_.back().t == horizon_) return horizon_;
    return horizon_;
}

void check_local_equivalence(const LevyTriplet& pre, const LevyTriplet& post) {
    if (pre.c != post.c)
        throw EquivalenceFailure("regimes are not locally equivalent: diffusion coefficients differ");
    if (!pre.nu.mutually_equivalent(post.nu))
        throw EquivalenceFailure("regimes are not locally equivalent: jump structures differ");
    if (pre.c == 0.0) {
        const double dpre = pre.b - truncated_mean(pre.nu);
        const double dpost = post.b - truncated_mean(post.nu);
        if (dpre != dpost)
            throw EquivalenceFailure(
                "regimes are not locally equivalent: pure-jump effective drifts differ");
    }
}

ChangePointSpec ChangePointSpec::build(const LevyTriplet& pre, const LevyTriplet& post,
                                       const TauLaw& tau, const DivergenceFamily& family,
                                       const SolverOptions& opts) {
    pre.validate();
    post.validate();
    check_local_equivalence(pre, post);
    auto sp = solve_minimal(pre, family, opts);
    auto so = solve_minimal(post, family, opts);
    return ChangePointSpec{pre, post, tau.horizon(), tau, family, std::move(sp), std::move(so)};
}

ChangePointSpec ChangePointSpec::with_family(const DivergenceFamily& fam) const {
    const DivergenceFamily& own = family;
    if (fam.kind() != own.kind() || fam.gamma() != own.gamma())
        throw DomainError("with_family keeps gamma; re-build for another family");
    ChangePointSpec out = *this;
    out.family = fam;
    return out;
}

double z_moment(const ChangePointSpec& spec, double t, double q) {
    if (!(t >= 0.0 && t <= spec.horizon)) throw DomainError("t outside [0, T]");
    const double kp = moment_exponent(spec.sol_pre, q);
    const double ko = moment_exponent(spec.sol_post, q);
    return std::exp(t * kp + (spec.horizon - t) * ko);
}

double entropy_term(const ChangePointSpec& spec, double t) {
    return t * spec.sol_pre.entropy_rate + (spec.horizon - t) * spec.sol_post.entropy_rate;
}

double log_term(const ChangePointSpec& spec, double t) {
    return t * spec.sol_pre.log_rate + (spec.horizon - t) * spec.sol_post.log_rate;
}

double lambda_t(const ChangePointSpec& spec, double t, double c) {
    if (!(c > 0.0)) throw DomainError("lambda_t needs c > 0");
    const DivergenceFamily& f = spec.family;
    switch (f.kind()) {
        case FamilyKind::Power: {
            const double g = f.gamma();
            return f.A() * (g + 2.0) * f.c_gamma() * std::pow(c, g + 1.0) * z_moment(spec, t, g + 2.0) + f.B();
        }
        case FamilyKind::Entropy: return f.A() * (entropy_term(spec, t) + std::log(c) + 1.0) + f.B();
        case FamilyKind::Log: return -f.A() / c + f.B();
    }
    throw Unsupported("lambda_t for a non-canonical family needs the Monte Carlo estimator");
}

double c_t_inverse(const ChangePointSpec& spec, double t, double lambda) {
    const DivergenceFamily& f = spec.family;
    const auto [lo, hi] = f.f_prime_range();
    if (!(lambda > lo && lambda < hi)) {
        std::ostringstream os;
        os << "lambda=" << lambda << " outside the range (" << lo << ", " << hi << ") of lambda_t";
        throw RangeError(os.str(), lo, hi);
    }
    const double w = (lambda - f.B()) / f.A();
    switch (f.kind()) {
        case FamilyKind::Power: {
            const double g = f.gamma();
            const double m = z_moment(spec, t, g + 2.0);
            return std::pow(w / ((g + 2.0) * f.c_gamma() * m), 1.0 / (g + 1.0));
        }
        case FamilyKind::Entropy: return std::exp(w - 1.0 - entropy_term(spec, t));
        case FamilyKind::Log: return -1.0 / w;
    }
    return 0.0;
}

double c_t_inverse_numeric(const ChangePointSpec& spec, double t, double lambda) {
    const auto [lo, hi] = spec.family.f_prime_range();
    if (!(lambda > lo && lambda < hi))
        throw RangeError("lambda outside the range of lambda_t", lo, hi);
    auto F = [&](double logc) { return lambda_t(spec, t, std::exp(logc)) - lambda; };
    double a = 0.0, fa = F(a);
    double b = fa < 0.0 ? 1.0 : -1.0, fb = F(b);
    for (int i = 0; i < 200 && (fa > 0.0) == (fb > 0.0) && fb != 0.0; ++i) {
        a = b, fa = fb;
        b *= 2.0;
        fb = F(b);
    }
    if ((fa > 0.0) == (fb > 0.0) && fb != 0.0) throw NoRoot("lambda_t never reaches lambda");
    roots::Options ro;
    // Run to bracket collapse: |lambda_t - B| can be tiny relative to |lambda|.
    ro.f_tol_requested = 0.0;
    ro.f_tol_accepted = 1e-10 * (1.0 + std::abs(lambda));
    return std::exp(roots::brent(F, a, b, fa, fb, ro).x);
}

double ScalingProfile::operator()(double t) const {
    return std::exp(log_slope * t - log_norm);
}

namespace {

// Slope of ln c*(t) (up to the normalizer) for the canonical families.
double canonical_log_slope(const ChangePointSpec& spec) {
    const DivergenceFamily& f = spec.family;
    switch (f.kind()) {
        case FamilyKind::Power: {
            const double q = f.gamma() + 2.0;
            return -(moment_exponent(spec.sol_pre, q) - moment_exponent(spec.sol_post, q)) /
                   (f.gamma() + 1.0);
        }
        case FamilyKind::Entropy: return -(spec.sol_pre.entropy_rate - spec.sol_post.entropy_rate);
        case FamilyKind::Log: return 0.0;
    }
    return 0.0;
}

void tabulate(const ChangePointSpec& spec, ScalingProfile& p,
              const std::function<double(double)>& c) {
    const TauLaw& tau = spec.tau;
    p.grid_t.clear();
    p.grid_c.clear();
    p.atom_t.clear();
    p.atom_c.clear();
    for (int k = 0; tau.cells() > 0 && k <= tau.cells(); ++k) {
        p.grid_t.push_back(tau.node(k));
        p.grid_c.push_back(c(tau.node(k)));
    }
    for (const auto& a : tau.atoms()) {
        p.atom_t.push_back(a.t);
        p.atom_c.push_back(c(a.t));
    }
    p.normalization_residual = tau.integrate(c) - 1.0;
    for (double v : p.grid_c)
        if (!(v > 0.0)) throw NormalizationError("scaling function is not positive");
    for (double v : p.atom_c)
        if (!(v > 0.0)) throw NormalizationError("scaling function is not positive");
    if (!(std::abs(p.normalization_residual) < 1e-10)) {
        std::ostringstream os;
        os << "scaling function integrates to 1 + " << p.normalization_residual;
        throw NormalizationError(os.str());
    }
}

}  // namespace

ScalingProfile scaling_profile(const ChangePointSpec& spec, ScalingMethod method) {
    const DivergenceFamily& f = spec.family;
    const TauLaw& tau = spec.tau;
    const double T = spec.horizon;
    ScalingProfile p;
    p.horizon = T;

    if (method == ScalingMethod::ClosedForm) {
        p.log_slope = canonical_log_slope(spec);
        if (p.log_slope != 0.0) {
            const double s = p.log_slope;
            p.log_norm = std::log(tau.integrate([s](double t) { return std::exp(s * t); }));
        }
        const double L = p.log_norm;
        switch (f.kind()) {
            case FamilyKind::Power: {
                const double g = f.gamma();
                const double ko = moment_exponent(spec.sol_post, g + 2.0);
                p.lambda_star = f.A() * (g + 2.0) * f.c_gamma() * std::exp(T * ko - (g + 1.0) * L) + f.B();
                break;
            }
            case FamilyKind::Entropy:
                p.lambda_star = f.A() * (1.0 + T * spec.sol_post.entropy_rate - L) + f.B();
                break;
            case FamilyKind::Log: p.lambda_star = -f.A() + f.B(); break;
        }
        p.lambda_closed_form = true;
        tabulate(spec, p, [&p](double t) { return p(t); });
        return p;
    }

    // General path: find lambda* with int c_t(lambda) d alpha = 1.
    auto G = [&](double lam) {
        return tau.integrate([&](double t) { return c_t_inverse(spec, t, lam); }) - 1.0;
    };
    const auto [lo, hi] = f.f_prime_range();
    double a = lambda_t(spec, 0.0, 1.0);
    double fa = G(a);
    const double dir = fa > 0.0 ? -1.0 : 1.0;
    double step = 0.5 * (1.0 + std::abs(a));
    double b = a, fb = fa;
    for (int i = 0; i < 400; ++i) {
        double cand = a + dir * step;
        if (dir > 0.0 && cand >= hi) cand = a + 0.5 * (hi - a);
        if (dir < 0.0 && cand <= lo) cand = a + 0.5 * (lo - a);
        b = cand;
        fb = G(b);
        if ((fb > 0.0) != (fa > 0.0) || fb == 0.0) break;
        a = b, fa = fb;
        step *= 2.0;
    }
    if ((fb > 0.0) == (fa > 0.0) && fb != 0.0)
        throw NoRoot("normalization equation for the scaling function has no root");
    roots::Options ro;
    ro.f_tol_requested = 1e-14;
    ro.f_tol_accepted = 1e-11;
    p.lambda_star = roots::brent(G, a, b, fa, fb, ro).x;
    p.lambda_closed_form = false;

    // Store the log-linear representation implied by the root.
    const double c0 = c_t_inverse(spec, 0.0, p.lambda_star);
    const double cT = c_t_inverse(spec, T, p.lambda_star);
    p.log_slope = std::log(cT / c0) / T;
    p.log_norm = -std::log(c0);
    const double lam = p.lambda_star;
    tabulate(spec, p, [&](double t) { return c_t_inverse(spec, t, lam); });
    return p;
}

ScaledDensity::ScaledDensity(const TauLaw& tau, std::function<double(double)> cfun, double tol)
    : cfun_(std::move(cfun)) {
    const double m = tau.integrate(cfun_);
    if (!(std::abs(m - 1.0) <= tol)) {
        std::ostringstream os;
        os << "scaling function has E c(tau) = " << m << ", not 1";
        throw NormalizationError(os.str());
    }
}

double ScaledDensity::terminal(const PathStatistics& s) const {
    return cfun_(s.tau) * s.zeta_tau * s.zeta_tilde_ratio;
}

double emm_density_terminal(const TauLaw& tau, const std::function<double(double)>& cfun,
                            const PathStatistics& s) {
    return ScaledDensity(tau, cfun).terminal(s);
}

double expected_f(const ChangePointSpec& spec, double t, double c) {
    if (!(c > 0.0)) throw DomainError("scaling value must be positive");
    const DivergenceFamily& f = spec.family;
    double core = 0.0;
    switch (f.kind()) {
        case FamilyKind::Power: {
            const double g = f.gamma();
            core = f.c_gamma() * std::pow(c, g + 2.0) * z_moment(spec, t, g + 2.0);
            break;
        }
        case FamilyKind::Entropy: core = c * (std::log(c) + entropy_term(spec, t)); break;
        case FamilyKind::Log: core = -std::log(c) + log_term(spec, t); break;
    }
    return f.A() * core + f.B() * c + f.C();
}

double f_divergence_of_scaling(const ChangePointSpec& spec, const std::function<double(double)>& cfun) {
    return spec.tau.integrate([&](double t) { return expected_f(spec, t, cfun(t)); });
}

}  // namespace fdemm
