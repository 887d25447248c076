#include "fdemm/levy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fdemm/errors.hpp"
#include "fdemm/quadrature.hpp"

namespace fdemm {

const char* to_string(JumpKind kind) {
    switch (kind) {
        case JumpKind::None: return "none";
        case JumpKind::Atoms: return "atoms";
        case JumpKind::Merton: return "merton";
        case JumpKind::Kou: return "kou";
    }
    return "?";
}

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Domain: return "DomainError";
        case ErrorKind::Range: return "RangeError";
        case ErrorKind::DivergentIntegral: return "DivergentIntegral";
        case ErrorKind::ToleranceNotMet: return "ToleranceNotMet";
        case ErrorKind::NoRoot: return "NoRoot";
        case ErrorKind::EquivalenceFailure: return "EquivalenceFailure";
        case ErrorKind::Normalization: return "NormalizationError";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::InvalidModel: return "InvalidModel";
        case ErrorKind::NonpositiveDensity: return "NonpositiveDensity";
        case ErrorKind::Config: return "ConfigError";
    }
    return "?";
}

LevyMeasure LevyMeasure::none() { return LevyMeasure{Storage{std::monostate{}}}; }

LevyMeasure LevyMeasure::atoms(std::vector<Atom> atoms) {
    if (atoms.empty()) return none();
    for (const auto& a : atoms) {
        if (!std::isfinite(a.size) || a.size == 0.0)
            throw InvalidModel("atom jump size must be finite and nonzero");
        if (!std::isfinite(a.mass) || !(a.mass > 0.0))
            throw InvalidModel("atom mass must be finite and positive");
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& x, const Atom& y) {
        const double ax = std::abs(x.size);
        const double ay = std::abs(y.size);
        return ax != ay ? ax < ay : x.size < y.size;
    });
    for (std::size_t i = 1; i < atoms.size(); ++i)
        if (atoms[i].size == atoms[i - 1].size) throw InvalidModel("duplicate atom location");
    return LevyMeasure{Storage{std::move(atoms)}};
}

LevyMeasure LevyMeasure::merton(double intensity, double mean, double stddev) {
    if (!(intensity > 0.0) || !std::isfinite(intensity))
        throw InvalidModel("merton intensity must be positive");
    if (!std::isfinite(mean)) throw InvalidModel("merton mean must be finite");
    if (!(stddev > 0.0) || !std::isfinite(stddev))
        throw InvalidModel("merton stddev must be positive");
    return LevyMeasure{Storage{MertonJumps{intensity, mean, stddev}}};
}

LevyMeasure LevyMeasure::kou(double intensity, double p_up, double eta_up, double eta_down) {
    if (!(intensity > 0.0) || !std::isfinite(intensity))
        throw InvalidModel("kou intensity must be positive");
    if (!(p_up > 0.0 && p_up < 1.0)) throw InvalidModel("kou p must lie in (0, 1)");
    if (!(eta_up > 0.0) || !(eta_down > 0.0) || !std::isfinite(eta_up) || !std::isfinite(eta_down))
        throw InvalidModel("kou decay rates must be positive");
    return LevyMeasure{Storage{KouJumps{intensity, p_up, eta_up, eta_down}}};
}

JumpKind LevyMeasure::kind() const {
    return static_cast<JumpKind>(storage_.index());
}

const std::vector<Atom>& LevyMeasure::atom_list() const {
    static const std::vector<Atom> kEmpty;
    if (const auto* a = std::get_if<std::vector<Atom>>(&storage_)) return *a;
    return kEmpty;
}

const MertonJumps& LevyMeasure::merton_params() const { return std::get<MertonJumps>(storage_); }
const KouJumps& LevyMeasure::kou_params() const { return std::get<KouJumps>(storage_); }

double LevyMeasure::total_mass() const {
    switch (kind()) {
        case JumpKind::None: return 0.0;
        case JumpKind::Atoms: {
            double m = 0.0;
            for (const auto& a : atom_list()) m += a.mass;
            return m;
        }
        case JumpKind::Merton: return merton_params().intensity;
        case JumpKind::Kou: return kou_params().intensity;
    }
    return 0.0;
}

double LevyMeasure::support_min() const {
    switch (kind()) {
        case JumpKind::None: return 0.0;
        case JumpKind::Atoms: {
            double m = std::numeric_limits<double>::infinity();
            for (const auto& a : atom_list()) m = std::min(m, a.size);
            return m;
        }
        default: return -std::numeric_limits<double>::infinity();
    }
}

double LevyMeasure::support_max() const {
    switch (kind()) {
        case JumpKind::None: return 0.0;
        case JumpKind::Atoms: {
            double m = -std::numeric_limits<double>::infinity();
            for (const auto& a : atom_list()) m = std::max(m, a.size);
            return m;
        }
        default: return std::numeric_limits<double>::infinity();
    }
}

bool LevyMeasure::has_bounded_support() const {
    return kind() == JumpKind::None || kind() == JumpKind::Atoms;
}

double LevyMeasure::density(double y) const {
    switch (kind()) {
        case JumpKind::Merton: {
            const auto& m = merton_params();
            const double z = (y - m.mean) / m.stddev;
            return m.intensity * std::exp(-0.5 * z * z) / (m.stddev * std::sqrt(2.0 * std::numbers::pi));
        }
        case JumpKind::Kou: {
            const auto& k = kou_params();
            if (y > 0.0) return k.intensity * k.p_up * k.eta_up * std::exp(-k.eta_up * y);
            if (y < 0.0) return k.intensity * (1.0 - k.p_up) * k.eta_down * std::exp(k.eta_down * y);
            return 0.0;
        }
        default:
            throw Unsupported("density requested for a measure without Lebesgue density");
    }
}

bool LevyMeasure::mutually_equivalent(const LevyMeasure& other) const {
    if (kind() != other.kind()) return false;
    if (kind() != JumpKind::Atoms) return true;
    const auto& a = atom_list();
    const auto& b = other.atom_list();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].size != b[i].size) return false;
    return true;
}

void LevyTriplet::validate() const {
    if (!std::isfinite(b)) throw InvalidModel("drift b must be finite");
    if (!std::isfinite(c) || c < 0.0) throw InvalidModel("diffusion coefficient c must be >= 0");
    if (c == 0.0 && nu.empty())
        throw InvalidModel("degenerate model: c = 0 and no jumps (deterministic price)");
}

namespace {

void check_tail(const TailGrowth& tail, double decay, bool gaussian, const char* side) {
    if (tail.super_exponential) {
        std::ostringstream os;
        os << "integrand grows super-exponentially on the " << side << " tail";
        throw DivergentIntegral(os.str());
    }
    if (!gaussian && !(tail.rate < decay)) {
        std::ostringstream os;
        os << "integrand growth rate " << tail.rate << " on the " << side
           << " tail is not below the jump density decay rate " << decay;
        throw DivergentIntegral(os.str());
    }
}

double integrate_density(const LevyMeasure& nu, const Integrand& g) {
    std::vector<double> breaks{-1.0, 0.0, 1.0};
    double scale_lo = 1.0;
    double scale_hi = 1.0;
    if (nu.kind() == JumpKind::Merton) {
        const auto& m = nu.merton_params();
        check_tail(g.lower, 0.0, true, "lower");
        check_tail(g.upper, 0.0, true, "upper");
        for (int k : {-8, -4, 0, 4, 8}) breaks.push_back(m.mean + k * m.stddev);
        scale_lo = scale_hi = m.stddev;
    } else {
        const auto& k = nu.kou_params();
        check_tail(g.lower, k.eta_down, false, "lower");
        check_tail(g.upper, k.eta_up, false, "upper");
        scale_hi = 2.0 / (k.eta_up - g.upper.rate);
        scale_lo = 2.0 / (k.eta_down - g.lower.rate);
        breaks.push_back(4.0 / k.eta_up);
        breaks.push_back(-4.0 / k.eta_down);
    }
    for (double kink : g.kinks)
        if (std::isfinite(kink)) breaks.push_back(kink);
    breaks.push_back(-std::numeric_limits<double>::infinity());
    breaks.push_back(std::numeric_limits<double>::infinity());
    const auto segments = quad::segments_from_breakpoints(std::move(breaks), scale_lo, scale_hi);

    auto weighted = [&nu, &g](double y) {
        const double d = nu.density(y);
        if (d == 0.0) return 0.0;
        return g.fn(y) * d;
    };
    return quad::integrate(weighted, segments).value;
}

}  // namespace

double nu_integral(const LevyMeasure& nu, const Integrand& g) {
    switch (nu.kind()) {
        case JumpKind::None: return 0.0;
        case JumpKind::Atoms: {
            double sum = 0.0;
            for (const auto& a : nu.atom_list()) {
                const double v = g.fn(a.size);
                if (!std::isfinite(v)) {
                    std::ostringstream os;
                    os << "integrand is not finite at atom y=" << a.size;
                    throw DivergentIntegral(os.str());
                }
                sum += a.mass * v;
            }
            return sum;
        }
        case JumpKind::Merton:
        case JumpKind::Kou:
            return integrate_density(nu, g);
    }
    return 0.0;
}

double nu_integral(const LevyTriplet& model, const Integrand& g) { return nu_integral(model.nu, g); }

double truncated_mean(const LevyMeasure& nu) {
    return nu_integral(nu, Integrand{[](double y) { return truncation(y); }, {}, {}, {}});
}

std::complex<double> characteristic_exponent(const LevyTriplet& model, double u) {
    model.validate();
    const Integrand re{[u](double y) { return std::cos(u * y) - 1.0; }, {}, {}, {}};
    const Integrand im{[u](double y) { return std::sin(u * y) - u * truncation(y); }, {}, {}, {}};
    const double jump_re = nu_integral(model, re);
    const double jump_im = nu_integral(model, im);
    return {-0.5 * model.c * u * u + jump_re, u * model.b + jump_im};
}

double drift_residual(const LevyTriplet& model, double beta, const Integrand& Y) {
    Integrand g;
    g.fn = [&Y](double y) { return std::expm1(y) * Y.fn(y) - truncation(y); };
    g.kinks = Y.kinks;
    g.lower = Y.lower;
    g.upper = TailGrowth{1.0 + Y.upper.rate, Y.upper.super_exponential};
    const double jumps = model.nu.empty() ? 0.0 : nu_integral(model, g);
    return model.b + 0.5 * model.c + model.c * beta + jumps;
}

}  // namespace fdemm
