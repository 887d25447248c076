#include "fdemm/divergence.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fdemm/errors.hpp"

namespace fdemm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

FamilyKind kind_of(double gamma) {
    if (gamma == -1.0) return FamilyKind::Entropy;
    if (gamma == -2.0) return FamilyKind::Log;
    return FamilyKind::Power;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace

const char* to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Power: return "power";
        case FamilyKind::Entropy: return "entropy";
        case FamilyKind::Log: return "log";
    }
    return "?";
}

DivergenceFamily::DivergenceFamily(double gamma, double A, double B, double C)
    : kind_(kind_of(gamma)), gamma_(gamma), a_(0.0), A_(A), B_(B), C_(C) {
    if (!std::isfinite(gamma)) throw DomainError("gamma must be finite");
    if (!(A > 0.0) || !std::isfinite(A)) throw DomainError("slack scale A must be positive");
    if (!std::isfinite(B) || !std::isfinite(C)) throw DomainError("slack B, C must be finite");
    a_ = kind_ == FamilyKind::Power ? A * std::abs((gamma + 1.0) * (gamma + 2.0)) : A;

    // Convexity: f' strictly increasing on a spread of points.
    double prev = -kInf;
    for (double x : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double fp = f_prime(x);
        if (!(fp > prev)) throw DomainError("divergence family is not strictly convex");
        prev = fp;
    }
}

DivergenceFamily DivergenceFamily::from_curvature(double gamma, double a) {
    if (!(a > 0.0)) throw DomainError("curvature scale a must be positive");
    const FamilyKind k = kind_of(gamma);
    const double A = k == FamilyKind::Power ? a / std::abs((gamma + 1.0) * (gamma + 2.0)) : a;
    DivergenceFamily fam(gamma, A, 0.0, 0.0);
    fam.a_ = a;
    return fam;
}

DivergenceFamily DivergenceFamily::with_slack(double gamma, double A, double B, double C) {
    return DivergenceFamily(gamma, A, B, C);
}

double DivergenceFamily::c_gamma() const {
    if (kind_ != FamilyKind::Power) return 1.0;
    return sign((gamma_ + 1.0) * (gamma_ + 2.0));
}

double DivergenceFamily::base(double x) const {
    if (!(x > 0.0)) throw DomainError("f is defined on x > 0 only");
    switch (kind_) {
        case FamilyKind::Entropy: return x * std::log(x);
        case FamilyKind::Log: return -std::log(x);
        case FamilyKind::Power: return c_gamma() * std::pow(x, gamma_ + 2.0);
    }
    return 0.0;
}

double DivergenceFamily::base_prime(double x) const {
    if (!(x > 0.0)) throw DomainError("f' is defined on x > 0 only");
    switch (kind_) {
        case FamilyKind::Entropy: return std::log(x) + 1.0;
        case FamilyKind::Log: return -1.0 / x;
        case FamilyKind::Power: return c_gamma() * (gamma_ + 2.0) * std::pow(x, gamma_ + 1.0);
    }
    return 0.0;
}

double DivergenceFamily::f(double x) const { return A_ * base(x) + B_ * x + C_; }

double DivergenceFamily::f_prime(double x) const { return A_ * base_prime(x) + B_; }

double DivergenceFamily::f_second(double x) const {
    if (!(x > 0.0)) throw DomainError("f'' is defined on x > 0 only");
    if (gamma_ == 0.0) return a_;
    if (kind_ == FamilyKind::Entropy) return a_ / x;
    if (kind_ == FamilyKind::Log) return a_ / (x * x);
    return a_ * std::pow(x, gamma_);
}

std::pair<double, double> DivergenceFamily::f_prime_range() const {
    switch (kind_) {
        case FamilyKind::Entropy: return {-kInf, kInf};
        case FamilyKind::Log: return {-kInf, B_};
        case FamilyKind::Power:
            return gamma_ > -1.0 ? std::pair{B_, kInf} : std::pair{-kInf, B_};
    }
    return {-kInf, kInf};
}

double DivergenceFamily::f_prime_inverse(double v) const {
    const auto [lo, hi] = f_prime_range();
    if (!(v > lo && v < hi)) {
        std::ostringstream os;
        os << "value " << v << " outside the range (" << lo << ", " << hi << ") of f'";
        throw RangeError(os.str(), lo, hi);
    }
    const double w = (v - B_) / A_;  // value of the canonical f'
    switch (kind_) {
        case FamilyKind::Entropy: return std::exp(w - 1.0);
        case FamilyKind::Log: return -1.0 / w;
        case FamilyKind::Power:
            return std::pow(w / (c_gamma() * (gamma_ + 2.0)), 1.0 / (gamma_ + 1.0));
    }
    return 0.0;
}

double y_candidate(const DivergenceFamily& fam, double alpha, double y) {
    return fam.f_prime_inverse(fam.f_prime(1.0) + alpha * std::expm1(y));
}

UtilitySpec UtilitySpec::power(double p) {
    if (!(p < 1.0) || p == 0.0 || !std::isfinite(p))
        throw DomainError("power utility needs p < 1, p != 0");
    return UtilitySpec{Kind::Power, p};
}

const char* to_string(UtilitySpec::Kind kind) {
    switch (kind) {
        case UtilitySpec::Kind::Log: return "log";
        case UtilitySpec::Kind::Power: return "power";
        case UtilitySpec::Kind::Exponential: return "exponential";
    }
    return "?";
}

double UtilitySpec::lower_bound() const {
    return kind_ == Kind::Exponential ? -kInf : 0.0;
}

double UtilitySpec::u(double x) const {
    switch (kind_) {
        case Kind::Log:
            if (!(x > 0.0)) throw DomainError("log utility needs x > 0");
            return std::log(x);
        case Kind::Power:
            if (!(x > 0.0)) throw DomainError("power utility needs x > 0");
            return std::pow(x, p_) / p_;
        case Kind::Exponential: return -std::expm1(-x);
    }
    return 0.0;
}

double UtilitySpec::u_prime(double x) const {
    switch (kind_) {
        case Kind::Log:
            if (!(x > 0.0)) throw DomainError("log utility needs x > 0");
            return 1.0 / x;
        case Kind::Power:
            if (!(x > 0.0)) throw DomainError("power utility needs x > 0");
            return std::pow(x, p_ - 1.0);
        case Kind::Exponential: return std::exp(-x);
    }
    return 0.0;
}

DivergenceFamily conjugate_of_utility(const UtilitySpec& u) {
    switch (u.kind()) {
        case UtilitySpec::Kind::Log:
            return DivergenceFamily::with_slack(-2.0, 1.0, 0.0, -1.0);
        case UtilitySpec::Kind::Exponential:
            return DivergenceFamily::with_slack(-1.0, 1.0, -1.0, 1.0);
        case UtilitySpec::Kind::Power: {
            const double p = u.p();
            const double gamma = p / (p - 1.0) - 2.0;
            // -((p-1)/p) y^{p/(p-1)} = A c_gamma y^{gamma+2} with c_gamma = sign(p).
            return DivergenceFamily::with_slack(gamma, std::abs((1.0 - p) / p), 0.0, 0.0);
        }
    }
    throw Unsupported("unknown utility");
}

}  // namespace fdemm
