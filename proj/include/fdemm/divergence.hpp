#pragma once

#include <utility>

namespace fdemm {

enum class FamilyKind { Power, Entropy, Log };

const char* to_string(FamilyKind kind);

/// f = A f_gamma + B x + C with f''(x) = a x^gamma, where
///   f_gamma(x) = c_gamma x^{gamma+2}  (gamma not in {-1, -2}),
///                x ln x               (gamma = -1),
///                -ln x                (gamma = -2),
/// and c_gamma = sign((gamma+1)(gamma+2)), so that f_gamma is convex.
class DivergenceFamily {
public:
    /// Family with f'' = a x^gamma and no affine slack.
    static DivergenceFamily from_curvature(double gamma, double a);
    /// A f_gamma + B x + C.
    static DivergenceFamily with_slack(double gamma, double A, double B, double C);

    static DivergenceFamily entropy() { return with_slack(-1.0, 1.0, 0.0, 0.0); }
    static DivergenceFamily log() { return with_slack(-2.0, 1.0, 0.0, 0.0); }
    static DivergenceFamily power(double gamma) { return with_slack(gamma, 1.0, 0.0, 0.0); }

    FamilyKind kind() const { return kind_; }
    double gamma() const { return gamma_; }
    double a() const { return a_; }
    double A() const { return A_; }
    double B() const { return B_; }
    double C() const { return C_; }
    double c_gamma() const;

    /// Same gamma, slack replaced.
    DivergenceFamily reslacked(double A, double B, double C) const {
        return with_slack(gamma_, A, B, C);
    }

    double f(double x) const;
    double f_prime(double x) const;
    double f_second(double x) const;
    double f_prime_inverse(double v) const;
    /// Open interval (lo, hi) that f' maps (0, inf) onto.
    std::pair<double, double> f_prime_range() const;

    // Canonical member of the family (A = 1, B = C = 0).
    double base(double x) const;
    double base_prime(double x) const;

private:
    DivergenceFamily(double gamma, double A, double B, double C);

    FamilyKind kind_;
    double gamma_;
    double a_;
    double A_;
    double B_;
    double C_;
};

/// Y(y) = (f')^{-1}(f'(1) + alpha (e^y - 1)); RangeError where the argument
/// leaves the range of f'.
double y_candidate(const DivergenceFamily& fam, double alpha, double y);

class UtilitySpec {
public:
    enum class Kind { Log, Power, Exponential };

    static UtilitySpec log() { return UtilitySpec{Kind::Log, 0.0}; }
    static UtilitySpec power(double p);
    static UtilitySpec exponential() { return UtilitySpec{Kind::Exponential, 0.0}; }

    Kind kind() const { return kind_; }
    double p() const { return p_; }
    /// Lower end of the domain: 0 for log/power, -inf for exponential.
    double lower_bound() const;
    double u(double x) const;
    double u_prime(double x) const;

private:
    UtilitySpec(Kind k, double p) : kind_(k), p_(p) {}
    Kind kind_;
    double p_;
};

const char* to_string(UtilitySpec::Kind kind);

/// Convex conjugate f(y) = sup_x {u(x) - x y} as a divergence family:
///   log         -> -ln y - 1
///   power p     -> -((p-1)/p) y^{p/(p-1)}
///   exponential -> 1 - y + y ln y
DivergenceFamily conjugate_of_utility(const UtilitySpec& u);

}  // namespace fdemm
