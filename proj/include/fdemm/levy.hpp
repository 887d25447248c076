#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace fdemm {

enum class JumpKind { None, Atoms, Merton, Kou };

const char* to_string(JumpKind kind);

struct Atom {
    double size;  // jump size y (log-price jump), nonzero
    double mass;  // nu({y}) > 0
};

struct MertonJumps {
    double intensity;  // lambda_J > 0
    double mean;
    double stddev;     // > 0
};

struct KouJumps {
    double intensity;  // lambda_J > 0
    double p_up;       // in (0, 1)
    double eta_up;     // > 0
    double eta_down;   // > 0
};

/// Finite-activity Levy measure. Atoms are kept sorted by ascending |y|
/// (negative before positive on ties), which is also the summation order.
class LevyMeasure {
public:
    LevyMeasure() = default;

    static LevyMeasure none();
    static LevyMeasure atoms(std::vector<Atom> atoms);
    static LevyMeasure merton(double intensity, double mean, double stddev);
    static LevyMeasure kou(double intensity, double p_up, double eta_up, double eta_down);

    JumpKind kind() const;
    const std::vector<Atom>& atom_list() const;
    const MertonJumps& merton_params() const;
    const KouJumps& kou_params() const;

    bool empty() const { return kind() == JumpKind::None; }
    double total_mass() const;
    double support_min() const;
    double support_max() const;
    bool has_bounded_support() const;

    /// Lebesgue density of nu (merton/kou only).
    double density(double y) const;

    /// Structural equality of the jump structure (kind + atom locations) used
    /// by the change-point local-equivalence gate.
    bool mutually_equivalent(const LevyMeasure& other) const;

private:
    using Storage = std::variant<std::monostate, std::vector<Atom>, MertonJumps, KouJumps>;
    explicit LevyMeasure(Storage s) : storage_(std::move(s)) {}
    Storage storage_{};
};

struct LevyTriplet {
    double b = 0.0;  // drift relative to the truncation h(y) = y 1{|y|<=1}
    double c = 0.0;  // diffusion coefficient
    LevyMeasure nu;

    /// Throws InvalidModel on c < 0, non-finite values, or c = 0 with no jumps.
    void validate() const;
};

/// Truncation function h(y) = y 1{|y| <= 1}.
inline double truncation(double y) { return (y >= -1.0 && y <= 1.0) ? y : 0.0; }

/// Growth of |g(y)| along one tail: at most polynomial times exp(rate |y|), or
/// faster than any exponential when super_exponential is set.
struct TailGrowth {
    double rate = 0.0;
    bool super_exponential = false;
};

/// A nu-integrand together with the facts the quadrature needs up front.
struct Integrand {
    std::function<double(double)> fn;
    std::vector<double> kinks;
    TailGrowth lower{};
    TailGrowth upper{};
};

/// Integral of g against nu: atoms summed exactly in the stored order,
/// densities by adaptive Gauss-Kronrod with splits at 0, +-1 and the kinks.
/// Throws DivergentIntegral when a declared tail outgrows the density decay.
double nu_integral(const LevyMeasure& nu, const Integrand& g);
double nu_integral(const LevyTriplet& model, const Integrand& g);

/// psi(u) = iub - cu^2/2 + int (e^{iuy} - 1 - iu h(y)) nu(dy).
std::complex<double> characteristic_exponent(const LevyTriplet& model, double u);

/// b + c/2 + c beta + int ((e^y - 1) Y(y) - h(y)) nu(dy). The Integrand
/// describes Y itself; tail growth of the full integrand is derived from it.
double drift_residual(const LevyTriplet& model, double beta, const Integrand& Y);

/// int h(y) nu(dy); the drift of the compound-Poisson representation is b minus this.
double truncated_mean(const LevyMeasure& nu);

}  // namespace fdemm
