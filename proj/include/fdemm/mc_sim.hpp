#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fdemm/changepoint.hpp"
#include "fdemm/rng.hpp"
#include "fdemm/strategy.hpp"

namespace fdemm {

struct SimConfig {
    std::int64_t n_paths = 10000;
    int n_steps = 64;
    std::uint64_t master_seed = 1;
    int threads = 0;        // 0: OpenMP default
    bool parallel = true;   // false selects the serial reference kernel
};

struct JumpEvent {
    double t;
    double y;
    Side regime;
};

/// One simulated path on a grid augmented with tau and the jump times.
struct PathBundle {
    std::uint64_t index = 0;
    double tau = 0.0;
    std::vector<double> t;
    std::vector<double> X;        // right-continuous log-price, X_0 = 0
    std::vector<Side> regime;     // regime driving (t_k, t_{k+1}]; size = nodes - 1
    std::vector<JumpEvent> jumps;
    // log space; filled by density_along_path
    std::vector<double> log_zeta;        // ln zeta_{t ^ tau}
    std::vector<double> log_zeta_tilde;  // ln(zeta~_t / zeta~_tau), 0 up to tau
    std::vector<double> log_Zstar;       // ln c*(tau) + the two above
    std::vector<double> wealth;          // filled by replicate_path
    bool flagged = false;                // log Z* below the underflow threshold
};

constexpr double kLogUnderflow = -700.0;

struct TerminalSummary {
    double tau = 0.0;
    double X_T = 0.0;
    double log_z = 0.0;      // ln z*_T(tau)
    double log_Zstar = 0.0;  // ln c*(tau) + ln z*_T(tau)
    int n_jumps = 0;
    bool flagged = false;
};

/// Precomputed per-regime constants; safe to share across threads.
class PathSimulator {
public:
    PathSimulator(const ChangePointSpec& spec, ScalingProfile profile);
    // Regimes point into spec_.
    PathSimulator(const PathSimulator&) = delete;
    PathSimulator& operator=(const PathSimulator&) = delete;

    const ChangePointSpec& spec() const { return spec_; }
    const ScalingProfile& profile() const { return profile_; }

    /// Grid, tau, jumps and X for path `index`; densities left empty.
    PathBundle simulate(std::uint64_t seed, std::uint64_t index, int n_steps) const;
    void fill_densities(PathBundle& p) const;
    TerminalSummary summary(const PathBundle& p) const;

private:
    struct Regime {
        double drift;      // b - int h dnu
        double sigma;      // sqrt(c)
        double intensity;  // nu(R)
        double beta;
        double log_rate;   // beta^2 c / 2 + int (Y - 1) dnu
        std::vector<double> atom_cdf;
        const MinimalMeasureSolution* sol;
    };
    double jump_size(const Regime& r, PhiloxStream& s) const;
    const Regime& regime(Side s) const { return s == Side::Pre ? pre_ : post_; }

    ChangePointSpec spec_;
    ScalingProfile profile_;
    Regime pre_;
    Regime post_;
};

PathBundle simulate_path(const ChangePointSpec& spec, const SimConfig& cfg, std::uint64_t index);
/// Paths [0, n_paths) with densities filled; meant for dumps and small runs.
std::vector<PathBundle> simulate(const ChangePointSpec& spec, const SimConfig& cfg);
void density_along_path(const ChangePointSpec& spec, const ScalingProfile& profile, PathBundle& p);

/// Terminal summaries of all paths, indexed by path. Both kernels give
/// bit-identical output; the parallel one honours cfg.threads.
std::vector<TerminalSummary> terminal_summaries_serial(const PathSimulator& sim, const SimConfig& cfg);
std::vector<TerminalSummary> terminal_summaries_parallel(const PathSimulator& sim, const SimConfig& cfg);
std::vector<TerminalSummary> terminal_summaries(const PathSimulator& sim, const SimConfig& cfg);

/// Pairwise summation in index order.
double pairwise_sum(const double* v, std::size_t n);

enum class StatKind { ZPower, ZLogZ, NegLogZ, Z, ZS, FofZ, QMeanLogZ, JumpCount };

struct Statistic {
    StatKind kind;
    double q = 0.0;  // ZPower only
};

std::string to_string(const Statistic& s);

struct Estimate {
    std::string name;
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n_used = 0;
    std::int64_t n_flagged = 0;
    double ess = 0.0;  // effective sample size of the weights (QMeanLogZ), else n_used
};

/// Statistics of Z*_T = c*(tau) z*_T(tau) under P (QMeanLogZ weights by Z*_T).
std::vector<Estimate> estimate(const PathSimulator& sim, const SimConfig& cfg, const std::vector<Statistic>& stats);
Estimate estimate(const ChangePointSpec& spec, const SimConfig& cfg, const Statistic& stat);
/// Closed form of the same statistic from the moment pipeline.
double closed_form(const ChangePointSpec& spec, const ScalingProfile& profile, const Statistic& stat);

/// MC of E[z*_T(t)^q] and lambda_t(c) with tau pinned at t.
Estimate conditional_moment_mc(const ChangePointSpec& spec, const SimConfig& cfg, double t, double q);
Estimate lambda_t_mc(const ChangePointSpec& spec, const SimConfig& cfg, double t, double c);

struct Perturbation {
    std::function<double(double)> delta;  // |delta| <= 1
    double eps;
};

/// Smooth trigonometric perturbations with random phases and weights.
std::vector<Perturbation> smooth_perturbations(int n, std::uint64_t seed, double horizon, double eps = 0.05);

struct MinimalityRow {
    double F_eps;
    double margin_closed;    // F(c_eps) - F(c*)
    double margin_mc;
    double margin_mc_se;
    double jensen_bound;     // log family: -int ln c_eps d alpha; NaN otherwise
};

struct MinimalityReport {
    double F_star;
    std::vector<MinimalityRow> rows;
};

/// c_eps = c* (1 + eps delta) renormalized to E c_eps(tau) = 1.
std::function<double(double)> perturbed_scaling(const ChangePointSpec& spec, const ScalingProfile& prof,
                                                const Perturbation& p);
MinimalityReport minimality_experiment(const ChangePointSpec& spec, const SimConfig& cfg,
                                       const std::vector<Perturbation>& perturbations);

struct ReplicationLevel {
    int n_steps;
    double rms;
    double max_abs;
    double pasting_max_error;  // max |phi* - pasted form| / max(1, |phi*|)
    std::int64_t flagged;
};

struct ReplicationReport {
    std::vector<ReplicationLevel> levels;
    std::vector<double> ratios;  // rms[i] / rms[i+1]
    bool exactness_claimed;      // continuous regimes only
};

/// Wealth x + sum phi*(t_k)(S_{k+1} - S_k) along p; returns -f'(lambda Z*_T) - wealth_T.
/// Also accumulates the pasting error into *pasting_error when given.
double replicate_path(const PathSimulator& sim, const WealthProblem& prob, PathBundle& p,
                      double* pasting_error = nullptr);
ReplicationReport replicate_wealth(const ChangePointSpec& spec, const WealthProblem& prob, const SimConfig& cfg,
                                   const std::vector<int>& steps = {64, 256, 1024, 4096});

}  // namespace fdemm
