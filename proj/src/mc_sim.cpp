#include "fdemm/mc_sim.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "fdemm/errors.hpp"

namespace fdemm {

namespace {

template <class F>
void for_each_path(std::int64_t n, const SimConfig& cfg, bool parallel, F&& f) {
    if (!parallel) {
        for (std::int64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr err;
    const int nt = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            f(i);
        } catch (...) {
#pragma omp critical(fdemm_path_error)
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

void check_config(const SimConfig& cfg) {
    if (cfg.n_paths < 1) throw DomainError("n_paths must be positive");
    if (cfg.n_steps < 1) throw DomainError("n_steps must be positive");
    if (cfg.threads < 0) throw DomainError("threads must be nonnegative");
}

struct MeanSe {
    double mean;
    double se;
};

MeanSe mean_se(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double m = pairwise_sum(v.data(), n) / static_cast<double>(n);
    if (n == 1) return {m, 0.0};
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = (v[i] - m) * (v[i] - m);
    const double var = pairwise_sum(d.data(), n) / static_cast<double>(n - 1);
    return {m, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

PathSimulator::PathSimulator(const ChangePointSpec& spec, ScalingProfile profile)
    : spec_(spec), profile_(std::move(profile)) {
    auto make = [](const MinimalMeasureSolution& sol) {
        Regime r{};
        const LevyTriplet& m = sol.model;
        r.drift = m.b - (m.nu.empty() ? 0.0 : truncated_mean(m.nu));
        r.sigma = std::sqrt(m.c);
        r.intensity = m.nu.empty() ? 0.0 : m.nu.total_mass();
        r.beta = sol.beta_star;
        r.log_rate = 0.5 * sol.beta_star * sol.beta_star * m.c + sol.compensator;
        if (m.nu.kind() == JumpKind::Atoms) {
            double acc = 0.0;
            for (const Atom& a : m.nu.atom_list()) {
                acc += a.mass;
                r.atom_cdf.push_back(acc / r.intensity);
            }
            r.atom_cdf.back() = 1.0;
        }
        r.sol = &sol;
        return r;
    };
    pre_ = make(spec_.sol_pre);
    post_ = make(spec_.sol_post);
}

double PathSimulator::jump_size(const Regime& r, PhiloxStream& s) const {
    const LevyMeasure& nu = r.sol->model.nu;
    switch (nu.kind()) {
        case JumpKind::Atoms: {
            const double u = s.uniform();
            const auto it = std::lower_bound(r.atom_cdf.begin(), r.atom_cdf.end(), u);
            return nu.atom_list()[static_cast<std::size_t>(it - r.atom_cdf.begin())].size;
        }
        case JumpKind::Merton: {
            const MertonJumps& m = nu.merton_params();
            return m.mean + m.stddev * s.normal();
        }
        case JumpKind::Kou: {
            const KouJumps& k = nu.kou_params();
            const double u = s.uniform();
            const double e = s.exponential();
            return u < k.p_up ? e / k.eta_up : -e / k.eta_down;
        }
        case JumpKind::None: break;
    }
    return 0.0;
}

PathBundle PathSimulator::simulate(std::uint64_t seed, std::uint64_t index, int n_steps) const {
    if (n_steps < 1) throw DomainError("n_steps must be positive");
    const double T = spec_.horizon;
    PathBundle p;
    p.index = index;

    PhiloxStream tau_s(seed, RngRole::Tau, index);
    p.tau = std::clamp(spec_.tau.quantile(tau_s.uniform()), 0.0, T);

    PhiloxStream clock(seed, RngRole::JumpClock, index);
    PhiloxStream sizes(seed, RngRole::JumpSize, index);
    auto add_jumps = [&](const Regime& r, Side side, double a, double b) {
        if (!(r.intensity > 0.0)) return;
        double s = a;
        for (;;) {
            s += clock.exponential() / r.intensity;
            if (!(s < b)) break;
            p.jumps.push_back({s, jump_size(r, sizes), side});
        }
    };
    add_jumps(pre_, Side::Pre, 0.0, p.tau);
    add_jumps(post_, Side::Post, p.tau, T);

    p.t.reserve(static_cast<std::size_t>(n_steps) + 2 + p.jumps.size());
    for (int k = 0; k <= n_steps; ++k) p.t.push_back(k == n_steps ? T : T * k / n_steps);
    p.t.push_back(p.tau);
    for (const JumpEvent& j : p.jumps) p.t.push_back(j.t);
    std::sort(p.t.begin(), p.t.end());
    p.t.erase(std::unique(p.t.begin(), p.t.end()), p.t.end());

    const std::size_t N = p.t.size();
    p.X.assign(N, 0.0);
    p.regime.resize(N - 1);
    PhiloxStream bm(seed, RngRole::Brownian, index);
    std::size_t j = 0;
    for (std::size_t k = 0; k + 1 < N; ++k) {
        const Side side = p.tau <= p.t[k] ? Side::Post : Side::Pre;
        const Regime& r = regime(side);
        const double dt = p.t[k + 1] - p.t[k];
        double x = p.X[k] + r.drift * dt;
        if (r.sigma > 0.0) x += r.sigma * std::sqrt(dt) * bm.normal();
        while (j < p.jumps.size() && p.jumps[j].t == p.t[k + 1]) x += p.jumps[j++].y;
        p.X[k + 1] = x;
        p.regime[k] = side;
    }
    return p;
}

void PathSimulator::fill_densities(PathBundle& p) const {
    const std::size_t N = p.t.size();
    p.log_zeta.assign(N, 0.0);
    p.log_zeta_tilde.assign(N, 0.0);
    p.log_Zstar.assign(N, 0.0);
    p.flagged = false;
    const double log_c = std::log(profile_(p.tau));

    double drift_cum = 0.0, jump_cum = 0.0, xc_prev = 0.0;
    double lz = 0.0, lzt = 0.0;
    std::size_t j = 0;
    p.log_Zstar[0] = log_c;
    for (std::size_t k = 0; k + 1 < N; ++k) {
        const Side side = p.regime[k];
        const Regime& r = regime(side);
        const double dt = p.t[k + 1] - p.t[k];
        drift_cum += r.drift * dt;
        double log_y = 0.0;
        while (j < p.jumps.size() && p.jumps[j].t == p.t[k + 1]) {
            const JumpEvent& e = p.jumps[j++];
            jump_cum += e.y;
            const double y = r.sol->Y_star(e.y);
            log_y += y > 0.0 ? std::log(y) : -std::numeric_limits<double>::infinity();
        }
        // continuous martingale part: X minus jumps minus drift
        const double xc = p.X[k + 1] - drift_cum - jump_cum;
        const double inc = r.beta * (xc - xc_prev) - r.log_rate * dt + log_y;
        xc_prev = xc;
        if (side == Side::Pre) {
            lz += inc;
        } else {
            lzt += inc;
        }
        p.log_zeta[k + 1] = lz;
        p.log_zeta_tilde[k + 1] = lzt;
        p.log_Zstar[k + 1] = log_c + lz + lzt;
        if (!(p.log_Zstar[k + 1] >= kLogUnderflow)) p.flagged = true;
    }
}

TerminalSummary PathSimulator::summary(const PathBundle& p) const {
    TerminalSummary s;
    s.tau = p.tau;
    s.X_T = p.X.back();
    s.log_z = p.log_zeta.back() + p.log_zeta_tilde.back();
    s.log_Zstar = p.log_Zstar.back();
    s.n_jumps = static_cast<int>(p.jumps.size());
    s.flagged = p.flagged;
    return s;
}

PathBundle simulate_path(const ChangePointSpec& spec, const SimConfig& cfg, std::uint64_t index) {
    const PathSimulator sim(spec, scaling_profile(spec));
    PathBundle p = sim.simulate(cfg.master_seed, index, cfg.n_steps);
    sim.fill_densities(p);
    return p;
}

std::vector<PathBundle> simulate(const ChangePointSpec& spec, const SimConfig& cfg) {
    check_config(cfg);
    const PathSimulator sim(spec, scaling_profile(spec));
    std::vector<PathBundle> out(static_cast<std::size_t>(cfg.n_paths));
    for_each_path(cfg.n_paths, cfg, cfg.parallel, [&](std::int64_t i) {
        PathBundle p = sim.simulate(cfg.master_seed, static_cast<std::uint64_t>(i), cfg.n_steps);
        sim.fill_densities(p);
        out[static_cast<std::size_t>(i)] = std::move(p);
    });
    return out;
}

void density_along_path(const ChangePointSpec& spec, const ScalingProfile& profile, PathBundle& p) {
    PathSimulator(spec, profile).fill_densities(p);
}

namespace {
std::vector<TerminalSummary> summaries(const PathSimulator& sim, const SimConfig& cfg, bool parallel) {
    check_config(cfg);
    std::vector<TerminalSummary> out(static_cast<std::size_t>(cfg.n_paths));
    for_each_path(cfg.n_paths, cfg, parallel, [&](std::int64_t i) {
        PathBundle p = sim.simulate(cfg.master_seed, static_cast<std::uint64_t>(i), cfg.n_steps);
        sim.fill_densities(p);
        out[static_cast<std::size_t>(i)] = sim.summary(p);
    });
    return out;
}
}  // namespace

std::vector<TerminalSummary> terminal_summaries_serial(const PathSimulator& sim, const SimConfig& cfg) {
    return summaries(sim, cfg, false);
}

std::vector<TerminalSummary> terminal_summaries_parallel(const PathSimulator& sim, const SimConfig& cfg) {
    return summaries(sim, cfg, true);
}

std::vector<TerminalSummary> terminal_summaries(const PathSimulator& sim, const SimConfig& cfg) {
    return summaries(sim, cfg, cfg.parallel);
}

std::string to_string(const Statistic& s) {
    switch (s.kind) {
        case StatKind::ZPower: {
            std::ostringstream os;
            os.precision(17);
            os << "E[Z^" << s.q << "]";
            return os.str();
        }
        case StatKind::ZLogZ: return "E[Z ln Z]";
        case StatKind::NegLogZ: return "E[-ln Z]";
        case StatKind::Z: return "E[Z]";
        case StatKind::ZS: return "E[Z S]";
        case StatKind::FofZ: return "E[f(Z)]";
        case StatKind::QMeanLogZ: return "E_Q[ln Z]";
        case StatKind::JumpCount: return "E[N_T]";
    }
    return "?";
}

std::vector<Estimate> estimate(const PathSimulator& sim, const SimConfig& cfg, const std::vector<Statistic>& stats) {
    const auto sums = terminal_summaries(sim, cfg);
    std::vector<const TerminalSummary*> used;
    used.reserve(sums.size());
    for (const auto& s : sums)
        if (!s.flagged) used.push_back(&s);
    const auto n_flagged = static_cast<std::int64_t>(sums.size() - used.size());
    const DivergenceFamily& f = sim.spec().family;

    std::vector<Estimate> out;
    std::vector<double> v(used.size());
    for (const Statistic& st : stats) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            const TerminalSummary& s = *used[i];
            const double lz = s.log_Zstar;
            switch (st.kind) {
                case StatKind::ZPower: v[i] = std::exp(st.q * lz); break;
                case StatKind::ZLogZ:
                case StatKind::QMeanLogZ: v[i] = std::exp(lz) * lz; break;
                case StatKind::NegLogZ: v[i] = -lz; break;
                case StatKind::Z: v[i] = std::exp(lz); break;
                case StatKind::ZS: v[i] = std::exp(lz + s.X_T); break;
                case StatKind::FofZ: v[i] = f.f(std::exp(lz)); break;
                case StatKind::JumpCount: v[i] = s.n_jumps; break;
            }
        }
        const MeanSe ms = mean_se(v);
        Estimate e{to_string(st), ms.mean, ms.se, static_cast<std::int64_t>(used.size()), n_flagged,
                   static_cast<double>(used.size())};
        if (st.kind == StatKind::QMeanLogZ) {
            std::vector<double> w(used.size()), w2(used.size());
            for (std::size_t i = 0; i < used.size(); ++i) {
                w[i] = std::exp(used[i]->log_Zstar);
                w2[i] = w[i] * w[i];
            }
            const double sw = pairwise_sum(w.data(), w.size());
            e.ess = sw * sw / pairwise_sum(w2.data(), w2.size());
        }
        out.push_back(std::move(e));
    }
    return out;
}

Estimate estimate(const ChangePointSpec& spec, const SimConfig& cfg, const Statistic& stat) {
    const PathSimulator sim(spec, scaling_profile(spec));
    return estimate(sim, cfg, std::vector<Statistic>{stat}).front();
}

double closed_form(const ChangePointSpec& spec, const ScalingProfile& prof, const Statistic& stat) {
    switch (stat.kind) {
        case StatKind::ZPower: return mixture_moment(spec, prof, stat.q);
        case StatKind::ZLogZ:
        case StatKind::QMeanLogZ: return mean_log_density_Q(spec, prof);
        case StatKind::NegLogZ:
            return spec.tau.integrate([&](double t) { return -std::log(prof(t)) + log_term(spec, t); });
        case StatKind::Z:
        case StatKind::ZS: return 1.0;
        case StatKind::FofZ:
            return f_divergence_of_scaling(spec, [&](double t) { return prof(t); });
        case StatKind::JumpCount: {
            const double m0 = spec.pre.nu.empty() ? 0.0 : spec.pre.nu.total_mass();
            const double m1 = spec.post.nu.empty() ? 0.0 : spec.post.nu.total_mass();
            return spec.tau.integrate([&](double t) { return m0 * t + m1 * (spec.horizon - t); });
        }
    }
    return 0.0;
}

namespace {
ChangePointSpec pinned(const ChangePointSpec& spec, double t) {
    if (!(t >= 0.0 && t <= spec.horizon)) throw DomainError("t outside [0, T]");
    ChangePointSpec s = spec;
    s.tau = TauLaw(spec.horizon, {{t, 1.0}}, {});
    return s;
}

template <class G>
Estimate pinned_estimate(const ChangePointSpec& spec, const SimConfig& cfg, double t, std::string name, G g) {
    const ChangePointSpec s = pinned(spec, t);
    const PathSimulator sim(s, scaling_profile(s));
    const auto sums = terminal_summaries(sim, cfg);
    std::vector<double> v;
    v.reserve(sums.size());
    for (const auto& x : sums)
        if (!x.flagged) v.push_back(g(x.log_z));
    const MeanSe ms = mean_se(v);
    return {std::move(name), ms.mean, ms.se, static_cast<std::int64_t>(v.size()),
            static_cast<std::int64_t>(sums.size() - v.size()), static_cast<double>(v.size())};
}
}  // namespace

Estimate conditional_moment_mc(const ChangePointSpec& spec, const SimConfig& cfg, double t, double q) {
    return pinned_estimate(spec, cfg, t, "E[z^q | tau=t]", [q](double lz) { return std::exp(q * lz); });
}

Estimate lambda_t_mc(const ChangePointSpec& spec, const SimConfig& cfg, double t, double c) {
    if (!(c > 0.0)) throw DomainError("lambda_t needs c > 0");
    const DivergenceFamily& f = spec.family;
    return pinned_estimate(spec, cfg, t, "lambda_t", [&](double lz) {
        const double z = std::exp(lz);
        return z * f.f_prime(c * z);
    });
}

std::vector<Perturbation> smooth_perturbations(int n, std::uint64_t seed, double horizon, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("perturbation size must lie in (0, 1)");
    std::vector<Perturbation> out;
    for (int i = 0; i < n; ++i) {
        PhiloxStream s(seed, RngRole::JumpSize, static_cast<std::uint64_t>(i));
        double w[3], ph[3], tot = 0.0;
        for (int k = 0; k < 3; ++k) {
            w[k] = s.uniform() - 0.5;
            ph[k] = 2.0 * M_PI * s.uniform();
            tot += std::abs(w[k]);
        }
        for (double& x : w) x /= tot;
        out.push_back({[=](double t) {
                           double d = 0.0;
                           for (int k = 0; k < 3; ++k) d += w[k] * std::sin((k + 1) * M_PI * t / horizon + ph[k]);
                           return d;
                       },
                       eps});
    }
    return out;
}

std::function<double(double)> perturbed_scaling(const ChangePointSpec& spec, const ScalingProfile& prof,
                                                const Perturbation& p) {
    auto raw = [prof, p](double t) { return prof(t) * (1.0 + p.eps * p.delta(t)); };
    const double norm = spec.tau.integrate(raw);
    return [raw, norm](double t) { return raw(t) / norm; };
}

MinimalityReport minimality_experiment(const ChangePointSpec& spec, const SimConfig& cfg,
                                       const std::vector<Perturbation>& perturbations) {
    const ScalingProfile prof = scaling_profile(spec);
    const auto cstar = [&](double t) { return prof(t); };
    MinimalityReport rep{f_divergence_of_scaling(spec, cstar), {}};
    const PathSimulator sim(spec, prof);
    const auto sums = terminal_summaries(sim, cfg);
    const DivergenceFamily& f = spec.family;
    for (const Perturbation& p : perturbations) {
        const auto ce = perturbed_scaling(spec, prof, p);
        MinimalityRow row{};
        row.F_eps = f_divergence_of_scaling(spec, ce);
        row.margin_closed = row.F_eps - rep.F_star;
        std::vector<double> d;
        d.reserve(sums.size());
        for (const auto& s : sums) {
            if (s.flagged) continue;
            const double z = std::exp(s.log_z);
            d.push_back(f.f(ce(s.tau) * z) - f.f(prof(s.tau) * z));
        }
        const MeanSe ms = mean_se(d);
        row.margin_mc = ms.mean;
        row.margin_mc_se = ms.se;
        row.jensen_bound = f.kind() == FamilyKind::Log
                               ? f.A() * spec.tau.integrate([&](double t) { return -std::log(ce(t)); })
                               : std::numeric_limits<double>::quiet_NaN();
        rep.rows.push_back(row);
    }
    return rep;
}

double replicate_path(const PathSimulator& sim, const WealthProblem& prob, PathBundle& p, double* pasting_error) {
    if (p.log_Zstar.size() != p.t.size()) sim.fill_densities(p);
    const ChangePointSpec& spec = sim.spec();
    const DivergenceFamily& fam = spec.family;
    const std::size_t N = p.t.size();
    p.wealth.assign(N, prob.x);

    std::pair<double, double> BB{1.0, 1.0};
    if (pasting_error) BB = pasted_strategy_factors(spec, prob, p.tau, std::exp(p.log_zeta.back()));

    double S = 1.0;
    for (std::size_t k = 0; k + 1 < N; ++k) {
        S = std::exp(p.X[k]);
        const StrategyState st{p.t[k], p.regime[k], p.tau, S, std::exp(p.log_Zstar[k])};
        const double phi = optimal_phi(spec, prob, st);
        if (pasting_error) {
            const double psi =
                p.regime[k] == Side::Pre
                    ? BB.first * single_regime_phi(spec.sol_pre, fam, prob.x, p.t[k], S, std::exp(p.log_zeta[k]))
                    : BB.second *
                          single_regime_phi(spec.sol_post, fam, prob.x, p.t[k], S, std::exp(p.log_zeta_tilde[k]));
            *pasting_error = std::max(*pasting_error, std::abs(phi - psi) / std::max(1.0, std::abs(phi)));
        }
        p.wealth[k + 1] = p.wealth[k] + phi * (std::exp(p.X[k + 1]) - S);
    }
    const double target = -fam.f_prime(prob.lambda * std::exp(p.log_Zstar.back()));
    return target - p.wealth.back();
}

ReplicationReport replicate_wealth(const ChangePointSpec& spec, const WealthProblem& prob, const SimConfig& cfg,
                                   const std::vector<int>& steps) {
    check_config(cfg);
    const PathSimulator sim(spec, prob.profile);
    ReplicationReport rep;
    rep.exactness_claimed = spec.pre.nu.empty() && spec.post.nu.empty();
    const auto n = static_cast<std::size_t>(cfg.n_paths);
    for (int ns : steps) {
        std::vector<double> err(n), paste(n, 0.0);
        std::vector<char> flag(n, 0);
        for_each_path(cfg.n_paths, cfg, cfg.parallel, [&](std::int64_t i) {
            const auto u = static_cast<std::size_t>(i);
            PathBundle p = sim.simulate(cfg.master_seed, static_cast<std::uint64_t>(i), ns);
            sim.fill_densities(p);
            if (p.flagged) {
                flag[u] = 1;
                return;
            }
            err[u] = replicate_path(sim, prob, p, &paste[u]);
        });
        std::vector<double> sq;
        sq.reserve(n);
        ReplicationLevel lv{ns, 0.0, 0.0, 0.0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            if (flag[i]) {
                ++lv.flagged;
                continue;
            }
            sq.push_back(err[i] * err[i]);
            lv.max_abs = std::max(lv.max_abs, std::abs(err[i]));
            lv.pasting_max_error = std::max(lv.pasting_max_error, paste[i]);
        }
        lv.rms = sq.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : std::sqrt(pairwise_sum(sq.data(), sq.size()) / static_cast<double>(sq.size()));
        rep.levels.push_back(lv);
    }
    for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i)
        rep.ratios.push_back(rep.levels[i].rms / rep.levels[i + 1].rms);
    return rep;
}

}  // namespace fdemm
