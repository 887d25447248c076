#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdemm/changepoint.hpp"
#include "fdemm/mc_sim.hpp"

namespace fdemm::cli {

using Json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kInfeasible = 2, kConfig = 3, kVerifyFailed = 4 };

struct VerifyOptions {
    int perturbations = 20;
    double epsilon = 0.05;
    std::int64_t replication_paths = 2000;
    std::vector<int> replication_steps{64, 256, 1024};
    double scaling_multiplier = 1.0;  // != 1 deliberately breaks E c*(tau) = 1
    double z_max = 3.0;
};

struct ModelConfig {
    double horizon = 1.0;
    LevyTriplet pre;
    LevyTriplet post;
    bool post_given = false;
    TauLaw tau = TauLaw::uniform(1.0);
    DivergenceFamily family = DivergenceFamily::entropy();
    std::optional<UtilitySpec> utility;
    std::optional<double> capital;
    SolverOptions solver;
    SimConfig sim;
    VerifyOptions verify;
};

/// Validates against the schema documented in docs/config.md; ConfigError
/// messages carry a $.path location.
ModelConfig parse_config(const Json& j);
ModelConfig load_config(const std::string& path);

/// FDIV_EMM_THREADS caps the worker count when set to a positive integer.
int effective_threads(int requested);

/// "a:b:n" (n points, both ends included) or a comma list.
std::vector<double> parse_grid(const std::string& s);

ChangePointSpec build_spec(const ModelConfig& cfg);

struct ScalingArgs {
    int points = 101;
    ScalingMethod method = ScalingMethod::ClosedForm;
    std::string json_path;  // empty: no report file
};

struct StrategyArgs {
    std::string t_grid;
    std::string s_grid = "1";
    std::string z_grid = "1";
    std::string side = "both";
    std::optional<double> tau;
};

int cmd_solve(const ModelConfig& cfg, std::ostream& out);
int cmd_scaling(const ModelConfig& cfg, const ScalingArgs& args, std::ostream& out);
int cmd_strategy(const ModelConfig& cfg, const StrategyArgs& args, std::ostream& out);
int cmd_verify(const ModelConfig& cfg, std::ostream& out);
/// CSV of the first n simulated paths.
int cmd_paths(const ModelConfig& cfg, std::int64_t n, std::ostream& out);

/// Full program: argument parsing, dispatch and the exit-code contract.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Full-precision decimal used in every CSV cell.
std::string num(double x);

}  // namespace fdemm::cli
