#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "heatlab/feynman_kac_types.hpp"
#include "heatlab/geometry.hpp"

namespace heatlab {

/// One resolved invocation: subcommand, problem description, parameters.
/// Round-trips losslessly through JSON.
struct RunConfig {
    std::string subcommand;
    nlohmann::json problem;  // {"preset": name, ...} or an expression-field spec
    nlohmann::json params;   // subcommand-specific parameters
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    int threads = 0;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

/// Build a chart-local problem from a config fragment (named preset or
/// expression fields). Throws ConfigError / ParseError / ArityError.
LaplaceProblem build_problem(const nlohmann::json& spec);

/// Extended flat-space problem for the Monte Carlo subcommands.
FlatProblem build_flat_problem(const nlohmann::json& spec);

nlohmann::json matrix_to_json(const CMat& m);
CMat matrix_from_json(const nlohmann::json& j);

/// Execute a config: writes result artifacts plus a manifest into
/// config.output_dir and returns the process exit code (0 ok, 2 config error,
/// 3 numerical failure, 4 verification check failure).
int run(const RunConfig& config);

}  // namespace heatlab
