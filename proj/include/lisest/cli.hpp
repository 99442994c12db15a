#ifndef LISEST_CLI_HPP
#define LISEST_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lisest/model_io.hpp"

namespace lisest::cli {

enum ExitCode : int {
  kSuccess = 0,       ///< success or verdict yes
  kUsageError = 1,    ///< bad flags, config or model
  kVerdictNo = 2,
  kInconclusive = 3,
};

/// Everything a run depends on.  Serialized into each run's metadata.json;
/// passing that file back with --config replays the run.
struct RunConfig {
  std::string command;
  std::string model_path;
  std::string generate;
  std::uint64_t seed = 1;
  std::string out = "lisest-out";
  /// Steps; -1 selects the command default (500, or 25 for markov-verify).
  int horizon = -1;
  int trials = 500;
  std::string policy = "out";
  double tol = 1e-12;
  int max_iter = 10000;
  int threads = 0;
  std::vector<std::string> estimators{"distributed", "centralized"};
  std::string noise = "uniform";
  double p0_scale = 1.0;
  /// Steady checkpoint supplying gains for the steady estimator.
  std::string steady_path;
  /// Starting P_bar(1) = init_scale * I for the steady solver (default Q).
  std::optional<double> init_scale;
  /// Coupling scales for the stability sweep.
  std::vector<double> sweep;
  /// markov-verify: use the closed-loop error blocks instead of A(k).
  bool closed_loop = false;

  int horizon_or(int fallback) const { return horizon >= 0 ? horizon : fallback; }
};

Json to_json(const RunConfig& config);
/// Accepts either a bare config object or a metadata document holding one
/// under "config".
RunConfig config_from_json(const Json& doc);

/// Parsed generator spec: a kind followed by key=value pairs, e.g.
/// "power-system s=10 M=500 horizon=500".
struct GeneratorSpec {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> params;

  std::optional<std::string> get(const std::string& key) const;
};
GeneratorSpec parse_generator(const std::string& text);

/// Builds the model named by --model or --generate.
LisModel build_model(const RunConfig& config);

/// Parses argv into a config (config file first, then flags).  Returns
/// nullopt after printing help.  Throws std::invalid_argument on bad input.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, std::ostream& out);

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_stability(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_steady(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_markov_verify(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Entry point of the lisest binary.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lisest::cli

#endif  // LISEST_CLI_HPP
