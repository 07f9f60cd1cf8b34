#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "croftonkit/curvature.hpp"
#include "croftonkit/io.hpp"

namespace croftonkit {

/// Bad command line or configuration; the CLI exits with status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Raised for --help; carries the usage text. Exit status 0.
class HelpRequested : public Error {
 public:
  using Error::Error;
};

const std::vector<std::string>& command_names();

struct RunConfig {
  std::string command;
  json body = json{{"kind", "sphere"}, {"dim", 3}};
  std::vector<json> patches;
  std::uint64_t samples = 1'000'000;
  std::uint64_t pairs = 1'000'000;
  std::uint64_t points = 10'000;
  std::uint64_t seed = 42;
  unsigned workers = 0;
  int dim = 3;
  int cells = 48;
  int sectors = 8;
  std::vector<double> d_grid{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  std::vector<double> t_grid{-0.5, 0.0, 0.5};
  std::vector<double> eps_grid;
  std::vector<int> dims{8, 16, 32, 64};
  std::vector<double> point;
  std::vector<double> direction;
  CertificateThresholds thresholds;
  std::string output;
};

json to_json(const RunConfig& config);
/// Config-file form; unknown keys are rejected.
RunConfig config_from_json(const json& j);

/// Default worker count: CROFTONKIT_WORKERS when set, else hardware threads.
unsigned default_workers();

/// Parses argv (including the program name). Values from --config are read
/// first and explicit flags override them.
RunConfig parse_config(const std::vector<std::string>& args);

/// Runs one command and packages its results. Never touches the filesystem
/// except to read mesh bodies.
ReportEnvelope run_command(const RunConfig& config);

/// Full CLI entry point: parse, run, emit. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace croftonkit
