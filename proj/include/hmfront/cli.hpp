#pragma once

// Batch front-end: `hmfront moments|front|verify|quality [options]`.
//
// Every command writes its results once, after all solves finished, into the
// output directory. JSON outputs carry a schema_version field and, for a
// fixed seed and configuration, are byte-identical across runs and worker
// counts.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmfront/problem.hpp"

namespace hmfront {

enum class ExitCode : int {
  ok = 0,
  input_error = 2,
  solve_failure = 3,
  verification_failure = 4,
  measure_undefined = 5,
};

inline constexpr int kSchemaVersion = 1;

struct SyntheticSpec {
  int assets = 3;
  int periods = 250;
  std::uint64_t seed = 0;
  double level = 0.3;
};

struct RunConfig {
  std::string command;
  std::string input_path;
  std::optional<SyntheticSpec> synthetic;
  std::string method = "epsilon";
  /// Method-specific settings, checked against the method's schema.
  nlohmann::json method_params = nlohmann::json::object();
  std::vector<Objective> objectives{Objective::mean, Objective::variance, Objective::skewness};
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output_dir = ".";
  bool gnuplot = false;
  /// moments: also write the full coskewness and cokurtosis matrices.
  bool full_tensors = false;
  /// quality: the front to measure, default <output_dir>/front.csv.
  std::string front_path;
  /// quality: a front CSV used as the reference instead of a fresh sweep.
  std::string reference_path;
};

/// Methods accepted by `front`.
const std::vector<std::string>& front_methods();

/// Parses arguments (argv[0] is the program name), runs the command and
/// returns one of the ExitCode values. Diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hmfront
