#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace conalign::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kConvergence = 3, kIo = 4 };

struct Options {
  std::vector<std::string> inputs;
  std::vector<std::string> truth;
  std::string output = "conalign_out";
  std::string domain = "interval:200";
  std::uint64_t seed = 1;
  double step_size = 0.0;
  double epsilon = 0.0;
  int basis_size = 0;
  int max_iters = 200;
  bool multires = false;
  int threads = 0;
  bool assert_thresholds = false;
  int subjects = 10;
  int knots = 3;
  double bandwidth = 0.0;
  double amplitude = 0.15;
  bool invert = true;
};

int cmd_simulate(const Options& o);
int cmd_register(const Options& o);
int cmd_template(const Options& o);
int cmd_evaluate(const Options& o);
int cmd_experiment(const Options& o);

/// Parses argv, dispatches and maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace conalign::cli
