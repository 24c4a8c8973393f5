#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "codvar/config.hpp"

namespace codvar::cli {

// Process exit codes.
enum ExitCode : int {
  kHold = 0,
  kInputError = 1,
  kFail = 10,
  kInconclusive = 20,
  kIterationCap = 30,
};

struct Overrides {
  std::optional<double> tol;
  std::vector<std::size_t> cells;
  std::optional<int> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<bool> refine;
  bool energy = false;
};

struct Request {
  std::string command;  // verify | solve | noether
  std::string config;   // path
  Overrides overrides;
  std::string out_dir;  // empty: no files
};

// Runs one command, prints a report to `out` and errors to `err`, and returns the exit code.
int run(const Request& req, std::ostream& out, std::ostream& err);

// Same on an already loaded config (overrides are not applied).
int run_verify(const ProblemConfig& cfg, const std::string& out_dir, std::ostream& out);
int run_solve(const ProblemConfig& cfg, const std::string& out_dir, std::ostream& out);
int run_noether(const ProblemConfig& cfg, bool energy, const std::string& out_dir, std::ostream& out);

ProblemConfig apply_overrides(ProblemConfig cfg, const Overrides& o);

int exit_code(Verdict v);

}  // namespace codvar::cli
