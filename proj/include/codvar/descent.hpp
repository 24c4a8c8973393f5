#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "codvar/grid.hpp"
#include "codvar/lp.hpp"
#include "codvar/optimality.hpp"

namespace codvar::descent {

struct DescentParams {
  double radius = 1.0;  // initial trust radius
  double shrink = 0.5;
  double grow = 2.0;
  int max_iterations = 200;
  double eps_stat = 1e-9;     // stationary when the best model decrease per unit radius is above -eps_stat
  std::size_t vertex_cap = 16;  // hyper-vertex choices per iteration
  double target = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  double min_radius = 1e-13;
  double accept_ratio = 0.1;
  double grow_ratio = 0.75;
  LpOptions lp;

  void validate() const;  // throws std::invalid_argument
};

enum class StopReason { Stationary, Target, IterationCap, RadiusCollapse, LpFailure };
const char* to_string(StopReason r);

struct TraceRow {
  int iter = 0;
  double value = 0.0;           // objective after the iteration
  double model_decrease = 0.0;  // best model value (negative is a predicted decrease)
  double actual_decrease = 0.0; // I(u + h) - I(u) for the trial step
  double radius = 0.0;          // radius used for the trial step
  bool accepted = false;
  std::size_t candidates = 0;
};

struct DescentResult {
  DiscreteField u;
  double value = 0.0;
  StopReason reason = StopReason::IterationCap;
  std::vector<TraceRow> trace;
  std::string message;
  CellSelection last_selection;  // hyper selection of the best model at the last iteration
};

// Trust-region codifferential descent for an unconstrained problem with fixed boundary nodes.
DescentResult solve(const VariationalProblem& p, const DiscreteField& u0, const DescentParams& params = {});

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace codvar::descent
