#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace codvar {

enum class VarSign { Free, NonNeg };

// Sparse row: (column, coefficient) pairs.
using LpRow = std::vector<std::pair<int, double>>;

struct LinearProgram {
  std::vector<VarSign> sign;
  std::vector<double> cost;  // objective coefficients (minimize); all zero means feasibility
  std::vector<std::string> names;
  std::vector<LpRow> eq_rows;
  std::vector<double> eq_rhs;
  std::vector<std::string> eq_names;
  std::vector<LpRow> le_rows;
  std::vector<double> le_rhs;
  std::vector<std::string> le_names;

  int add_var(VarSign s, double c = 0.0, std::string name = {});
  int add_eq(LpRow row, double rhs, std::string name = {});
  int add_le(LpRow row, double rhs, std::string name = {});
  std::size_t num_vars() const { return sign.size(); }
  bool has_objective() const;
  void validate() const;  // throws std::invalid_argument
};

enum class LpStatus { Feasible, Infeasible, Unbounded, NumericalFailure };

const char* to_string(LpStatus s);

struct LpOutcome {
  LpStatus status = LpStatus::NumericalFailure;
  std::vector<double> x;        // primal point (Feasible)
  double objective = 0.0;
  std::vector<double> farkas_eq;  // Infeasible: free multipliers of equality rows
  std::vector<double> farkas_le;  // Infeasible: nonnegative multipliers of <= rows
  std::vector<double> ray;        // Unbounded
  int iterations = 0;
  double residual = 0.0;  // worst violation found during re-validation
  std::string message;
};

struct LpOptions {
  double pivot_tol = 1e-9;
  double feas_tol = 1e-9;
  int max_iterations = 200000;
};

LpOutcome solve(const LinearProgram& p, const LpOptions& opt = {});

// Independent re-substitution checks.
double primal_violation(const LinearProgram& p, const std::vector<double>& x);
// Returns the worst violation of the Farkas conditions after scaling so that b^T y = -1;
// a negative return means the vector does not certify anything.
double farkas_violation(const LinearProgram& p, const std::vector<double>& y_eq,
                        const std::vector<double>& y_le);

void write_lp(std::ostream& os, const LinearProgram& p);
LinearProgram read_lp(std::istream& is);

}  // namespace codvar
