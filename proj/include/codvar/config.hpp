#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "codvar/codiff.hpp"
#include "codvar/descent.hpp"
#include "codvar/grid.hpp"
#include "codvar/optimality.hpp"

namespace codvar {

// Input error with a source location (line 0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string file, std::size_t line, const std::string& msg);
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// Cells whose centers lie in the box [lower, upper] get one of:
// a fixed a = 0 face vertex index, a fixed point v, or points cycled cell by cell.
struct SelectionRegion {
  Vec lower, upper;
  std::optional<std::size_t> vertex;
  std::vector<Vec> points;
};

struct SelectionPattern {
  std::size_t default_vertex = 0;  // for cells outside every region
  std::vector<SelectionRegion> regions;
};

// Field given by per-component expressions in x, or by a nodal CSV file.
struct FieldSource {
  std::vector<std::string> expressions;
  std::string file;
  bool empty() const { return expressions.empty() && file.empty(); }
};

struct RunSettings {
  CheckOptions check;
  descent::DescentParams descent;
  std::string start = "boundary";  // solve start: boundary | zero | random | expression
  bool refine = true;              // re-run at doubled resolution after a failing verdict
  bool energy = false;             // noether command: also run the energy check
  std::string h_star;              // nonholonomic: CQ report field
  std::vector<std::size_t> mass_tests;  // nonholonomic: zigzag test field lengths
  double mass_anchor = 0.0;        // zigzags end at the last node at or before this coordinate
};

struct ProblemConfig {
  std::string path;
  Vec lower, upper;
  std::vector<std::size_t> cells;
  std::size_t m = 1;
  std::string integrand;
  FieldSource boundary;  // u0
  FieldSource field;     // field to verify (defaults to the boundary expressions)
  std::string g0;
  std::vector<std::string> g_ineq, g_eq;
  std::vector<std::pair<std::string, double>> isoperimetric;
  std::vector<std::string> nonholonomic;
  std::map<std::string, SelectionPattern> selections;
  BoundarySelections boundary_selection;
  RunSettings run;
};

ProblemConfig load_config(const std::string& path);
ProblemConfig parse_config(const std::string& text, const std::string& path = "<string>");

// Copy with every axis refined to `cells` (one entry per axis, or one entry for all axes).
ProblemConfig with_cells(ProblemConfig cfg, const std::vector<std::size_t>& cells);

Grid build_grid(const ProblemConfig& cfg);
VariationalProblem build_problem(const ProblemConfig& cfg);
DiscreteField build_field(const ProblemConfig& cfg, const Grid& g, const FieldSource& src);
// The field checked by verify / noether.
DiscreteField verify_field(const ProblemConfig& cfg, const Grid& g);

// Per-cell selection over the given hyper polytopes (one per cell).
CellSelection resolve_selection(const SelectionPattern& pat, const Grid& g, const std::vector<Polytope>& hyper);
// Named pattern or the all-default pattern when absent.
const SelectionPattern& pattern_or_default(const ProblemConfig& cfg, const std::string& name);

}  // namespace codvar
