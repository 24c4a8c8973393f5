#pragma once

// Shared LP assembly for the Euler-Lagrange type inclusions. Not installed.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "codvar/codiff.hpp"
#include "codvar/grid.hpp"
#include "codvar/lp.hpp"
#include "codvar/optimality.hpp"

namespace codvar::detail {

struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  void add(int var, double c) {
    if (c != 0.0) terms.emplace_back(var, c);
  }
  void add_scaled(const LinExpr& e, double s) {
    for (auto [v, c] : e.terms) add(v, c * s);
    constant += e.constant * s;
  }
  double eval(const std::vector<double>& x) const {
    double s = constant;
    for (auto [v, c] : terms) s += c * x[static_cast<std::size_t>(v)];
    return s;
  }
};

// Merges duplicate columns and drops zeros.
LpRow compress(const std::vector<std::pair<int, double>>& terms);
// Adds `e == rhs` with the constant moved to the right-hand side.
int add_eq(LinearProgram& lp, const LinExpr& e, double rhs, std::string name);

// Convex (or scaled) combination over the a = 0 face of P: returns the variables and adds
// the normalization row sum(beta) = 1 (scale < 0) or sum(beta) = x[scale].
std::vector<int> face_combination(LinearProgram& lp, const Polytope& P, int scale, const std::string& tag,
                                  std::vector<std::size_t>* face = nullptr);

// Per-cell vector V_c = (v1, v2) built from polytope combinations and constant shifts, plus the
// weak Euler-Lagrange rows  avg(V1)_n - (div V2)_n = 0  at every node that carries a row.
class ElSystem {
 public:
  ElSystem(const Grid& g, std::size_t m);

  LinearProgram lp;
  std::vector<std::vector<LinExpr>> V;  // per cell, m + m*d entries

  std::vector<int> add_polytope(std::size_t c, const Polytope& P, int scale, const std::string& tag);
  // Adds v (length m + m*d) times 1 (scale < 0) or times x[scale].
  void add_shift(std::size_t c, const Vec& v, int scale);

  // Interior-node rows. With free ends (1D) rows are added at the end nodes too and
  // the endpoint flux variables zeta_alpha / zeta_beta (m each) enter them.
  void add_node_rows(bool free_ends = false);
  const std::vector<int>& zeta_alpha() const { return za_; }
  const std::vector<int>& zeta_beta() const { return zb_; }
  // Row indices of node n (component i); -1 when absent.
  int node_row(std::size_t n, std::size_t i) const { return node_rows_[n * m_ + i]; }

  Vec flux(const std::vector<double>& x) const;  // cells * m * d
  Vec nodal_v1(const std::vector<double>& x) const;  // lumped nodal average of V1
  // Max |avg(V1)_n - div(zeta)_n| over interior nodes.
  double el_residual(const std::vector<double>& x) const;

  const Grid& grid() const { return g_; }
  std::size_t m() const { return m_; }

 private:
  Grid g_;
  std::size_t m_;
  std::vector<int> za_, zb_;
  std::vector<int> node_rows_;
};

// ---- shared checker helpers -------------------------------------------

void check_field(const VariationalProblem& p, const DiscreteField& u);
void check_boundary_values(const VariationalProblem& p, const DiscreteField& u);
// Hyper selection point of a cell; must lie on the a = 0 face.
Vec hyper_point(const Codifferential& cd, const CellSelection& sel, std::size_t c);
void check_selection_size(const CellSelection& sel, std::size_t cells);
// Solves cert.lp and sets the verdict from the LP status; returns the outcome.
LpOutcome run_lp(Certificate& cert, const CheckOptions& opt);
double max_abs(const Vec& v);
// Fills zeta, div zeta and the relative inclusion residual; downgrades to Inconclusive on failure.
void fill_flux_witness(Certificate& cert, const ElSystem& el, const Vec& x, const CheckOptions& opt);
void append_selection(Vec& out, const Vec& v);

}  // namespace codvar::detail
