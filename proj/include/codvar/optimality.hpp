#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "codvar/codiff.hpp"
#include "codvar/expr.hpp"
#include "codvar/grid.hpp"
#include "codvar/lp.hpp"

namespace codvar {

struct IsoperimetricConstraint {
  Expr f;
  double theta = 0.0;
};

struct VariationalProblem {
  Expr integrand;
  Grid grid;
  std::size_t m = 1;
  // Boundary data; only boundary nodes are read. Ignored by boundary-function problems.
  DiscreteField u0;
  // Boundary functions of (u(alpha), u(beta)), 1D only.
  std::optional<Expr> g0;
  std::vector<Expr> g_ineq;
  std::vector<Expr> g_eq;
  std::vector<IsoperimetricConstraint> isoperimetric;
  std::vector<Expr> nonholonomic;

  enum class Family { None, Boundary, Isoperimetric, Nonholonomic };
  Family family() const;
  Dims dims() const { return {grid.dim(), m}; }
  // Throws std::invalid_argument on inconsistent dimensions or mixed constraint families.
  void validate() const;
};

enum class Verdict { ConditionsHold, ConditionsFail, Inconclusive };
const char* to_string(Verdict v);

struct LpStats {
  std::size_t vars = 0, eq_rows = 0, le_rows = 0;
  int iterations = 0;
  double residual = 0.0;  // LP re-substitution residual
  double seconds = 0.0;
};

struct Witness {
  Vec zeta;      // cell flux, cells * m * d (row-major m x d per cell)
  Vec div_zeta;  // nodal, boundary nodes 0
  Vec zeta_ends;  // 1D boundary problems: zeta(alpha), zeta(beta)
  Vec lambda;     // inequality / isoperimetric multipliers, or per-cell densities
  Vec mu_lower, mu_upper;
  Vec beta;  // hypo face coefficients, concatenated per cell (Noether checks)
  double residual = 0.0;  // independent re-check of the inclusion rows
  double complementarity = 0.0;
  std::optional<double> energy;  // conservation constant c
};

struct Certificate {
  Verdict verdict = Verdict::Inconclusive;
  std::string condition;
  std::string resolution;
  std::string reason;
  Witness witness;
  Vec farkas_eq, farkas_le;
  double farkas_check = -1.0;  // farkas_violation of the stored vector, < 0 if absent
  Vec selection;               // hyper selection points used, per cell (a, v) concatenated
  LpStats stats;
  LinearProgram lp;
};

void write_certificate(std::ostream& os, const Certificate& c);

struct CheckOptions {
  double tol_lp = 1e-9;
  double tol_active = 1e-8;
  double tol_comp = 1e-8;
  LpOptions lp;
};

// ---- selections -------------------------------------------------------

// Point (a, v) of conv(P) for convex coefficients over P's vertices.
AffinePiece selection_point(const Polytope& P, const Vec& coeffs);
// Per-cell vertex choice: idx[c] indexes the a = 0 face of the cell's hyperdifferential.
CellSelection select_face_vertices(const std::vector<Codifferential>& cells, const std::vector<std::size_t>& idx);
// Per-cell hyper selection from explicit points v (a = 0); throws if a point is outside.
CellSelection select_points(const std::vector<Codifferential>& cells, const std::vector<Vec>& points,
                            double tol = 1e-9);
CellSelection first_face_vertex(const std::vector<Codifferential>& cells);
// All region-constant face-vertex patterns (first `bound` in lexicographic order).
// region[c] in [0, regions); a region's choice k picks face vertex k mod (face size).
std::vector<CellSelection> enumerate_vertex_patterns(const std::vector<Codifferential>& cells,
                                                     const std::vector<std::size_t>& region,
                                                     std::size_t regions, std::size_t bound);

// ---- unconstrained ----------------------------------------------------

Certificate check_unconstrained(const VariationalProblem& p, const DiscreteField& u, const CellSelection& hyper_sel,
                                const CheckOptions& opt = {});

// ---- boundary constraints (d = 1) ---------------------------------------

// Points in R^{2m} over (u(alpha), u(beta)); empty vectors pick the first a = 0 face vertex.
struct BoundarySelections {
  Vec s0;               // in the hyper face of g0
  std::vector<Vec> s;   // hyper face of g_ineq then g_eq
  std::vector<Vec> r;   // hypo face of g_eq
};

struct BoundaryData {
  Point point;  // ua, ub
  std::optional<ValueCodiff> g0;
  std::vector<ValueCodiff> g_ineq, g_eq;
  std::vector<bool> active;  // per inequality
};

BoundaryData boundary_data(const VariationalProblem& p, const DiscreteField& u, const CheckOptions& opt = {});

struct CqReport {
  bool holds = false;
  std::string failed;  // which test found a point
  Vec point;           // the intersection point found
  std::size_t lps = 0;
};

// Does conv(piece) meet cone{-q : q in cone_gen}? (An empty generator list gives the cone {0}.)
bool hull_meets_cone(const std::vector<Vec>& piece, const std::vector<Vec>& cone_gen, Vec* point = nullptr,
                     const LpOptions& lpo = {});

CqReport check_cq_boundary(const VariationalProblem& p, const DiscreteField& u, const BoundarySelections& sel,
                           const CheckOptions& opt = {});
Certificate check_boundary(const VariationalProblem& p, const DiscreteField& u, const CellSelection& hyper_sel,
                           const BoundarySelections& sel, const CheckOptions& opt = {});

// ---- isoperimetric ----------------------------------------------------

struct IsoperimetricResult {
  bool cq_holds = false;
  Certificate cq;   // Feasible CQ LP means the qualification fails
  Certificate optimality;
  std::vector<std::size_t> active;
};

// hyper_sels[0] is for the objective, hyper_sels[i] for constraint i.
IsoperimetricResult check_isoperimetric(const VariationalProblem& p, const DiscreteField& u,
                                        const std::vector<CellSelection>& hyper_sels, const CheckOptions& opt = {});

// ---- nonholonomic -----------------------------------------------------

struct ConvexifiedProblem {
  Grid grid;
  std::size_t m = 1;
  std::vector<Codifferential> f_cells;  // (u, xi) codifferentials of f
  std::vector<Vec> f_shift;             // per-cell hyper selection (v part)
  std::vector<std::vector<Codifferential>> g_cells;  // per constraint
  std::vector<std::vector<Vec>> g_shift;
  std::vector<Vec> g_values;  // per constraint per cell

  // Convex objective J(h) = sum_c w_c [Phi_f(h_c) + <w_c, (hbar_c, grad h_c)>].
  double objective(const DiscreteField& h) const;
  // phi_i on cell c: g + Phi_g + <z, (hbar, grad h)>.
  double phi(std::size_t i, std::size_t c, const DiscreteField& h) const;
  // Nodal version used for the measure pairing: mean over adjacent cells with h_n in place of hbar.
  double nodal_phi(std::size_t i, std::size_t n, const DiscreteField& h) const;
  // max over constraints and cells of phi_i(h*).
  double cq_report(const DiscreteField& h_star) const;
};

ConvexifiedProblem convexify_nonholonomic(const VariationalProblem& p, const DiscreteField& u,
                                          const CellSelection& f_sel, const std::vector<CellSelection>& g_sels);

Certificate check_nonholonomic_regular(const VariationalProblem& p, const DiscreteField& u,
                                       const CellSelection& f_sel, const std::vector<CellSelection>& g_sels,
                                       const CheckOptions& opt = {});

struct MassResult {
  LpStatus status = LpStatus::NumericalFailure;
  double mass = 0.0;  // +inf when no nonnegative nodal measure satisfies the rows
  Vec nu;             // per constraint per node
};

// min sum nu  s.t.  J(h_k) + sum_{i,n} nu_{i,n} nodal_phi_i(n, h_k) >= 0 for every test field h_k,
// nu >= 0 and nu = 0 where the constraint is inactive.
MassResult min_total_mass(const ConvexifiedProblem& cp, const std::vector<DiscreteField>& tests,
                          const CheckOptions& opt = {});

// "NxM" / "N" description of a grid.
std::string resolution_of(const Grid& g);

}  // namespace codvar
