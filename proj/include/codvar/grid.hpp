#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "codvar/codiff.hpp"
#include "codvar/expr.hpp"

namespace codvar {

// Uniform tensor grid on an interval (d = 1) or rectangle (d = 2).
// Nodes and cells are numbered with the first axis fastest.
class Grid {
 public:
  Grid() = default;
  Grid(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> cells);

  std::size_t dim() const { return lo_.size(); }
  double lo(std::size_t a) const { return lo_[a]; }
  double hi(std::size_t a) const { return hi_[a]; }
  std::size_t cells(std::size_t a) const { return n_[a]; }
  double h(std::size_t a) const { return (hi_[a] - lo_[a]) / static_cast<double>(n_[a]); }
  std::size_t num_cells() const;
  std::size_t num_nodes() const;
  std::size_t nodes_per_cell() const { return dim() == 1 ? 2 : 4; }

  // Local order: 1D [left, right]; 2D [(i,j), (i+1,j), (i,j+1), (i+1,j+1)].
  std::vector<std::size_t> cell_nodes(std::size_t c) const;
  Vec node_coord(std::size_t n) const;
  Vec cell_center(std::size_t c) const;
  double cell_weight(std::size_t c) const;
  double node_weight(std::size_t n) const;  // lumped: sum of adjacent cell weights / nodes_per_cell
  bool on_boundary(std::size_t n) const;
  // d x nodes_per_cell matrix: gradient of the cell = G * local nodal values.
  Matrix local_gradient() const;
  // Cells adjacent to node n with the node's local index in each.
  std::vector<std::pair<std::size_t, std::size_t>> node_cells(std::size_t n) const;

 private:
  std::vector<double> lo_, hi_;
  std::vector<std::size_t> n_;
};

struct DiscreteField {
  std::size_t m = 1;
  Vec values;  // node-major: values[n * m + i]

  static DiscreteField zeros(const Grid& g, std::size_t m);
  double operator()(std::size_t n, std::size_t i) const { return values[n * m + i]; }
  double& operator()(std::size_t n, std::size_t i) { return values[n * m + i]; }
};

// Samples f(x) for each component at the nodes.
DiscreteField sample(const Grid& g, std::size_t m, const std::function<double(const Vec&, std::size_t)>& f);

// Cell gradients, cells * m * d entries (row-major m x d per cell).
Vec gradient(const Grid& g, const DiscreteField& u);
Vec cell_average(const Grid& g, const DiscreteField& u, std::size_t c);
// Negative adjoint of `gradient` under the cell and lumped nodal quadratures.
// flux has cells * m * d entries; result is nodal (nodes * m) with boundary nodes set to 0.
Vec divergence(const Grid& g, std::size_t m, const Vec& flux);

// Linear map from local nodal dofs (node-major, nodes_per_cell * m) to (u_bar, xi) with xi row-major.
Matrix local_map(const Grid& g, std::size_t m);

Point cell_point(const Grid& g, const DiscreteField& u, std::size_t c);

double assemble_value(const Expr& e, const Grid& g, const DiscreteField& u);

// Per-cell convex coefficients over the vertices of a polytope family.
struct CellSelection {
  std::vector<Vec> coeffs;
};

struct DiscreteFunctional {
  Grid grid;
  std::size_t m = 1;
  std::vector<Codifferential> cells;  // in (u, xi) block form
  Vec values;
  Vec weights;

  // Cell codifferential expressed in local nodal dofs.
  Codifferential local(std::size_t c) const;
  // Sum of w_c a_c and the induced linear form for a hypo selection (A and the nodal x*).
  std::pair<double, Vec> induced_hypo(const CellSelection& s) const;
};

DiscreteFunctional assemble_codifferential(const Expr& e, const Grid& g, const DiscreteField& u);

double functional_directional_derivative(const DiscreteFunctional& F, const DiscreteField& h);

// Number of worker threads (CODVAR_THREADS, default 1).
std::size_t thread_count();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

void write_field_csv(std::ostream& os, const Grid& g, const DiscreteField& u);
DiscreteField read_field_csv(std::istream& is, const Grid& g);
std::string format_double(double v);

}  // namespace codvar
