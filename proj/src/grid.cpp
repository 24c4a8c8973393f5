#include "codvar/grid.hpp"

#include <algorithm>
#include <charconv>
#include <exception>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

namespace codvar {

Grid::Grid(std::vector<double> lo, std::vector<double> hi, std::vector<std::size_t> cells)
    : lo_(std::move(lo)), hi_(std::move(hi)), n_(std::move(cells)) {
  if (lo_.empty() || lo_.size() > 2) throw std::invalid_argument("grid: dimension must be 1 or 2");
  if (hi_.size() != lo_.size() || n_.size() != lo_.size())
    throw std::invalid_argument("grid: bounds/cells size mismatch");
  for (std::size_t a = 0; a < lo_.size(); ++a) {
    if (n_[a] < 1) throw std::invalid_argument("grid: need at least one cell per axis");
    if (!(hi_[a] > lo_[a])) throw std::invalid_argument("grid: empty interval");
  }
}

std::size_t Grid::num_cells() const {
  std::size_t n = 1;
  for (auto k : n_) n *= k;
  return n;
}

std::size_t Grid::num_nodes() const {
  std::size_t n = 1;
  for (auto k : n_) n *= k + 1;
  return n;
}

std::vector<std::size_t> Grid::cell_nodes(std::size_t c) const {
  if (dim() == 1) return {c, c + 1};
  std::size_t i = c % n_[0], j = c / n_[0];
  std::size_t w = n_[0] + 1;
  return {j * w + i, j * w + i + 1, (j + 1) * w + i, (j + 1) * w + i + 1};
}

Vec Grid::node_coord(std::size_t n) const {
  if (dim() == 1) return {lo_[0] + h(0) * static_cast<double>(n)};
  std::size_t w = n_[0] + 1;
  return {lo_[0] + h(0) * static_cast<double>(n % w), lo_[1] + h(1) * static_cast<double>(n / w)};
}

Vec Grid::cell_center(std::size_t c) const {
  if (dim() == 1) return {lo_[0] + h(0) * (static_cast<double>(c) + 0.5)};
  return {lo_[0] + h(0) * (static_cast<double>(c % n_[0]) + 0.5),
          lo_[1] + h(1) * (static_cast<double>(c / n_[0]) + 0.5)};
}

double Grid::cell_weight(std::size_t) const {
  double w = 1.0;
  for (std::size_t a = 0; a < dim(); ++a) w *= h(a);
  return w;
}

std::vector<std::pair<std::size_t, std::size_t>> Grid::node_cells(std::size_t n) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (dim() == 1) {
    if (n > 0) out.emplace_back(n - 1, 1);
    if (n < n_[0]) out.emplace_back(n, 0);
    return out;
  }
  std::size_t w = n_[0] + 1;
  long i = static_cast<long>(n % w), j = static_cast<long>(n / w);
  for (long dj = -1; dj <= 0; ++dj)
    for (long di = -1; di <= 0; ++di) {
      long ci = i + di, cj = j + dj;
      if (ci < 0 || cj < 0 || ci >= static_cast<long>(n_[0]) || cj >= static_cast<long>(n_[1])) continue;
      std::size_t local = (di == 0 ? 0u : 1u) + (dj == 0 ? 0u : 2u);
      out.emplace_back(static_cast<std::size_t>(cj) * n_[0] + static_cast<std::size_t>(ci), local);
    }
  return out;
}

double Grid::node_weight(std::size_t n) const {
  double w = 0.0;
  for (auto [c, k] : node_cells(n)) w += cell_weight(c);
  return w / static_cast<double>(nodes_per_cell());
}

bool Grid::on_boundary(std::size_t n) const {
  if (dim() == 1) return n == 0 || n == n_[0];
  std::size_t w = n_[0] + 1;
  std::size_t i = n % w, j = n / w;
  return i == 0 || j == 0 || i == n_[0] || j == n_[1];
}

Matrix Grid::local_gradient() const {
  if (dim() == 1) {
    Matrix G(1, 2);
    G(0, 0) = -1.0 / h(0);
    G(0, 1) = 1.0 / h(0);
    return G;
  }
  Matrix G(2, 4);
  double sx = 0.5 / h(0), sy = 0.5 / h(1);
  G(0, 0) = -sx; G(0, 1) = sx; G(0, 2) = -sx; G(0, 3) = sx;
  G(1, 0) = -sy; G(1, 1) = -sy; G(1, 2) = sy; G(1, 3) = sy;
  return G;
}

DiscreteField DiscreteField::zeros(const Grid& g, std::size_t m) {
  return DiscreteField{m, Vec(g.num_nodes() * m, 0.0)};
}

DiscreteField sample(const Grid& g, std::size_t m, const std::function<double(const Vec&, std::size_t)>& f) {
  DiscreteField u = DiscreteField::zeros(g, m);
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    Vec x = g.node_coord(n);
    for (std::size_t i = 0; i < m; ++i) u(n, i) = f(x, i);
  }
  return u;
}

Vec gradient(const Grid& g, const DiscreteField& u) {
  const std::size_t d = g.dim(), m = u.m;
  Matrix G = g.local_gradient();
  Vec out(g.num_cells() * m * d, 0.0);
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    auto nodes = g.cell_nodes(c);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) s += G(j, k) * u(nodes[k], i);
        out[(c * m + i) * d + j] = s;
      }
  }
  return out;
}

Vec cell_average(const Grid& g, const DiscreteField& u, std::size_t c) {
  auto nodes = g.cell_nodes(c);
  Vec avg(u.m, 0.0);
  for (auto n : nodes)
    for (std::size_t i = 0; i < u.m; ++i) avg[i] += u(n, i);
  for (double& a : avg) a /= static_cast<double>(nodes.size());
  return avg;
}

Vec divergence(const Grid& g, std::size_t m, const Vec& flux) {
  const std::size_t d = g.dim();
  if (flux.size() != g.num_cells() * m * d) throw std::invalid_argument("divergence: flux size mismatch");
  Matrix G = g.local_gradient();
  Vec out(g.num_nodes() * m, 0.0);
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    if (g.on_boundary(n)) continue;
    double wn = g.node_weight(n);
    for (auto [c, k] : g.node_cells(n)) {
      double wc = g.cell_weight(c);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += flux[(c * m + i) * d + j] * G(j, k);
        out[n * m + i] -= wc * s / wn;
      }
    }
  }
  return out;
}

Matrix local_map(const Grid& g, std::size_t m) {
  const std::size_t d = g.dim(), nn = g.nodes_per_cell();
  Matrix G = g.local_gradient();
  Matrix M(m + m * d, nn * m);
  for (std::size_t k = 0; k < nn; ++k)
    for (std::size_t i = 0; i < m; ++i) {
      M(i, k * m + i) = 1.0 / static_cast<double>(nn);
      for (std::size_t j = 0; j < d; ++j) M(m + i * d + j, k * m + i) = G(j, k);
    }
  return M;
}

Point cell_point(const Grid& g, const DiscreteField& u, std::size_t c) {
  Point p;
  p.d = g.dim();
  p.x = g.cell_center(c);
  p.u = cell_average(g, u, c);
  auto nodes = g.cell_nodes(c);
  Matrix G = g.local_gradient();
  p.xi.assign(u.m * g.dim(), 0.0);
  for (std::size_t i = 0; i < u.m; ++i)
    for (std::size_t j = 0; j < g.dim(); ++j)
      for (std::size_t k = 0; k < nodes.size(); ++k) p.xi[i * g.dim() + j] += G(j, k) * u(nodes[k], i);
  return p;
}

double assemble_value(const Expr& e, const Grid& g, const DiscreteField& u) {
  double s = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) s += g.cell_weight(c) * eval(e, cell_point(g, u, c));
  return s;
}

Codifferential DiscreteFunctional::local(std::size_t c) const {
  return precompose_affine(cells[c], local_map(grid, m));
}

std::pair<double, Vec> DiscreteFunctional::induced_hypo(const CellSelection& s) const {
  const std::size_t d = grid.dim(), nn = grid.nodes_per_cell();
  Matrix G = grid.local_gradient();
  double A = 0.0;
  Vec xs(grid.num_nodes() * m, 0.0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Polytope& P = cells[c].hypo;
    const Vec& lam = s.coeffs.at(c);
    if (lam.size() != P.size()) throw std::invalid_argument("induced_hypo: selection size mismatch");
    auto nodes = grid.cell_nodes(c);
    for (std::size_t k = 0; k < P.size(); ++k) {
      A += weights[c] * lam[k] * P[k].a;
      for (std::size_t l = 0; l < nn; ++l)
        for (std::size_t i = 0; i < m; ++i) {
          double t = P[k].v[i] / static_cast<double>(nn);
          for (std::size_t j = 0; j < d; ++j) t += P[k].v[m + i * d + j] * G(j, l);
          xs[nodes[l] * m + i] += weights[c] * lam[k] * t;
        }
    }
  }
  return {A, xs};
}

DiscreteFunctional assemble_codifferential(const Expr& e, const Grid& g, const DiscreteField& u) {
  DiscreteFunctional F;
  F.grid = g;
  F.m = u.m;
  const std::size_t nc = g.num_cells();
  F.cells.resize(nc);
  F.values.assign(nc, 0.0);
  F.weights.assign(nc, 0.0);
  Dims dims{g.dim(), u.m};
  parallel_for(nc, [&](std::size_t c) {
    Point p = cell_point(g, u, c);
    auto r = codiff_at(e, VariableSelector::u_xi(), dims, p);
    F.cells[c] = std::move(r.cd);
    F.values[c] = r.value;
    F.weights[c] = g.cell_weight(c);
  });
  return F;
}

double functional_directional_derivative(const DiscreteFunctional& F, const DiscreteField& h) {
  double s = 0.0;
  for (std::size_t c = 0; c < F.cells.size(); ++c) {
    Point p = cell_point(F.grid, h, c);
    Vec dx = p.u;
    dx.insert(dx.end(), p.xi.begin(), p.xi.end());
    s += F.weights[c] * directional_derivative(F.cells[c], dx);
  }
  return s;
}

std::size_t thread_count() {
  const char* env = std::getenv("CODVAR_THREADS");
  if (!env) return 1;
  long v = std::strtol(env, nullptr, 10);
  return v > 0 ? static_cast<std::size_t>(v) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  std::size_t t = std::min(thread_count(), n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(t);
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t) body(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
  return std::string(buf, r.ptr);
}

void write_field_csv(std::ostream& os, const Grid& g, const DiscreteField& u) {
  for (std::size_t a = 0; a < g.dim(); ++a) os << (a ? ",x" : "x") << a + 1;
  for (std::size_t i = 0; i < u.m; ++i) os << ",u" << i + 1;
  os << '\n';
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    Vec x = g.node_coord(n);
    for (std::size_t a = 0; a < x.size(); ++a) os << (a ? "," : "") << format_double(x[a]);
    for (std::size_t i = 0; i < u.m; ++i) os << ',' << format_double(u(n, i));
    os << '\n';
  }
}

DiscreteField read_field_csv(std::istream& is, const Grid& g) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("field csv: missing header");
  std::size_t cols = 1;
  for (char c : line) cols += c == ',';
  if (cols <= g.dim()) throw std::runtime_error("field csv: no value columns");
  std::size_t m = cols - g.dim();
  DiscreteField u = DiscreteField::zeros(g, m);
  std::size_t n = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (n >= g.num_nodes()) throw std::runtime_error("field csv: too many rows");
    std::vector<double> vals;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      auto r = std::from_chars(p, comma, v);
      if (r.ec != std::errc() || r.ptr != comma)
        throw std::runtime_error("field csv: bad number on row " + std::to_string(n + 2));
      vals.push_back(v);
      p = comma + 1;
      if (comma == end) break;
    }
    if (vals.size() != cols) throw std::runtime_error("field csv: wrong column count on row " + std::to_string(n + 2));
    Vec x = g.node_coord(n);
    for (std::size_t a = 0; a < g.dim(); ++a)
      if (std::abs(vals[a] - x[a]) > 1e-9 * (1.0 + std::abs(x[a])))
        throw std::runtime_error("field csv: node coordinates do not match the grid on row " + std::to_string(n + 2));
    for (std::size_t i = 0; i < m; ++i) u(n, i) = vals[g.dim() + i];
    ++n;
  }
  if (n != g.num_nodes()) throw std::runtime_error("field csv: expected " + std::to_string(g.num_nodes()) + " rows");
  return u;
}

}  // namespace codvar
