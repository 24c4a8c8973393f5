#include "el_system.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace codvar::detail {

LpRow compress(const std::vector<std::pair<int, double>>& terms) {
  std::map<int, double> acc;
  for (auto [v, c] : terms) acc[v] += c;
  LpRow row;
  for (auto [v, c] : acc)
    if (c != 0.0) row.emplace_back(v, c);
  return row;
}

int add_eq(LinearProgram& lp, const LinExpr& e, double rhs, std::string name) {
  return lp.add_eq(compress(e.terms), rhs - e.constant, std::move(name));
}

std::vector<int> face_combination(LinearProgram& lp, const Polytope& P, int scale, const std::string& tag,
                                  std::vector<std::size_t>* face) {
  auto idx = zero_face(P);
  if (idx.empty()) throw std::logic_error("face_combination: empty a = 0 face");
  std::vector<int> vars;
  LpRow norm;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    int v = lp.add_var(VarSign::NonNeg, 0.0, tag + "[" + std::to_string(k) + "]");
    vars.push_back(v);
    norm.emplace_back(v, 1.0);
  }
  double rhs = 1.0;
  if (scale >= 0) {
    norm.emplace_back(scale, -1.0);
    rhs = 0.0;
  }
  lp.add_eq(std::move(norm), rhs, "sum(" + tag + ")");
  if (face) *face = std::move(idx);
  return vars;
}

ElSystem::ElSystem(const Grid& g, std::size_t m) : g_(g), m_(m) {
  V.assign(g.num_cells(), std::vector<LinExpr>(m + m * g.dim()));
}

std::vector<int> ElSystem::add_polytope(std::size_t c, const Polytope& P, int scale, const std::string& tag) {
  if (P.dim() != V[c].size()) throw std::invalid_argument("ElSystem: polytope dimension mismatch");
  std::vector<std::size_t> face;
  auto vars = face_combination(lp, P, scale, tag, &face);
  for (std::size_t k = 0; k < face.size(); ++k) {
    const Vec& v = P[face[k]].v;
    for (std::size_t e = 0; e < v.size(); ++e) V[c][e].add(vars[k], v[e]);
  }
  return vars;
}

void ElSystem::add_shift(std::size_t c, const Vec& v, int scale) {
  if (v.size() != V[c].size()) throw std::invalid_argument("ElSystem: shift dimension mismatch");
  for (std::size_t e = 0; e < v.size(); ++e) {
    if (scale < 0)
      V[c][e].constant += v[e];
    else
      V[c][e].add(scale, v[e]);
  }
}

void ElSystem::add_node_rows(bool free_ends) {
  const std::size_t d = g_.dim(), nn = g_.nodes_per_cell();
  if (free_ends && d != 1) throw std::invalid_argument("ElSystem: free ends need d = 1");
  if (free_ends) {
    for (std::size_t i = 0; i < m_; ++i) {
      za_.push_back(lp.add_var(VarSign::Free, 0.0, "zeta_alpha[" + std::to_string(i) + "]"));
      zb_.push_back(lp.add_var(VarSign::Free, 0.0, "zeta_beta[" + std::to_string(i) + "]"));
    }
  }
  Matrix G = g_.local_gradient();
  node_rows_.assign(g_.num_nodes() * m_, -1);
  const std::size_t last = g_.num_nodes() - 1;
  for (std::size_t n = 0; n < g_.num_nodes(); ++n) {
    bool end = g_.on_boundary(n);
    if (end && !free_ends) continue;
    double wn = g_.node_weight(n);
    for (std::size_t i = 0; i < m_; ++i) {
      LinExpr row;
      for (auto [c, k] : g_.node_cells(n)) {
        double wc = g_.cell_weight(c) / wn;
        row.add_scaled(V[c][i], wc / static_cast<double>(nn));
        for (std::size_t j = 0; j < d; ++j) row.add_scaled(V[c][m_ + i * d + j], wc * G(j, k));
      }
      if (free_ends && n == 0) row.add(za_[i], 1.0 / wn);
      if (free_ends && n == last) row.add(zb_[i], -1.0 / wn);
      node_rows_[n * m_ + i] = add_eq(lp, row, 0.0, "node[" + std::to_string(n) + "," + std::to_string(i) + "]");
    }
  }
}

Vec ElSystem::flux(const std::vector<double>& x) const {
  const std::size_t d = g_.dim();
  Vec z(g_.num_cells() * m_ * d);
  for (std::size_t c = 0; c < g_.num_cells(); ++c)
    for (std::size_t e = 0; e < m_ * d; ++e) z[c * m_ * d + e] = V[c][m_ + e].eval(x);
  return z;
}

Vec ElSystem::nodal_v1(const std::vector<double>& x) const {
  Vec out(g_.num_nodes() * m_, 0.0);
  const double nn = static_cast<double>(g_.nodes_per_cell());
  for (std::size_t n = 0; n < g_.num_nodes(); ++n) {
    double wn = g_.node_weight(n);
    for (auto [c, k] : g_.node_cells(n))
      for (std::size_t i = 0; i < m_; ++i) out[n * m_ + i] += g_.cell_weight(c) * V[c][i].eval(x) / (nn * wn);
  }
  return out;
}

double ElSystem::el_residual(const std::vector<double>& x) const {
  Vec div = divergence(g_, m_, flux(x));
  Vec v1 = nodal_v1(x);
  double r = 0.0;
  for (std::size_t n = 0; n < g_.num_nodes(); ++n) {
    if (g_.on_boundary(n)) continue;
    for (std::size_t i = 0; i < m_; ++i) r = std::max(r, std::abs(v1[n * m_ + i] - div[n * m_ + i]));
  }
  return r;
}

// ---- shared checker helpers -------------------------------------------

void check_field(const VariationalProblem& p, const DiscreteField& u) {
  if (u.m != p.m || u.values.size() != p.grid.num_nodes() * p.m)
    throw std::invalid_argument("field does not match the problem grid");
}

void check_boundary_values(const VariationalProblem& p, const DiscreteField& u) {
  if (p.u0.values.empty()) return;
  for (std::size_t n = 0; n < p.grid.num_nodes(); ++n) {
    if (!p.grid.on_boundary(n)) continue;
    for (std::size_t i = 0; i < p.m; ++i)
      if (std::abs(u(n, i) - p.u0(n, i)) > 1e-12 * (1.0 + std::abs(p.u0(n, i))))
        throw std::invalid_argument("field does not match the boundary data at node " + std::to_string(n));
  }
}

// Hyper selection point of a cell; must lie on the a = 0 face.
Vec hyper_point(const Codifferential& cd, const CellSelection& sel, std::size_t c) {
  if (c >= sel.coeffs.size()) throw std::invalid_argument("selection: too few cells");
  AffinePiece pt = selection_point(cd.hyper, sel.coeffs[c]);
  if (std::abs(pt.a) > 1e-9) throw std::invalid_argument("selection: a-component must be 0 in cell " + std::to_string(c));
  return pt.v;
}

void check_selection_size(const CellSelection& sel, std::size_t cells) {
  if (sel.coeffs.size() != cells) throw std::invalid_argument("selection: dimension mismatch (one entry per cell expected)");
}

// Solves cert.lp and sets the verdict from the LP status; returns the outcome.
LpOutcome run_lp(Certificate& cert, const CheckOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  LpOutcome r = solve(cert.lp, opt.lp);
  cert.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cert.stats.vars = cert.lp.num_vars();
  cert.stats.eq_rows = cert.lp.eq_rows.size();
  cert.stats.le_rows = cert.lp.le_rows.size();
  cert.stats.iterations = r.iterations;
  cert.stats.residual = r.residual;
  switch (r.status) {
    case LpStatus::Feasible:
    case LpStatus::Unbounded:
      cert.verdict = Verdict::ConditionsHold;
      break;
    case LpStatus::Infeasible: {
      cert.farkas_eq = r.farkas_eq;
      cert.farkas_le = r.farkas_le;
      cert.farkas_check = farkas_violation(cert.lp, r.farkas_eq, r.farkas_le);
      if (cert.farkas_check < 0.0 || cert.farkas_check > opt.tol_lp) {
        cert.verdict = Verdict::Inconclusive;
        cert.reason = "infeasibility certificate failed re-validation";
      } else {
        cert.verdict = Verdict::ConditionsFail;
        cert.reason = "necessary-condition violation at resolution " + cert.resolution;
      }
      break;
    }
    case LpStatus::NumericalFailure:
      cert.verdict = Verdict::Inconclusive;
      cert.reason = "LP numerical failure: " + r.message;
      break;
  }
  return r;
}

double max_abs(const Vec& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

// Fills zeta, div zeta and the relative inclusion residual; downgrades to Inconclusive on failure.
void fill_flux_witness(Certificate& cert, const ElSystem& el, const Vec& x, const CheckOptions& opt) {
  const Grid& g = el.grid();
  cert.witness.zeta = el.flux(x);
  cert.witness.div_zeta = divergence(g, el.m(), cert.witness.zeta);
  double inv_h = 0.0;
  for (std::size_t a = 0; a < g.dim(); ++a) inv_h += 2.0 / g.h(a);
  double scale = 1.0 + max_abs(el.nodal_v1(x)) + max_abs(cert.witness.zeta) * inv_h;
  cert.witness.residual = el.el_residual(x) / scale;
  double lp_rows = primal_violation(cert.lp, x);
  if (cert.witness.residual > opt.tol_lp || lp_rows > opt.tol_lp) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "witness failed re-validation";
  }
}

void append_selection(Vec& out, const Vec& v) {
  out.push_back(0.0);
  out.insert(out.end(), v.begin(), v.end());
}

}  // namespace codvar::detail
