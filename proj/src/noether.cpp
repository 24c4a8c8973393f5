#include "codvar/noether.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "el_system.hpp"

namespace codvar {

using namespace detail;

namespace {

void check_inputs(const VariationalProblem& p, const DiscreteField& u) {
  p.validate();
  if (p.family() != VariationalProblem::Family::None)
    throw std::invalid_argument("noether: constrained problems are not supported");
  check_field(p, u);
  check_boundary_values(p, u);
}

// grad u^T v for v in R^{m x d} (row-major); result d x d row-major.
Vec transport(const Vec& xi, const Vec& v, std::size_t m, std::size_t d, std::size_t off) {
  Vec z(d * d, 0.0);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t l = 0; l < d; ++l)
      for (std::size_t i = 0; i < m; ++i) z[k * d + l] += xi[i * d + k] * v[off + i * d + l];
  return z;
}

}  // namespace

NoetherCertificate check_noether(const VariationalProblem& p, const DiscreteField& u, const CellSelection& hyper_sel,
                                 const CheckOptions& opt) {
  check_inputs(p, u);
  const Grid& g = p.grid;
  const std::size_t d = g.dim(), m = p.m;
  if (d != 1 && d != 2) throw std::invalid_argument("noether: unsupported dimension");
  check_selection_size(hyper_sel, g.num_cells());
  const auto sel = VariableSelector::x_xi();

  NoetherCertificate cert;
  cert.condition = "noether";
  cert.resolution = resolution_of(g);
  ElSystem el(g, d);
  std::vector<std::vector<int>> beta(g.num_cells());
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    Point pt = cell_point(g, u, c);
    ValueCodiff vc = codiff_at(p.integrand, sel, p.dims(), pt);
    // (a, v1, v2) -> (a, v1, grad u^T v2)
    std::vector<AffinePiece> mapped;
    for (const AffinePiece& q : vc.cd.hypo.vertices()) {
      AffinePiece r{q.a, Vec(q.v.begin(), q.v.begin() + static_cast<long>(d))};
      Vec z = transport(pt.xi, q.v, m, d, d);
      r.v.insert(r.v.end(), z.begin(), z.end());
      mapped.push_back(std::move(r));
    }
    beta[c] = el.add_polytope(c, Polytope(d + d * d, std::move(mapped)), -1, "beta[" + std::to_string(c) + "]");
    Vec w = hyper_point(vc.cd, hyper_sel, c);
    append_selection(cert.selection, w);
    Vec s(w.begin(), w.begin() + static_cast<long>(d));
    Vec z = transport(pt.xi, w, m, d, d);
    for (std::size_t k = 0; k < d; ++k) z[k * d + k] -= vc.value;
    s.insert(s.end(), z.begin(), z.end());
    el.add_shift(c, s, -1);
  }
  el.add_node_rows();
  cert.lp = el.lp;
  LpOutcome r = run_lp(cert, opt);
  if (r.status == LpStatus::Feasible) {
    fill_flux_witness(cert, el, r.x, opt);
    for (const auto& b : beta)
      for (int v : b) cert.witness.beta.push_back(r.x[static_cast<std::size_t>(v)]);
  }
  return cert;
}

NoetherCertificate check_energy_conservation(const VariationalProblem& p, const DiscreteField& u,
                                             const CellSelection* hyper_sel, const CheckOptions& opt) {
  check_inputs(p, u);
  const Grid& g = p.grid;
  if (g.dim() != 1) throw std::invalid_argument("energy check: d = 1 only");
  if (p.integrand.uses(Block::X)) throw std::invalid_argument("energy check: integrand depends on x");
  if (hyper_sel) check_selection_size(*hyper_sel, g.num_cells());
  const std::size_t m = p.m;
  const auto sel = VariableSelector::xi_only();

  NoetherCertificate cert;
  cert.condition = "energy";
  cert.resolution = resolution_of(g);
  LinearProgram& lp = cert.lp;
  const int cvar = lp.add_var(VarSign::Free, 0.0, "c");
  std::vector<LinExpr> energy(g.num_cells());
  std::vector<double> fval(g.num_cells());
  std::vector<std::vector<int>> beta(g.num_cells());
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    Point pt = cell_point(g, u, c);
    ValueCodiff vc = codiff_at(p.integrand, sel, p.dims(), pt);
    fval[c] = vc.value;
    const std::string cell = "[" + std::to_string(c) + "]";
    auto pairing = [&](const Vec& v) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += pt.xi[i] * v[i];
      return s;
    };
    std::vector<std::size_t> face;
    beta[c] = face_combination(lp, vc.cd.hypo, -1, "beta" + cell, &face);
    for (std::size_t k = 0; k < face.size(); ++k) energy[c].add(beta[c][k], pairing(vc.cd.hypo[face[k]].v));
    if (hyper_sel) {
      Vec w = hyper_point(vc.cd, *hyper_sel, c);
      append_selection(cert.selection, w);
      energy[c].constant += pairing(w);
    } else {
      std::vector<std::size_t> hface;
      auto gamma = face_combination(lp, vc.cd.hyper, -1, "gamma" + cell, &hface);
      for (std::size_t k = 0; k < hface.size(); ++k) energy[c].add(gamma[k], pairing(vc.cd.hyper[hface[k]].v));
    }
    energy[c].constant -= vc.value;
    LinExpr row = energy[c];
    row.add(cvar, -1.0);
    add_eq(lp, row, 0.0, "energy" + cell);
  }
  LpOutcome r = run_lp(cert, opt);
  if (r.status != LpStatus::Feasible) return cert;
  const double cval = r.x[static_cast<std::size_t>(cvar)];
  cert.witness.energy = cval;
  double worst = 0.0, scale = 1.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    worst = std::max(worst, std::abs(energy[c].eval(r.x) - cval));
    scale = std::max(scale, std::abs(fval[c]));
  }
  cert.witness.residual = worst / scale;
  for (const auto& b : beta)
    for (int v : b) cert.witness.beta.push_back(r.x[static_cast<std::size_t>(v)]);
  if (cert.witness.residual > opt.tol_lp || primal_violation(cert.lp, r.x) > opt.tol_lp) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "witness failed re-validation";
  }
  return cert;
}

}  // namespace codvar
