#include "codvar/optimality.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "el_system.hpp"

namespace codvar {

using namespace detail;

VariationalProblem::Family VariationalProblem::family() const {
  if (g0 || !g_ineq.empty() || !g_eq.empty()) return Family::Boundary;
  if (!isoperimetric.empty()) return Family::Isoperimetric;
  if (!nonholonomic.empty()) return Family::Nonholonomic;
  return Family::None;
}

namespace {

void check_expr_dims(const Expr& e, Dims dims, const char* what) {
  Dims ed = e.dims();
  if (e.is_boundary()) {
    if (ed.m > dims.m) throw std::invalid_argument(std::string(what) + ": references more components than m");
    return;
  }
  if (ed.m > dims.m) throw std::invalid_argument(std::string(what) + ": references more components than m");
  if (ed.d > dims.d) throw std::invalid_argument(std::string(what) + ": references more space dimensions than d");
}

}  // namespace

void VariationalProblem::validate() const {
  if (!integrand.root()) throw std::invalid_argument("problem: missing integrand");
  if (grid.dim() == 0) throw std::invalid_argument("problem: missing grid");
  if (m == 0) throw std::invalid_argument("problem: m must be positive");
  int families = (g0 || !g_ineq.empty() || !g_eq.empty()) + !isoperimetric.empty() + !nonholonomic.empty();
  if (families > 1) throw std::invalid_argument("problem: more than one constraint family");
  check_expr_dims(integrand, dims(), "integrand");
  if (integrand.is_boundary()) throw std::invalid_argument("integrand: boundary variables are not allowed");
  auto check_boundary_fn = [&](const Expr& e) {
    if (!e.is_boundary()) throw std::invalid_argument("boundary function: must use ua/ub variables");
    check_expr_dims(e, dims(), "boundary function");
  };
  if (g0) check_boundary_fn(*g0);
  for (const auto& e : g_ineq) check_boundary_fn(e);
  for (const auto& e : g_eq) check_boundary_fn(e);
  if (family() == Family::Boundary && grid.dim() != 1)
    throw std::invalid_argument("problem: boundary functions need d = 1");
  for (const auto& c : isoperimetric) check_expr_dims(c.f, dims(), "isoperimetric integrand");
  for (const auto& e : nonholonomic) check_expr_dims(e, dims(), "nonholonomic constraint");
  if (!u0.values.empty() && (u0.m != m || u0.values.size() != grid.num_nodes() * m))
    throw std::invalid_argument("problem: boundary data size mismatch");
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ConditionsHold: return "ConditionsHold";
    case Verdict::ConditionsFail: return "ConditionsFail";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::string resolution_of(const Grid& g) {
  std::string s = std::to_string(g.cells(0));
  for (std::size_t a = 1; a < g.dim(); ++a) s += "x" + std::to_string(g.cells(a));
  return s;
}

namespace {

void write_vec(std::ostream& os, const char* key, const Vec& v) {
  if (v.empty()) return;
  os << key << ' ' << v.size();
  for (double x : v) os << ' ' << format_double(x);
  os << '\n';
}

}  // namespace

void write_certificate(std::ostream& os, const Certificate& c) {
  os << "codvar-certificate 1\n";
  os << "condition " << c.condition << '\n';
  os << "verdict " << to_string(c.verdict) << '\n';
  os << "resolution " << c.resolution << '\n';
  if (!c.reason.empty()) os << "reason " << c.reason << '\n';
  os << "lp vars " << c.stats.vars << " eq " << c.stats.eq_rows << " le " << c.stats.le_rows << " iterations "
     << c.stats.iterations << " residual " << format_double(c.stats.residual) << " seconds "
     << format_double(c.stats.seconds) << '\n';
  if (c.farkas_check >= 0.0) os << "farkas_check " << format_double(c.farkas_check) << '\n';
  write_vec(os, "farkas_eq", c.farkas_eq);
  write_vec(os, "farkas_le", c.farkas_le);
  write_vec(os, "selection", c.selection);
  if (c.verdict == Verdict::ConditionsHold) {
    os << "witness_residual " << format_double(c.witness.residual) << '\n';
    os << "complementarity " << format_double(c.witness.complementarity) << '\n';
  }
  if (c.witness.energy) os << "energy " << format_double(*c.witness.energy) << '\n';
  write_vec(os, "zeta", c.witness.zeta);
  write_vec(os, "div_zeta", c.witness.div_zeta);
  write_vec(os, "zeta_ends", c.witness.zeta_ends);
  write_vec(os, "lambda", c.witness.lambda);
  write_vec(os, "mu_lower", c.witness.mu_lower);
  write_vec(os, "mu_upper", c.witness.mu_upper);
  write_vec(os, "beta", c.witness.beta);
}

// ---- selections -------------------------------------------------------

AffinePiece selection_point(const Polytope& P, const Vec& coeffs) {
  if (coeffs.size() != P.size()) throw std::invalid_argument("selection: coefficient count does not match the polytope");
  double sum = 0.0;
  AffinePiece out{0.0, Vec(P.dim(), 0.0)};
  for (std::size_t k = 0; k < P.size(); ++k) {
    if (coeffs[k] < -1e-12) throw std::invalid_argument("selection: negative coefficient");
    sum += coeffs[k];
    out.a += coeffs[k] * P[k].a;
    for (std::size_t e = 0; e < P.dim(); ++e) out.v[e] += coeffs[k] * P[k].v[e];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("selection: coefficients must sum to 1");
  return out;
}

CellSelection select_face_vertices(const std::vector<Codifferential>& cells, const std::vector<std::size_t>& idx) {
  if (idx.size() != cells.size()) throw std::invalid_argument("selection: one index per cell expected");
  CellSelection s;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto face = zero_face(cells[c].hyper);
    if (idx[c] >= face.size()) throw std::invalid_argument("selection: face vertex index out of range");
    Vec co(cells[c].hyper.size(), 0.0);
    co[face[idx[c]]] = 1.0;
    s.coeffs.push_back(std::move(co));
  }
  return s;
}

CellSelection first_face_vertex(const std::vector<Codifferential>& cells) {
  return select_face_vertices(cells, std::vector<std::size_t>(cells.size(), 0));
}

CellSelection select_points(const std::vector<Codifferential>& cells, const std::vector<Vec>& points, double tol) {
  if (points.size() != cells.size()) throw std::invalid_argument("selection: one point per cell expected");
  CellSelection s;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    Vec co;
    if (!polytope_contains(cells[c].hyper, 0.0, points[c], tol, &co))
      throw std::invalid_argument("selection: point outside the hyperdifferential a = 0 face in cell " +
                                  std::to_string(c));
    s.coeffs.push_back(std::move(co));
  }
  return s;
}

std::vector<CellSelection> enumerate_vertex_patterns(const std::vector<Codifferential>& cells,
                                                     const std::vector<std::size_t>& region, std::size_t regions,
                                                     std::size_t bound) {
  if (region.size() != cells.size()) throw std::invalid_argument("patterns: one region per cell expected");
  std::vector<std::size_t> radix(regions, 1);
  std::vector<std::vector<std::size_t>> faces(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (region[c] >= regions) throw std::invalid_argument("patterns: region index out of range");
    faces[c] = zero_face(cells[c].hyper);
    radix[region[c]] = std::max(radix[region[c]], faces[c].size());
  }
  std::vector<CellSelection> out;
  std::vector<std::size_t> digit(regions, 0);
  while (out.size() < bound) {
    CellSelection s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      Vec co(cells[c].hyper.size(), 0.0);
      co[faces[c][digit[region[c]] % faces[c].size()]] = 1.0;
      s.coeffs.push_back(std::move(co));
    }
    out.push_back(std::move(s));
    std::size_t r = 0;
    while (r < regions && ++digit[r] == radix[r]) digit[r++] = 0;
    if (r == regions) break;
  }
  return out;
}

// ---- shared plumbing --------------------------------------------------

// ---- unconstrained ----------------------------------------------------

Certificate check_unconstrained(const VariationalProblem& p, const DiscreteField& u, const CellSelection& hyper_sel,
                                const CheckOptions& opt) {
  p.validate();
  check_field(p, u);
  check_boundary_values(p, u);
  const Grid& g = p.grid;
  check_selection_size(hyper_sel, g.num_cells());
  DiscreteFunctional F = assemble_codifferential(p.integrand, g, u);

  Certificate cert;
  cert.condition = "euler-lagrange";
  cert.resolution = resolution_of(g);
  ElSystem el(g, p.m);
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    el.add_polytope(c, F.cells[c].hypo, -1, "beta[" + std::to_string(c) + "]");
    Vec w = hyper_point(F.cells[c], hyper_sel, c);
    el.add_shift(c, w, -1);
    append_selection(cert.selection, w);
  }
  el.add_node_rows();
  cert.lp = el.lp;
  LpOutcome r = run_lp(cert, opt);
  if (r.status == LpStatus::Feasible) fill_flux_witness(cert, el, r.x, opt);
  return cert;
}

// ---- boundary constraints ---------------------------------------------

BoundaryData boundary_data(const VariationalProblem& p, const DiscreteField& u, const CheckOptions& opt) {
  if (p.grid.dim() != 1) throw std::invalid_argument("boundary constraints: unsupported for d != 1");
  check_field(p, u);
  BoundaryData bd;
  const std::size_t last = p.grid.num_nodes() - 1;
  bd.point.d = 1;
  for (std::size_t i = 0; i < p.m; ++i) {
    bd.point.ua.push_back(u(0, i));
    bd.point.ub.push_back(u(last, i));
  }
  Dims dims{1, p.m};
  auto sel = VariableSelector::boundary();
  if (p.g0) bd.g0 = codiff_at(*p.g0, sel, dims, bd.point);
  for (std::size_t i = 0; i < p.g_ineq.size(); ++i) {
    bd.g_ineq.push_back(codiff_at(p.g_ineq[i], sel, dims, bd.point));
    double v = bd.g_ineq.back().value;
    if (v > opt.tol_active) throw std::invalid_argument("boundary inequality " + std::to_string(i + 1) + " is violated");
    bd.active.push_back(v >= -opt.tol_active);
  }
  for (std::size_t j = 0; j < p.g_eq.size(); ++j) {
    bd.g_eq.push_back(codiff_at(p.g_eq[j], sel, dims, bd.point));
    if (std::abs(bd.g_eq.back().value) > opt.tol_active)
      throw std::invalid_argument("boundary equality " + std::to_string(j + 1) + " is violated");
  }
  return bd;
}

namespace {

Vec face_vertex_or(const Polytope& P, const Vec& given, const char* what) {
  if (given.empty()) return P[zero_face(P).front()].v;
  if (given.size() != P.dim()) throw std::invalid_argument(std::string(what) + ": wrong length");
  if (!polytope_contains(P, 0.0, given, 1e-9))
    throw std::invalid_argument(std::string(what) + ": not on the a = 0 face");
  return given;
}

struct ResolvedBoundary {
  Vec s0;
  std::vector<Vec> s_ineq, s_eq, r_eq;
};

ResolvedBoundary resolve(const BoundaryData& bd, const BoundarySelections& sel, std::size_t m) {
  ResolvedBoundary rb;
  const std::size_t ni = bd.g_ineq.size(), nj = bd.g_eq.size();
  if (!sel.s.empty() && sel.s.size() != ni + nj)
    throw std::invalid_argument("boundary selections: expected one s per constraint");
  if (!sel.r.empty() && sel.r.size() != nj) throw std::invalid_argument("boundary selections: expected one r per equality");
  static const Vec none;
  rb.s0 = bd.g0 ? face_vertex_or(bd.g0->cd.hyper, sel.s0, "s0") : Vec(2 * m, 0.0);
  for (std::size_t i = 0; i < ni; ++i)
    rb.s_ineq.push_back(face_vertex_or(bd.g_ineq[i].cd.hyper, sel.s.empty() ? none : sel.s[i], "s"));
  for (std::size_t j = 0; j < nj; ++j) {
    rb.s_eq.push_back(face_vertex_or(bd.g_eq[j].cd.hyper, sel.s.empty() ? none : sel.s[ni + j], "s"));
    rb.r_eq.push_back(face_vertex_or(bd.g_eq[j].cd.hypo, sel.r.empty() ? none : sel.r[j], "r"));
  }
  return rb;
}

std::vector<Vec> face_points(const Polytope& P) {
  std::vector<Vec> out;
  for (auto k : zero_face(P)) out.push_back(P[k].v);
  return out;
}

Vec add(Vec a, const Vec& b, double s = 1.0) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
  return a;
}

}  // namespace

bool hull_meets_cone(const std::vector<Vec>& piece, const std::vector<Vec>& cone_gen, Vec* point, const LpOptions& lpo) {
  const std::size_t n = piece.front().size();
  LinearProgram lp;
  std::vector<int> al, ga;
  LpRow norm;
  for (std::size_t k = 0; k < piece.size(); ++k) {
    al.push_back(lp.add_var(VarSign::NonNeg));
    norm.emplace_back(al.back(), 1.0);
  }
  for (std::size_t k = 0; k < cone_gen.size(); ++k) ga.push_back(lp.add_var(VarSign::NonNeg));
  lp.add_eq(norm, 1.0, "convex");
  for (std::size_t e = 0; e < n; ++e) {
    LpRow row;
    for (std::size_t k = 0; k < piece.size(); ++k)
      if (piece[k][e] != 0.0) row.emplace_back(al[k], piece[k][e]);
    for (std::size_t k = 0; k < cone_gen.size(); ++k)
      if (cone_gen[k][e] != 0.0) row.emplace_back(ga[k], cone_gen[k][e]);
    lp.add_eq(std::move(row), 0.0);
  }
  LpOutcome r = solve(lp, lpo);
  if (r.status == LpStatus::NumericalFailure) throw std::runtime_error("constraint qualification LP failed: " + r.message);
  if (r.status != LpStatus::Feasible) return false;
  if (point) {
    point->assign(n, 0.0);
    for (std::size_t k = 0; k < piece.size(); ++k) *point = add(*point, piece[k], r.x[al[k]]);
  }
  return true;
}

CqReport check_cq_boundary(const VariationalProblem& p, const DiscreteField& u, const BoundarySelections& sel,
                           const CheckOptions& opt) {
  p.validate();
  BoundaryData bd = boundary_data(p, u, opt);
  ResolvedBoundary rb = resolve(bd, sel, p.m);
  const std::size_t nj = bd.g_eq.size();
  // C_j as two pieces: hypo face + s_j and -(r_j + hyper face).
  std::vector<std::vector<std::vector<Vec>>> C(nj);
  for (std::size_t j = 0; j < nj; ++j) {
    std::vector<Vec> lower, upper;
    for (const Vec& v : face_points(bd.g_eq[j].cd.hypo)) lower.push_back(add(v, rb.s_eq[j]));
    for (const Vec& v : face_points(bd.g_eq[j].cd.hyper)) upper.push_back(add(add(Vec(v.size(), 0.0), rb.r_eq[j], -1.0), v, -1.0));
    C[j] = {lower, upper};
  }
  CqReport rep;
  rep.holds = true;
  for (std::size_t j = 0; j < nj && rep.holds; ++j) {
    std::vector<Vec> gen;
    for (std::size_t k = 0; k < nj; ++k)
      if (k != j)
        for (const auto& piece : C[k]) gen.insert(gen.end(), piece.begin(), piece.end());
    for (std::size_t part = 0; part < 2 && rep.holds; ++part) {
      ++rep.lps;
      if (hull_meets_cone(C[j][part], gen, &rep.point, opt.lp)) {
        rep.holds = false;
        rep.failed = "equality " + std::to_string(j + 1) + (part == 0 ? " (lower piece)" : " (upper piece)");
      }
    }
  }
  if (rep.holds) {
    std::vector<Vec> hull;
    for (std::size_t i = 0; i < bd.g_ineq.size(); ++i)
      if (bd.active[i])
        for (const Vec& v : face_points(bd.g_ineq[i].cd.hypo)) hull.push_back(add(v, rb.s_ineq[i]));
    if (!hull.empty()) {
      std::vector<Vec> gen;
      for (const auto& cj : C)
        for (const auto& piece : cj) gen.insert(gen.end(), piece.begin(), piece.end());
      ++rep.lps;
      if (hull_meets_cone(hull, gen, &rep.point, opt.lp)) {
        rep.holds = false;
        rep.failed = "active inequalities";
      }
    }
  }
  return rep;
}

Certificate check_boundary(const VariationalProblem& p, const DiscreteField& u, const CellSelection& hyper_sel,
                           const BoundarySelections& sel, const CheckOptions& opt) {
  p.validate();
  BoundaryData bd = boundary_data(p, u, opt);
  ResolvedBoundary rb = resolve(bd, sel, p.m);
  const Grid& g = p.grid;
  const std::size_t m = p.m;
  check_selection_size(hyper_sel, g.num_cells());
  DiscreteFunctional F = assemble_codifferential(p.integrand, g, u);

  Certificate cert;
  cert.condition = "transversality";
  cert.resolution = resolution_of(g);
  ElSystem el(g, m);
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    el.add_polytope(c, F.cells[c].hypo, -1, "beta[" + std::to_string(c) + "]");
    Vec w = hyper_point(F.cells[c], hyper_sel, c);
    el.add_shift(c, w, -1);
    append_selection(cert.selection, w);
  }
  el.add_node_rows(true);
  LinearProgram& lp = el.lp;

  std::vector<LinExpr> R(2 * m);
  auto add_face = [&](const Polytope& P, int scale, double sign, const std::string& tag) {
    std::vector<std::size_t> face;
    auto vars = detail::face_combination(lp, P, scale, tag, &face);
    for (std::size_t k = 0; k < face.size(); ++k)
      for (std::size_t e = 0; e < 2 * m; ++e) R[e].add(vars[k], sign * P[face[k]].v[e]);
  };
  auto add_vec = [&](const Vec& v, int scale, double sign) {
    for (std::size_t e = 0; e < 2 * m; ++e) {
      if (scale < 0)
        R[e].constant += sign * v[e];
      else
        R[e].add(scale, sign * v[e]);
    }
  };
  if (bd.g0) {
    add_face(bd.g0->cd.hypo, -1, 1.0, "g0");
    add_vec(rb.s0, -1, 1.0);
  }
  std::vector<int> lam(bd.g_ineq.size(), -1), mul(bd.g_eq.size()), muu(bd.g_eq.size());
  for (std::size_t i = 0; i < bd.g_ineq.size(); ++i) {
    if (!bd.active[i]) continue;
    lam[i] = lp.add_var(VarSign::NonNeg, 0.0, "lambda[" + std::to_string(i + 1) + "]");
    add_face(bd.g_ineq[i].cd.hypo, lam[i], 1.0, "gi" + std::to_string(i + 1));
    add_vec(rb.s_ineq[i], lam[i], 1.0);
  }
  for (std::size_t j = 0; j < bd.g_eq.size(); ++j) {
    mul[j] = lp.add_var(VarSign::NonNeg, 0.0, "mu_lower[" + std::to_string(j + 1) + "]");
    muu[j] = lp.add_var(VarSign::NonNeg, 0.0, "mu_upper[" + std::to_string(j + 1) + "]");
    add_face(bd.g_eq[j].cd.hypo, mul[j], 1.0, "gj_lower" + std::to_string(j + 1));
    add_vec(rb.s_eq[j], mul[j], 1.0);
    add_vec(rb.r_eq[j], muu[j], -1.0);
    add_face(bd.g_eq[j].cd.hyper, muu[j], -1.0, "gj_upper" + std::to_string(j + 1));
  }
  for (std::size_t e = 0; e < 2 * m; ++e) {
    LinExpr row;
    bool at_alpha = e < m;
    row.add(at_alpha ? el.zeta_alpha()[e] : el.zeta_beta()[e - m], at_alpha ? 1.0 : -1.0);
    row.add_scaled(R[e], -1.0);
    detail::add_eq(lp, row, 0.0,
                   std::string("transversality[") + (at_alpha ? "ua" : "ub") + std::to_string((at_alpha ? e : e - m) + 1) + "]");
  }
  cert.lp = lp;
  LpOutcome r = run_lp(cert, opt);
  if (r.status != LpStatus::Feasible) return cert;
  fill_flux_witness(cert, el, r.x, opt);
  for (std::size_t i = 0; i < m; ++i) cert.witness.zeta_ends.push_back(r.x[el.zeta_alpha()[i]]);
  for (std::size_t i = 0; i < m; ++i) cert.witness.zeta_ends.push_back(r.x[el.zeta_beta()[i]]);
  for (std::size_t i = 0; i < lam.size(); ++i) {
    double l = lam[i] < 0 ? 0.0 : r.x[lam[i]];
    cert.witness.lambda.push_back(l);
    cert.witness.complementarity = std::max(cert.witness.complementarity, std::abs(l * bd.g_ineq[i].value));
  }
  for (std::size_t j = 0; j < mul.size(); ++j) {
    cert.witness.mu_lower.push_back(r.x[mul[j]]);
    cert.witness.mu_upper.push_back(r.x[muu[j]]);
  }
  if (cert.witness.complementarity > opt.tol_comp) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "complementarity violated";
  }
  return cert;
}

// ---- isoperimetric ----------------------------------------------------

IsoperimetricResult check_isoperimetric(const VariationalProblem& p, const DiscreteField& u,
                                        const std::vector<CellSelection>& hyper_sels, const CheckOptions& opt) {
  p.validate();
  check_field(p, u);
  check_boundary_values(p, u);
  const Grid& g = p.grid;
  const std::size_t nc = g.num_cells(), l = p.isoperimetric.size();
  if (hyper_sels.size() != l + 1) throw std::invalid_argument("isoperimetric: expected one selection per functional");
  for (const auto& s : hyper_sels) check_selection_size(s, nc);

  DiscreteFunctional F0 = assemble_codifferential(p.integrand, g, u);
  std::vector<DiscreteFunctional> Fi;
  std::vector<double> slack;
  IsoperimetricResult res;
  for (std::size_t i = 0; i < l; ++i) {
    Fi.push_back(assemble_codifferential(p.isoperimetric[i].f, g, u));
    double s = assemble_value(p.isoperimetric[i].f, g, u) - p.isoperimetric[i].theta;
    if (s > opt.tol_active) throw std::invalid_argument("isoperimetric constraint " + std::to_string(i + 1) + " is violated");
    slack.push_back(s);
    if (s >= -opt.tol_active) res.active.push_back(i);
  }
  std::string resolution = resolution_of(g);

  // Constraint qualification: (0, div zeta, zeta) in the pointwise co-hull over active constraints.
  res.cq.condition = "isoperimetric-cq";
  res.cq.resolution = resolution;
  if (res.active.empty()) {
    res.cq_holds = true;
    res.cq.verdict = Verdict::ConditionsHold;
    res.cq.reason = "no active constraints";
  } else {
    ElSystem el(g, p.m);
    for (std::size_t c = 0; c < nc; ++c) {
      LpRow hull;
      for (auto i : res.active) {
        int t = el.lp.add_var(VarSign::NonNeg, 0.0, "t[" + std::to_string(i + 1) + "," + std::to_string(c) + "]");
        hull.emplace_back(t, 1.0);
        el.add_polytope(c, Fi[i].cells[c].hypo, t, "beta[" + std::to_string(i + 1) + "," + std::to_string(c) + "]");
        el.add_shift(c, hyper_point(Fi[i].cells[c], hyper_sels[i + 1], c), t);
      }
      el.lp.add_eq(std::move(hull), 1.0, "hull[" + std::to_string(c) + "]");
    }
    el.add_node_rows();
    res.cq.lp = el.lp;
    LpOutcome r = run_lp(res.cq, opt);
    // The qualification holds exactly when this LP is infeasible.
    if (r.status == LpStatus::Feasible) {
      fill_flux_witness(res.cq, el, r.x, opt);
      res.cq_holds = false;
      res.cq.verdict = Verdict::ConditionsFail;
      res.cq.reason = "a flux lies in the active co-hull";
    } else if (res.cq.verdict == Verdict::ConditionsFail) {
      res.cq_holds = true;
      res.cq.verdict = Verdict::ConditionsHold;
      res.cq.reason = "no flux lies in the active co-hull";
    }
  }

  Certificate& cert = res.optimality;
  cert.condition = "isoperimetric";
  cert.resolution = resolution;
  ElSystem el(g, p.m);
  std::vector<int> lam(l, -1);
  for (auto i : res.active) lam[i] = el.lp.add_var(VarSign::NonNeg, 0.0, "lambda[" + std::to_string(i + 1) + "]");
  for (std::size_t c = 0; c < nc; ++c) {
    el.add_polytope(c, F0.cells[c].hypo, -1, "beta[0," + std::to_string(c) + "]");
    Vec w = hyper_point(F0.cells[c], hyper_sels[0], c);
    el.add_shift(c, w, -1);
    append_selection(cert.selection, w);
    for (auto i : res.active) {
      el.add_polytope(c, Fi[i].cells[c].hypo, lam[i], "beta[" + std::to_string(i + 1) + "," + std::to_string(c) + "]");
      el.add_shift(c, hyper_point(Fi[i].cells[c], hyper_sels[i + 1], c), lam[i]);
    }
  }
  el.add_node_rows();
  cert.lp = el.lp;
  LpOutcome r = run_lp(cert, opt);
  if (r.status == LpStatus::Feasible) {
    fill_flux_witness(cert, el, r.x, opt);
    for (std::size_t i = 0; i < l; ++i) {
      double v = lam[i] < 0 ? 0.0 : r.x[lam[i]];
      cert.witness.lambda.push_back(v);
      cert.witness.complementarity = std::max(cert.witness.complementarity, std::abs(v * slack[i]));
    }
    if (cert.witness.complementarity > opt.tol_comp) {
      cert.verdict = Verdict::Inconclusive;
      cert.reason = "complementarity violated";
    }
  } else if (cert.verdict == Verdict::ConditionsFail && !res.cq_holds) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "constraint qualification fails; the optimality LP is infeasible";
  }
  return res;
}

// ---- nonholonomic -----------------------------------------------------

namespace {

Vec cell_increment(const Grid& g, const DiscreteField& h, std::size_t c) {
  Point q = cell_point(g, h, c);
  Vec dx = q.u;
  dx.insert(dx.end(), q.xi.begin(), q.xi.end());
  return dx;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double ConvexifiedProblem::objective(const DiscreteField& h) const {
  double s = 0.0;
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    Vec dx = cell_increment(grid, h, c);
    s += grid.cell_weight(c) * (phi_eval(f_cells[c].hypo, dx) + dot(f_shift[c], dx));
  }
  return s;
}

double ConvexifiedProblem::phi(std::size_t i, std::size_t c, const DiscreteField& h) const {
  Vec dx = cell_increment(grid, h, c);
  return g_values[i][c] + phi_eval(g_cells[i][c].hypo, dx) + dot(g_shift[i][c], dx);
}

double ConvexifiedProblem::nodal_phi(std::size_t i, std::size_t n, const DiscreteField& h) const {
  auto adj = grid.node_cells(n);
  double s = 0.0;
  for (auto [c, k] : adj) {
    Vec dx = cell_increment(grid, h, c);
    for (std::size_t j = 0; j < m; ++j) dx[j] = h(n, j);
    s += g_values[i][c] + phi_eval(g_cells[i][c].hypo, dx) + dot(g_shift[i][c], dx);
  }
  return s / static_cast<double>(adj.size());
}

double ConvexifiedProblem::cq_report(const DiscreteField& h_star) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g_cells.size(); ++i)
    for (std::size_t c = 0; c < grid.num_cells(); ++c) worst = std::max(worst, phi(i, c, h_star));
  return worst;
}

ConvexifiedProblem convexify_nonholonomic(const VariationalProblem& p, const DiscreteField& u,
                                          const CellSelection& f_sel, const std::vector<CellSelection>& g_sels) {
  p.validate();
  check_field(p, u);
  if (p.nonholonomic.empty()) throw std::invalid_argument("convexify: problem has no nonholonomic constraints");
  if (g_sels.size() != p.nonholonomic.size()) throw std::invalid_argument("convexify: one selection per constraint expected");
  const Grid& g = p.grid;
  const std::size_t nc = g.num_cells();
  check_selection_size(f_sel, nc);
  ConvexifiedProblem cp;
  cp.grid = g;
  cp.m = p.m;
  DiscreteFunctional F = assemble_codifferential(p.integrand, g, u);
  cp.f_cells = F.cells;
  for (std::size_t c = 0; c < nc; ++c) cp.f_shift.push_back(hyper_point(F.cells[c], f_sel, c));
  for (std::size_t i = 0; i < p.nonholonomic.size(); ++i) {
    check_selection_size(g_sels[i], nc);
    DiscreteFunctional G = assemble_codifferential(p.nonholonomic[i], g, u);
    for (std::size_t c = 0; c < nc; ++c)
      if (G.values[c] > 1e-8)
        throw std::invalid_argument("convexify: constraint " + std::to_string(i + 1) + " violated in cell " + std::to_string(c));
    std::vector<Vec> shifts;
    for (std::size_t c = 0; c < nc; ++c) shifts.push_back(hyper_point(G.cells[c], g_sels[i], c));
    cp.g_cells.push_back(G.cells);
    cp.g_shift.push_back(std::move(shifts));
    cp.g_values.push_back(G.values);
  }
  return cp;
}

Certificate check_nonholonomic_regular(const VariationalProblem& p, const DiscreteField& u, const CellSelection& f_sel,
                                       const std::vector<CellSelection>& g_sels, const CheckOptions& opt) {
  if (p.grid.dim() != 1) throw std::invalid_argument("nonholonomic: unsupported for d != 1");
  check_boundary_values(p, u);
  ConvexifiedProblem cp = convexify_nonholonomic(p, u, f_sel, g_sels);
  const Grid& g = p.grid;
  const std::size_t nc = g.num_cells(), l = cp.g_cells.size();

  Certificate cert;
  cert.condition = "nonholonomic-regular";
  cert.resolution = resolution_of(g);
  ElSystem el(g, p.m);
  std::vector<int> lam(l * nc, -1);
  for (std::size_t c = 0; c < nc; ++c) {
    el.add_polytope(c, cp.f_cells[c].hypo, -1, "beta[0," + std::to_string(c) + "]");
    el.add_shift(c, cp.f_shift[c], -1);
    append_selection(cert.selection, cp.f_shift[c]);
    for (std::size_t i = 0; i < l; ++i) {
      if (cp.g_values[i][c] < -opt.tol_comp) continue;
      std::string tag = std::to_string(i + 1) + "," + std::to_string(c);
      int v = el.lp.add_var(VarSign::NonNeg, 0.0, "lambda[" + tag + "]");
      lam[i * nc + c] = v;
      el.add_polytope(c, cp.g_cells[i][c].hypo, v, "beta[" + tag + "]");
      el.add_shift(c, cp.g_shift[i][c], v);
    }
  }
  el.add_node_rows();
  cert.lp = el.lp;
  LpOutcome r = run_lp(cert, opt);
  if (r.status != LpStatus::Feasible) return cert;
  fill_flux_witness(cert, el, r.x, opt);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t c = 0; c < nc; ++c) {
      int v = lam[i * nc + c];
      double x = v < 0 ? 0.0 : r.x[v];
      cert.witness.lambda.push_back(x);
      cert.witness.complementarity = std::max(cert.witness.complementarity, std::abs(x * cp.g_values[i][c]));
    }
  if (cert.witness.complementarity > opt.tol_comp) {
    cert.verdict = Verdict::Inconclusive;
    cert.reason = "complementarity violated";
  }
  return cert;
}

MassResult min_total_mass(const ConvexifiedProblem& cp, const std::vector<DiscreteField>& tests, const CheckOptions& opt) {
  const Grid& g = cp.grid;
  const std::size_t nn = g.num_nodes(), l = cp.g_cells.size();
  LinearProgram lp;
  std::vector<int> nu(l * nn, -1);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t n = 0; n < nn; ++n) {
      bool active = false;
      for (auto [c, k] : g.node_cells(n)) active = active || cp.g_values[i][c] >= -opt.tol_comp;
      if (active) nu[i * nn + n] = lp.add_var(VarSign::NonNeg, 1.0, "nu[" + std::to_string(i + 1) + "," + std::to_string(n) + "]");
    }
  for (std::size_t k = 0; k < tests.size(); ++k) {
    if (tests[k].m != cp.m || tests[k].values.size() != nn * cp.m)
      throw std::invalid_argument("min_total_mass: test field does not match the grid");
    LpRow row;
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t n = 0; n < nn; ++n) {
        if (nu[i * nn + n] < 0) continue;
        double ph = cp.nodal_phi(i, n, tests[k]);
        if (ph != 0.0) row.emplace_back(nu[i * nn + n], -ph);
      }
    lp.add_le(std::move(row), cp.objective(tests[k]), "test[" + std::to_string(k) + "]");
  }
  MassResult res;
  if (lp.num_vars() == 0) {
    bool ok = true;
    for (const auto& h : tests) ok = ok && cp.objective(h) >= -opt.tol_lp;
    res.status = ok ? LpStatus::Feasible : LpStatus::Infeasible;
    res.mass = ok ? 0.0 : std::numeric_limits<double>::infinity();
    res.nu.assign(l * nn, 0.0);
    return res;
  }
  LpOutcome r = solve(lp, opt.lp);
  res.status = r.status;
  res.nu.assign(l * nn, 0.0);
  if (r.status == LpStatus::Feasible) {
    res.mass = r.objective;
    for (std::size_t q = 0; q < nu.size(); ++q)
      if (nu[q] >= 0) res.nu[q] = r.x[nu[q]];
  } else if (r.status == LpStatus::Infeasible) {
    res.mass = std::numeric_limits<double>::infinity();
  }
  return res;
}

}  // namespace codvar
