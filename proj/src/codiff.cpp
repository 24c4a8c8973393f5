#include "codvar/codiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "codvar/lp.hpp"

namespace codvar {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Polytope::Polytope(std::size_t dim, std::vector<AffinePiece> vertices)
    : dim_(dim), verts_(std::move(vertices)) {
  if (verts_.empty()) throw std::invalid_argument("polytope: empty vertex list");
  for (const auto& p : verts_) {
    if (p.v.size() != dim_) throw std::invalid_argument("polytope: vertex dimension mismatch");
    if (!std::isfinite(p.a)) throw std::invalid_argument("polytope: non-finite entry");
    for (double x : p.v)
      if (!std::isfinite(x)) throw std::invalid_argument("polytope: non-finite entry");
  }
}

Polytope Polytope::zero(std::size_t dim) { return Polytope(dim, {AffinePiece{0.0, Vec(dim, 0.0)}}); }

Polytope Polytope::point(double a, Vec v) {
  std::size_t n = v.size();
  return Polytope(n, {AffinePiece{a, std::move(v)}});
}

double Polytope::max_a() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : verts_) m = std::max(m, p.a);
  return m;
}

double Polytope::min_a() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : verts_) m = std::min(m, p.a);
  return m;
}

Codifferential Codifferential::zero(std::size_t dim) {
  return {Polytope::zero(dim), Polytope::zero(dim)};
}

Codifferential Codifferential::smooth(Vec gradient) {
  std::size_t n = gradient.size();
  return {Polytope::point(0.0, std::move(gradient)), Polytope::zero(n)};
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

bool near_equal(const AffinePiece& p, const AffinePiece& q) {
  double scale = 1.0 + std::abs(p.a);
  double d = std::abs(p.a - q.a);
  for (std::size_t i = 0; i < p.v.size(); ++i) {
    scale = std::max(scale, 1.0 + std::abs(p.v[i]));
    d = std::max(d, std::abs(p.v[i] - q.v[i]));
  }
  return d <= 1e-14 * scale;
}

std::vector<AffinePiece> dedupe(const std::vector<AffinePiece>& in) {
  std::vector<AffinePiece> out;
  for (const auto& p : in) {
    bool dup = false;
    for (const auto& q : out)
      if (near_equal(p, q)) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(p);
  }
  return out;
}

}  // namespace

double phi_eval(const Polytope& hypo, std::span<const double> dx) {
  check_dim(dx.size(), hypo.dim(), "phi_eval");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : hypo.vertices()) m = std::max(m, p.a + dot(p.v, dx));
  return m;
}

double psi_eval(const Polytope& hyper, std::span<const double> dx) {
  check_dim(dx.size(), hyper.dim(), "psi_eval");
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : hyper.vertices()) m = std::min(m, p.a + dot(p.v, dx));
  return m;
}

double dc_increment(const Codifferential& cd, std::span<const double> dx) {
  return phi_eval(cd.hypo, dx) + psi_eval(cd.hyper, dx);
}

Polytope scale(const Polytope& p, double s) {
  std::vector<AffinePiece> v = p.vertices();
  for (auto& q : v) {
    q.a *= s;
    for (double& x : q.v) x *= s;
  }
  if (s == 0.0) v.resize(1);
  return Polytope(p.dim(), std::move(v));
}

Polytope shift(const Polytope& p, double da) {
  std::vector<AffinePiece> v = p.vertices();
  for (auto& q : v) q.a += da;
  return Polytope(p.dim(), std::move(v));
}

Polytope minkowski_sum(const Polytope& p, const Polytope& q) {
  check_dim(p.dim(), q.dim(), "minkowski_sum");
  std::vector<AffinePiece> out;
  out.reserve(p.size() * q.size());
  for (const auto& x : p.vertices())
    for (const auto& y : q.vertices()) {
      AffinePiece s{x.a + y.a, x.v};
      for (std::size_t i = 0; i < s.v.size(); ++i) s.v[i] += y.v[i];
      out.push_back(std::move(s));
    }
  return reduce(Polytope(p.dim(), std::move(out)));
}

Polytope hull_union(const std::vector<Polytope>& ps) {
  if (ps.empty()) throw std::invalid_argument("hull_union: empty list");
  std::vector<AffinePiece> out;
  for (const auto& p : ps) {
    check_dim(p.dim(), ps.front().dim(), "hull_union");
    out.insert(out.end(), p.vertices().begin(), p.vertices().end());
  }
  return reduce(Polytope(ps.front().dim(), std::move(out)));
}

bool polytope_contains(const Polytope& p, double a, std::span<const double> v, double tol,
                       Vec* coeffs) {
  check_dim(v.size(), p.dim(), "polytope_contains");
  const std::size_t k = p.size();
  LinearProgram lp;
  for (std::size_t i = 0; i < k; ++i) lp.add_var(VarSign::NonNeg);
  LpRow sum;
  for (std::size_t i = 0; i < k; ++i) sum.emplace_back(static_cast<int>(i), 1.0);
  lp.add_eq(sum, 1.0);
  LpRow ra;
  for (std::size_t i = 0; i < k; ++i)
    if (p[i].a != 0.0) ra.emplace_back(static_cast<int>(i), p[i].a);
  lp.add_eq(ra, a);
  for (std::size_t c = 0; c < p.dim(); ++c) {
    LpRow r;
    for (std::size_t i = 0; i < k; ++i)
      if (p[i].v[c] != 0.0) r.emplace_back(static_cast<int>(i), p[i].v[c]);
    lp.add_eq(r, v[c]);
  }
  LpOptions opt;
  opt.feas_tol = tol;
  auto res = solve(lp, opt);
  if (res.status != LpStatus::Feasible) return false;
  if (coeffs) *coeffs = res.x;
  return true;
}

Polytope reduce(const Polytope& p, double tol) {
  std::vector<AffinePiece> v = dedupe(p.vertices());
  if (v.size() <= 2) return Polytope(p.dim(), std::move(v));
  // Drop vertices one at a time; removing a redundant point never changes the hull.
  for (std::size_t i = v.size(); i-- > 0;) {
    if (v.size() <= 1) break;
    std::vector<AffinePiece> others;
    others.reserve(v.size() - 1);
    for (std::size_t j = 0; j < v.size(); ++j)
      if (j != i) others.push_back(v[j]);
    Polytope rest(p.dim(), others);
    if (polytope_contains(rest, v[i].a, v[i].v, tol)) v = std::move(others);
  }
  return Polytope(p.dim(), std::move(v));
}

Codifferential normalize(Codifferential cd) {
  double top = cd.hypo.max_a();
  double bot = cd.hyper.min_a();
  if (top != 0.0) cd.hypo = shift(cd.hypo, -top);
  if (bot != 0.0) cd.hyper = shift(cd.hyper, -bot);
  // A one-point hyperdifferential is a linear term; keep linear terms in the hypo part.
  if (cd.hyper.size() == 1) {
    const Vec& w = cd.hyper[0].v;
    if (std::any_of(w.begin(), w.end(), [](double x) { return x != 0.0; })) {
      std::vector<AffinePiece> v = cd.hypo.vertices();
      for (auto& q : v)
        for (std::size_t i = 0; i < w.size(); ++i) q.v[i] += w[i];
      cd.hypo = Polytope(cd.hypo.dim(), std::move(v));
      cd.hyper = Polytope::zero(cd.hyper.dim());
    }
  }
  return cd;
}

Codifferential linear_combine(std::span<const Term> terms) {
  if (terms.empty()) throw std::invalid_argument("linear_combine: no terms");
  const std::size_t n = terms.front().cd->dim();
  Polytope hypo = Polytope::zero(n);
  Polytope hyper = Polytope::zero(n);
  for (const auto& t : terms) {
    check_dim(t.cd->dim(), n, "linear_combine");
    if (t.lambda == 0.0) continue;
    if (t.lambda > 0) {
      hypo = minkowski_sum(hypo, scale(t.cd->hypo, t.lambda));
      hyper = minkowski_sum(hyper, scale(t.cd->hyper, t.lambda));
    } else {
      hypo = minkowski_sum(hypo, scale(t.cd->hyper, t.lambda));
      hyper = minkowski_sum(hyper, scale(t.cd->hypo, t.lambda));
    }
  }
  return normalize({std::move(hypo), std::move(hyper)});
}

namespace {

// Shared body of the max and min rules. For max: hull side is hypo, sum side is hyper.
Codifferential extremum_rule(std::span<const Codifferential> cds, std::span<const double> values,
                             bool is_max) {
  if (cds.empty()) throw std::invalid_argument("max/min rule: empty list");
  if (cds.size() != values.size()) throw std::invalid_argument("max/min rule: values size mismatch");
  const std::size_t n = cds.front().dim();
  for (const auto& c : cds) check_dim(c.dim(), n, "max/min rule");
  if (cds.size() == 1) return cds.front();
  double f = is_max ? *std::max_element(values.begin(), values.end())
                    : *std::min_element(values.begin(), values.end());
  auto hull_side = [is_max](const Codifferential& c) -> const Polytope& {
    return is_max ? c.hypo : c.hyper;
  };
  auto sum_side = [is_max](const Codifferential& c) -> const Polytope& {
    return is_max ? c.hyper : c.hypo;
  };
  std::vector<Polytope> pieces;
  for (std::size_t i = 0; i < cds.size(); ++i) {
    Polytope acc = shift(hull_side(cds[i]), values[i] - f);
    for (std::size_t j = 0; j < cds.size(); ++j)
      if (j != i) acc = minkowski_sum(acc, scale(sum_side(cds[j]), -1.0));
    pieces.push_back(std::move(acc));
  }
  Polytope hull = hull_union(pieces);
  Polytope sum = sum_side(cds[0]);
  for (std::size_t j = 1; j < cds.size(); ++j) sum = minkowski_sum(sum, sum_side(cds[j]));
  if (is_max) return normalize({std::move(hull), std::move(sum)});
  return normalize({std::move(sum), std::move(hull)});
}

}  // namespace

Codifferential max_rule(std::span<const Codifferential> cds, std::span<const double> values) {
  return extremum_rule(cds, values, true);
}

Codifferential min_rule(std::span<const Codifferential> cds, std::span<const double> values) {
  return extremum_rule(cds, values, false);
}

Codifferential compose_smooth(std::span<const double> partials, std::span<const Codifferential> cds) {
  if (partials.size() != cds.size()) throw std::invalid_argument("compose_smooth: length mismatch");
  std::vector<Term> terms;
  for (std::size_t i = 0; i < cds.size(); ++i) terms.push_back({partials[i], &cds[i]});
  return linear_combine(terms);
}

namespace {

Polytope map_polytope(const Polytope& p, const Matrix& M) {
  std::vector<AffinePiece> out;
  for (const auto& q : p.vertices()) {
    AffinePiece r{q.a, Vec(M.cols, 0.0)};
    for (std::size_t i = 0; i < M.rows; ++i) {
      if (q.v[i] == 0.0) continue;
      for (std::size_t j = 0; j < M.cols; ++j) r.v[j] += M(i, j) * q.v[i];
    }
    out.push_back(std::move(r));
  }
  return reduce(Polytope(M.cols, std::move(out)));
}

}  // namespace

Codifferential precompose_affine(const Codifferential& cd, const Matrix& M) {
  check_dim(M.rows, cd.dim(), "precompose_affine");
  return {map_polytope(cd.hypo, M), map_polytope(cd.hyper, M)};
}

std::vector<std::size_t> zero_face(const Polytope& p, double tol_face) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (std::abs(p[i].a) <= tol_face) idx.push_back(i);
  return idx;
}

Quasidifferential quasidiff_extract(const Codifferential& cd, double tol_face) {
  Quasidifferential q;
  for (std::size_t i : zero_face(cd.hypo, tol_face)) q.sub.push_back(cd.hypo[i].v);
  for (std::size_t i : zero_face(cd.hyper, tol_face)) q.sup.push_back(cd.hyper[i].v);
  if (q.sub.empty() || q.sup.empty())
    throw std::domain_error("quasidiff_extract: empty a=0 face (codifferential not normalized)");
  return q;
}

double directional_derivative(const Codifferential& cd, std::span<const double> v) {
  check_dim(v.size(), cd.dim(), "directional_derivative");
  auto q = quasidiff_extract(cd);
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& g : q.sub) hi = std::max(hi, dot(g, v));
  for (const auto& g : q.sup) lo = std::min(lo, dot(g, v));
  return hi + lo;
}

namespace {

bool solve_small(std::vector<double> M, std::vector<double> b, int n, std::vector<double>& x) {
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(M[i * n + k]) > std::abs(M[piv * n + k])) piv = i;
    if (std::abs(M[piv * n + k]) < 1e-300) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(M[k * n + j], M[piv * n + j]);
      std::swap(b[k], b[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      double f = M[i * n + k] / M[k * n + k];
      for (int j = k; j < n; ++j) M[i * n + j] -= f * M[k * n + j];
      b[i] -= f * b[k];
    }
  }
  x.assign(n, 0.0);
  for (int k = n - 1; k >= 0; --k) {
    double s = b[k];
    for (int j = k + 1; j < n; ++j) s -= M[k * n + j] * x[j];
    x[k] = s / M[k * n + k];
  }
  return true;
}

// Affine minimizer of ||sum alpha_k q_k|| subject to sum alpha = 1.
bool affine_min_norm(const std::vector<Vec>& q, const std::vector<std::size_t>& S, Vec& alpha) {
  const int s = static_cast<int>(S.size());
  const int n = s + 1;
  std::vector<double> M(n * n, 0.0), b(n, 0.0);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) M[i * n + j] = dot(q[S[i]], q[S[j]]);
    M[i * n + s] = 1.0;
    M[s * n + i] = 1.0;
  }
  b[s] = 1.0;
  std::vector<double> x;
  if (!solve_small(M, b, n, x)) return false;
  alpha.assign(x.begin(), x.begin() + s);
  return true;
}

}  // namespace

// Wolfe's minimum-norm-point algorithm applied to points - x.
double point_polytope_distance(std::span<const double> x, const std::vector<Vec>& points, Vec* nearest) {
  if (points.empty()) throw std::invalid_argument("point_polytope_distance: empty set");
  const std::size_t n = x.size();
  std::vector<Vec> q(points.size(), Vec(n));
  double scale2 = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    check_dim(points[k].size(), n, "point_polytope_distance");
    for (std::size_t i = 0; i < n; ++i) q[k][i] = points[k][i] - x[i];
    scale2 = std::max(scale2, dot(q[k], q[k]));
  }
  std::size_t start = 0;
  for (std::size_t k = 1; k < q.size(); ++k)
    if (dot(q[k], q[k]) < dot(q[start], q[start])) start = k;
  std::vector<std::size_t> S{start};
  Vec lam{1.0};
  Vec w = q[start];
  const double eps = 1e-14 * std::max(scale2, 1e-300);
  for (int outer = 0; outer < 1000; ++outer) {
    std::size_t j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < q.size(); ++k) {
      double t = dot(w, q[k]);
      if (t < best) {
        best = t;
        j = k;
      }
    }
    if (best >= dot(w, w) - eps || std::find(S.begin(), S.end(), j) != S.end()) break;
    S.push_back(j);
    lam.push_back(0.0);
    for (int minor = 0; minor < 1000; ++minor) {
      Vec alpha;
      if (!affine_min_norm(q, S, alpha)) {
        S.pop_back();
        lam.pop_back();
        break;
      }
      bool interior = std::all_of(alpha.begin(), alpha.end(), [](double a) { return a > 1e-15; });
      if (interior) {
        lam = alpha;
        break;
      }
      double theta = 1.0;
      for (std::size_t k = 0; k < S.size(); ++k)
        if (alpha[k] <= 1e-15 && lam[k] - alpha[k] > 0) theta = std::min(theta, lam[k] / (lam[k] - alpha[k]));
      for (std::size_t k = 0; k < S.size(); ++k) lam[k] = lam[k] + theta * (alpha[k] - lam[k]);
      std::vector<std::size_t> S2;
      Vec lam2;
      for (std::size_t k = 0; k < S.size(); ++k)
        if (lam[k] > 1e-15) {
          S2.push_back(S[k]);
          lam2.push_back(lam[k]);
        }
      double tot = 0.0;
      for (double l : lam2) tot += l;
      for (double& l : lam2) l /= tot;
      S = std::move(S2);
      lam = std::move(lam2);
    }
    Vec w2(n, 0.0);
    for (std::size_t k = 0; k < S.size(); ++k)
      for (std::size_t i = 0; i < n; ++i) w2[i] += lam[k] * q[S[k]][i];
    if (dot(w2, w2) >= dot(w, w) - eps && outer > 0) {
      w = std::move(w2);
      break;
    }
    w = std::move(w2);
  }
  if (nearest) {
    nearest->assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) (*nearest)[i] = w[i] + x[i];
  }
  return std::sqrt(dot(w, w));
}

double hausdorff_distance(const Polytope& p, const Polytope& q) {
  check_dim(p.dim(), q.dim(), "hausdorff_distance");
  auto lift = [](const Polytope& r) {
    std::vector<Vec> pts;
    for (const auto& v : r.vertices()) {
      Vec z{v.a};
      z.insert(z.end(), v.v.begin(), v.v.end());
      pts.push_back(std::move(z));
    }
    return pts;
  };
  auto P = lift(p);
  auto Q = lift(q);
  double d = 0.0;
  for (const auto& x : P) d = std::max(d, point_polytope_distance(x, Q));
  for (const auto& y : Q) d = std::max(d, point_polytope_distance(y, P));
  return d;
}

}  // namespace codvar
