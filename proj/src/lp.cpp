#include "codvar/lp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <random>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace codvar {

int LinearProgram::add_var(VarSign s, double c, std::string name) {
  sign.push_back(s);
  cost.push_back(c);
  names.push_back(std::move(name));
  return static_cast<int>(sign.size()) - 1;
}

int LinearProgram::add_eq(LpRow row, double rhs, std::string name) {
  eq_rows.push_back(std::move(row));
  eq_rhs.push_back(rhs);
  eq_names.push_back(std::move(name));
  return static_cast<int>(eq_rows.size()) - 1;
}

int LinearProgram::add_le(LpRow row, double rhs, std::string name) {
  le_rows.push_back(std::move(row));
  le_rhs.push_back(rhs);
  le_names.push_back(std::move(name));
  return static_cast<int>(le_rows.size()) - 1;
}

bool LinearProgram::has_objective() const {
  return std::any_of(cost.begin(), cost.end(), [](double c) { return c != 0.0; });
}

void LinearProgram::validate() const {
  const auto n = static_cast<int>(sign.size());
  if (cost.size() != sign.size()) throw std::invalid_argument("lp: cost size mismatch");
  if (eq_rows.size() != eq_rhs.size() || le_rows.size() != le_rhs.size())
    throw std::invalid_argument("lp: row/rhs count mismatch");
  auto check_rows = [n](const std::vector<LpRow>& rows, const std::vector<double>& rhs) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!std::isfinite(rhs[i])) throw std::invalid_argument("lp: non-finite rhs");
      for (auto [j, a] : rows[i]) {
        if (j < 0 || j >= n) throw std::invalid_argument("lp: column index out of range");
        if (!std::isfinite(a)) throw std::invalid_argument("lp: non-finite coefficient");
      }
    }
  };
  check_rows(eq_rows, eq_rhs);
  check_rows(le_rows, le_rhs);
  for (double c : cost)
    if (!std::isfinite(c)) throw std::invalid_argument("lp: non-finite cost");
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Feasible: return "Feasible";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

namespace {

double row_dot(const LpRow& r, const std::vector<double>& x) {
  double s = 0.0;
  for (auto [j, a] : r) s += a * x[j];
  return s;
}

double row_scale(const LpRow& r, const std::vector<double>& x, double b) {
  double s = std::abs(b);
  for (auto [j, a] : r) s = std::max(s, std::abs(a * x[j]));
  return 1.0 + s;
}

// Solve the square system M z = rhs by Gaussian elimination with partial pivoting.
bool dense_solve(std::vector<double> M, std::vector<double> rhs, int n, std::vector<double>& z) {
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(M[i * n + k]) > std::abs(M[piv * n + k])) piv = i;
    if (std::abs(M[piv * n + k]) < 1e-14) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(M[k * n + j], M[piv * n + j]);
      std::swap(rhs[k], rhs[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      double f = M[i * n + k] / M[k * n + k];
      if (f == 0.0) continue;
      for (int j = k; j < n; ++j) M[i * n + j] -= f * M[k * n + j];
      rhs[i] -= f * rhs[k];
    }
  }
  z.assign(n, 0.0);
  for (int k = n - 1; k >= 0; --k) {
    double s = rhs[k];
    for (int j = k + 1; j < n; ++j) s -= M[k * n + j] * z[j];
    z[k] = s / M[k * n + k];
  }
  return true;
}

class Tableau {
 public:
  Tableau(const LinearProgram& p, const LpOptions& opt) : p_(p), opt_(opt) { build(); }

  LpOutcome run();

 private:
  const LinearProgram& p_;
  LpOptions opt_;
  int m_ = 0;           // rows
  int ncols_ = 0;       // structural + slack + artificial
  int nreal_ = 0;       // structural + slack columns (artificials follow)
  std::vector<int> pos_, neg_;  // std columns of each original variable (neg_ = -1 if NonNeg)
  std::vector<int> slack_;      // slack column per le row
  std::vector<double> sigma_;   // row orientation
  std::vector<double> T_;       // m_ x (ncols_+1)
  std::vector<int> basis_;
  std::vector<int> init_col_;   // initial basic column per row
  std::vector<double> obj_;     // reduced costs, size ncols_+1 (last = -objective)
  std::vector<double> cvec_;    // current phase costs
  int iterations_ = 0;
  std::vector<double> shift_;
  std::vector<int> nz_;  // pivot row support  // right-hand-side perturbation in the oriented original rows, empty if none

  double& at(int i, int j) { return T_[static_cast<std::size_t>(i) * (ncols_ + 1) + j]; }
  double at(int i, int j) const { return T_[static_cast<std::size_t>(i) * (ncols_ + 1) + j]; }
  double& rhs(int i) { return at(i, ncols_); }

  void build();
  void set_costs(const std::vector<double>& c);
  void pivot(int r, int e);
  // Returns 0 optimal, 1 unbounded (entering column in *ray_col), 2 iteration limit, 3 cleanup failure.
  int iterate(bool allow_artificial, int* ray_col);
  int primal_loop(int limit, int* ray_col, bool allow_perturb);
  void perturb();
  void unperturb();
  // Dual simplex pivots until the basic solution is nonnegative; false if a row has no entering column.
  bool dual_cleanup(int limit);
  std::vector<double> std_column(int j) const;  // original std-form column (before pivots)
  std::vector<double> structural_x(const std::vector<double>& xstd) const;
  std::vector<double> basic_solution() const;
  bool refactor_primal(std::vector<double>& xstd) const;
  bool refactor_duals(const std::vector<double>& c, std::vector<double>& y) const;
};

void Tableau::build() {
  const int n = static_cast<int>(p_.num_vars());
  const int meq = static_cast<int>(p_.eq_rows.size());
  const int mle = static_cast<int>(p_.le_rows.size());
  m_ = meq + mle;
  pos_.assign(n, -1);
  neg_.assign(n, -1);
  int col = 0;
  for (int j = 0; j < n; ++j) {
    pos_[j] = col++;
    if (p_.sign[j] == VarSign::Free) neg_[j] = col++;
  }
  slack_.assign(mle, -1);
  for (int i = 0; i < mle; ++i) slack_[i] = col++;
  nreal_ = col;
  sigma_.assign(m_, 1.0);
  for (int i = 0; i < m_; ++i) {
    double b = i < meq ? p_.eq_rhs[i] : p_.le_rhs[i - meq];
    if (b < 0) sigma_[i] = -1.0;
  }
  init_col_.assign(m_, -1);
  int nart = 0;
  for (int i = 0; i < m_; ++i) {
    if (i >= meq && sigma_[i] > 0) init_col_[i] = slack_[i - meq];
    else init_col_[i] = nreal_ + nart++;
  }
  ncols_ = nreal_ + nart;
  T_.assign(static_cast<std::size_t>(m_) * (ncols_ + 1), 0.0);
  for (int i = 0; i < m_; ++i) {
    const LpRow& r = i < meq ? p_.eq_rows[i] : p_.le_rows[i - meq];
    double b = i < meq ? p_.eq_rhs[i] : p_.le_rhs[i - meq];
    for (auto [j, a] : r) {
      at(i, pos_[j]) += sigma_[i] * a;
      if (neg_[j] >= 0) at(i, neg_[j]) -= sigma_[i] * a;
    }
    if (i >= meq) at(i, slack_[i - meq]) = sigma_[i];
    if (init_col_[i] >= nreal_) at(i, init_col_[i]) = 1.0;
    rhs(i) = sigma_[i] * b;
  }
  basis_ = init_col_;
}

std::vector<double> Tableau::std_column(int j) const {
  const int meq = static_cast<int>(p_.eq_rows.size());
  std::vector<double> c(m_, 0.0);
  if (j >= nreal_) {
    for (int i = 0; i < m_; ++i)
      if (init_col_[i] == j) c[i] = 1.0;
    return c;
  }
  for (int i = 0; i < m_; ++i) {
    if (i >= meq && slack_[i - meq] == j) c[i] = sigma_[i];
  }
  for (int v = 0; v < static_cast<int>(pos_.size()); ++v) {
    if (pos_[v] != j && neg_[v] != j) continue;
    double s = pos_[v] == j ? 1.0 : -1.0;
    for (int i = 0; i < m_; ++i) {
      const LpRow& r = i < meq ? p_.eq_rows[i] : p_.le_rows[i - meq];
      for (auto [k, a] : r)
        if (k == v) c[i] += s * sigma_[i] * a;
    }
  }
  return c;
}

void Tableau::set_costs(const std::vector<double>& c) {
  cvec_ = c;
  obj_.assign(ncols_ + 1, 0.0);
  for (int j = 0; j < ncols_; ++j) obj_[j] = c[j];
  for (int i = 0; i < m_; ++i) {
    double cb = c[basis_[i]];
    if (cb == 0.0) continue;
    for (int j = 0; j <= ncols_; ++j) obj_[j] -= cb * at(i, j);
  }
}

void Tableau::pivot(int r, int e) {
  const int w = ncols_ + 1;
  double* pr = &T_[static_cast<std::size_t>(r) * w];
  double inv = 1.0 / pr[e];
  for (int j = 0; j < w; ++j) pr[j] *= inv;
  pr[e] = 1.0;
  nz_.clear();
  for (int j = 0; j < w; ++j)
    if (pr[j] != 0.0) nz_.push_back(j);
  const bool sparse = 2 * nz_.size() < static_cast<std::size_t>(w);
  for (int i = 0; i < m_; ++i) {
    if (i == r) continue;
    double* pi = &T_[static_cast<std::size_t>(i) * w];
    double f = pi[e];
    if (f == 0.0) continue;
    if (sparse) {
      for (int j : nz_) pi[j] -= f * pr[j];
    } else {
      for (int j = 0; j < w; ++j) pi[j] -= f * pr[j];
    }
    pi[e] = 0.0;
  }
  double f = obj_[e];
  if (f != 0.0) {
    for (int j = 0; j < w; ++j) obj_[j] -= f * pr[j];
    obj_[e] = 0.0;
  }
  basis_[r] = e;
  ++iterations_;
}

int Tableau::iterate(bool allow_artificial, int* ray_col) {
  const int limit = allow_artificial ? ncols_ : nreal_;
  for (int round = 0;; ++round) {
    int st = primal_loop(limit, ray_col, round < 3);
    if (shift_.empty()) return st;
    unperturb();
    if (st == 2) return 2;
    if (!dual_cleanup(limit)) return 3;
  }
}

int Tableau::primal_loop(int limit, int* ray_col, bool allow_perturb) {
  int degenerate_run = 0;
  while (iterations_ < opt_.max_iterations) {
    if (allow_perturb && shift_.empty() && degenerate_run > 50) {
      perturb();
      degenerate_run = 0;
    }
    int e = -1;
    double best = -opt_.feas_tol;
    for (int j = 0; j < limit; ++j) {
      if (obj_[j] < best) {
        e = j;
        best = obj_[j];
      }
    }
    if (e < 0) return 0;
    // Harris two-pass ratio test: among rows within a small slack of the minimum ratio take the largest pivot.
    const double slack = 1e-3 * opt_.feas_tol;
    double bound = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m_; ++i) {
      double a = at(i, e);
      if (a > opt_.pivot_tol) bound = std::min(bound, (std::max(rhs(i), 0.0) + slack) / a);
    }
    if (bound == std::numeric_limits<double>::infinity()) {
      *ray_col = e;
      return 1;
    }
    int r = -1;
    for (int i = 0; i < m_; ++i) {
      double a = at(i, e);
      if (a > opt_.pivot_tol && std::max(rhs(i), 0.0) / a <= bound && (r < 0 || a > at(r, e))) r = i;
    }
    double ratio = std::max(rhs(r), 0.0) / at(r, e);
    degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
    pivot(r, e);
  }
  return 2;
}

void Tableau::perturb() {
  double bmax = 0.0;
  for (int i = 0; i < m_; ++i) bmax = std::max(bmax, std::abs(rhs(i)));
  std::mt19937_64 rng(12345u + static_cast<unsigned>(iterations_));
  std::uniform_real_distribution<double> U(1.0, 2.0);
  // eps on the basic variables corresponds to shift = B eps in the original rows.
  std::vector<double> eps(ncols_, 0.0);
  for (int i = 0; i < m_; ++i) {
    double d = 1e-7 * (1.0 + bmax) * U(rng);
    eps[basis_[i]] = d;
    rhs(i) += d;
  }
  const int meq = static_cast<int>(p_.eq_rows.size());
  shift_.assign(m_, 0.0);
  for (int i = 0; i < m_; ++i) {
    const LpRow& row = i < meq ? p_.eq_rows[i] : p_.le_rows[i - meq];
    double s = 0.0;
    for (auto [v, a] : row) {
      s += a * eps[pos_[v]];
      if (neg_[v] >= 0) s -= a * eps[neg_[v]];
    }
    s *= sigma_[i];
    if (i >= meq) s += sigma_[i] * eps[slack_[i - meq]];
    if (init_col_[i] >= nreal_) s += eps[init_col_[i]];
    shift_[i] = s;
  }
}

void Tableau::unperturb() {
  // Current inverse basis sits in the initial basic columns.
  for (int i = 0; i < m_; ++i) {
    double s = 0.0;
    for (int k = 0; k < m_; ++k) s += at(i, init_col_[k]) * shift_[k];
    rhs(i) -= s;
  }
  shift_.clear();
  double z = 0.0;
  for (int i = 0; i < m_; ++i) z += cvec_[basis_[i]] * rhs(i);
  obj_[ncols_] = -z;
}

bool Tableau::dual_cleanup(int limit) {
  const double tol = 1e-3 * opt_.feas_tol;
  while (iterations_ < opt_.max_iterations) {
    int r = -1;
    for (int i = 0; i < m_; ++i)
      if (rhs(i) < -tol && (r < 0 || rhs(i) < rhs(r))) r = i;
    if (r < 0) return true;
    int e = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < limit; ++j) {
      double a = at(r, j);
      if (a >= -opt_.pivot_tol) continue;
      double q = std::max(obj_[j], 0.0) / -a;
      if (q < best || (q == best && a < at(r, e))) {
        best = q;
        e = j;
      }
    }
    if (e < 0) return false;
    pivot(r, e);
  }
  return false;
}

std::vector<double> Tableau::basic_solution() const {
  std::vector<double> xstd(ncols_, 0.0);
  for (int i = 0; i < m_; ++i) xstd[basis_[i]] = at(i, ncols_);
  return xstd;
}

std::vector<double> Tableau::structural_x(const std::vector<double>& xstd) const {
  std::vector<double> x(pos_.size(), 0.0);
  for (std::size_t j = 0; j < pos_.size(); ++j) {
    x[j] = xstd[pos_[j]];
    if (neg_[j] >= 0) x[j] -= xstd[neg_[j]];
  }
  return x;
}

bool Tableau::refactor_primal(std::vector<double>& xstd) const {
  std::vector<double> B(static_cast<std::size_t>(m_) * m_);
  for (int k = 0; k < m_; ++k) {
    auto col = std_column(basis_[k]);
    for (int i = 0; i < m_; ++i) B[static_cast<std::size_t>(i) * m_ + k] = col[i];
  }
  std::vector<double> b(m_);
  const int meq = static_cast<int>(p_.eq_rows.size());
  for (int i = 0; i < m_; ++i) b[i] = sigma_[i] * (i < meq ? p_.eq_rhs[i] : p_.le_rhs[i - meq]);
  std::vector<double> z;
  if (!dense_solve(std::move(B), std::move(b), m_, z)) return false;
  xstd.assign(ncols_, 0.0);
  for (int k = 0; k < m_; ++k) xstd[basis_[k]] = std::max(z[k], 0.0);
  return true;
}

bool Tableau::refactor_duals(const std::vector<double>& c, std::vector<double>& y) const {
  std::vector<double> Bt(static_cast<std::size_t>(m_) * m_);
  std::vector<double> cb(m_);
  for (int k = 0; k < m_; ++k) {
    auto col = std_column(basis_[k]);
    for (int i = 0; i < m_; ++i) Bt[static_cast<std::size_t>(k) * m_ + i] = col[i];
    cb[k] = c[basis_[k]];
  }
  return dense_solve(std::move(Bt), std::move(cb), m_, y);
}

LpOutcome Tableau::run() {
  LpOutcome out;
  const int meq = static_cast<int>(p_.eq_rows.size());
  const int mle = static_cast<int>(p_.le_rows.size());

  double bmax = 0.0;
  for (double b : p_.eq_rhs) bmax = std::max(bmax, std::abs(b));
  for (double b : p_.le_rhs) bmax = std::max(bmax, std::abs(b));

  std::vector<double> c1(ncols_, 0.0);
  for (int j = nreal_; j < ncols_; ++j) c1[j] = 1.0;
  set_costs(c1);
  int ray_col = -1;
  int st = iterate(true, &ray_col);
  if (st >= 2) {
    out.status = LpStatus::NumericalFailure;
    out.message = st == 2 ? "iteration limit in phase 1" : "degeneracy cleanup failed in phase 1";
    out.iterations = iterations_;
    return out;
  }
  double w = -obj_[ncols_];
  if (w > opt_.feas_tol * (1.0 + bmax)) {
    // Phase-1 duals: y_i = c_k - r_k for the initial basic column of row i.
    std::vector<double> y(m_);
    for (int i = 0; i < m_; ++i) y[i] = c1[init_col_[i]] - obj_[init_col_[i]];
    auto to_farkas = [&](const std::vector<double>& yy) {
      out.farkas_eq.assign(meq, 0.0);
      out.farkas_le.assign(mle, 0.0);
      for (int i = 0; i < m_; ++i) {
        double z = -sigma_[i] * yy[i];
        if (i < meq) out.farkas_eq[i] = z;
        else out.farkas_le[i - meq] = z;
      }
    };
    to_farkas(y);
    double viol = farkas_violation(p_, out.farkas_eq, out.farkas_le);
    if (viol < 0 || viol > opt_.feas_tol) {
      std::vector<double> y2;
      if (refactor_duals(c1, y2)) {
        to_farkas(y2);
        viol = farkas_violation(p_, out.farkas_eq, out.farkas_le);
      }
    }
    out.iterations = iterations_;
    out.residual = viol;
    if (viol < 0 || viol > opt_.feas_tol) {
      out.status = LpStatus::NumericalFailure;
      out.message = "phase 1 positive but Farkas vector failed validation";
      return out;
    }
    // normalize so that b^T y = -1
    double by = 0.0;
    for (int i = 0; i < meq; ++i) by += p_.eq_rhs[i] * out.farkas_eq[i];
    for (int i = 0; i < mle; ++i) by += p_.le_rhs[i] * out.farkas_le[i];
    for (double& v : out.farkas_eq) v /= -by;
    for (double& v : out.farkas_le) v /= -by;
    out.status = LpStatus::Infeasible;
    return out;
  }

  // Drive zero-level artificials out of the basis.
  for (int i = 0; i < m_; ++i) {
    if (basis_[i] < nreal_) continue;
    int best = -1;
    double mag = opt_.pivot_tol;
    for (int j = 0; j < nreal_; ++j) {
      if (std::abs(at(i, j)) > mag) {
        mag = std::abs(at(i, j));
        best = j;
      }
    }
    if (best >= 0) pivot(i, best);
  }

  std::vector<double> c2(ncols_, 0.0);
  for (std::size_t j = 0; j < pos_.size(); ++j) {
    c2[pos_[j]] = p_.cost[j];
    if (neg_[j] >= 0) c2[neg_[j]] = -p_.cost[j];
  }
  set_costs(c2);
  st = iterate(false, &ray_col);
  out.iterations = iterations_;
  if (st >= 2) {
    out.status = LpStatus::NumericalFailure;
    out.message = st == 2 ? "iteration limit in phase 2" : "degeneracy cleanup failed in phase 2";
    return out;
  }
  if (st == 1) {
    std::vector<double> d(ncols_, 0.0);
    d[ray_col] = 1.0;
    for (int i = 0; i < m_; ++i) d[basis_[i]] -= at(i, ray_col);
    out.ray = structural_x(d);
    out.x = structural_x(basic_solution());
    // validate ray: A_eq d = 0, A_le d <= 0, sign, c^T d < 0
    double nrm = 0.0;
    for (double v : out.ray) nrm = std::max(nrm, std::abs(v));
    for (double& v : out.ray) v /= nrm;
    double worst = 0.0;
    for (int i = 0; i < meq; ++i) worst = std::max(worst, std::abs(row_dot(p_.eq_rows[i], out.ray)));
    for (int i = 0; i < mle; ++i) worst = std::max(worst, row_dot(p_.le_rows[i], out.ray));
    for (std::size_t j = 0; j < out.ray.size(); ++j)
      if (p_.sign[j] == VarSign::NonNeg) worst = std::max(worst, -out.ray[j]);
    double cd = 0.0;
    for (std::size_t j = 0; j < out.ray.size(); ++j) cd += p_.cost[j] * out.ray[j];
    out.residual = worst;
    if (worst > opt_.feas_tol || cd >= -opt_.feas_tol) {
      out.status = LpStatus::NumericalFailure;
      out.message = "unbounded ray failed validation";
      return out;
    }
    out.status = LpStatus::Unbounded;
    out.objective = -std::numeric_limits<double>::infinity();
    return out;
  }

  auto xstd = basic_solution();
  out.x = structural_x(xstd);
  double viol = primal_violation(p_, out.x);
  if (viol > opt_.feas_tol) {
    std::vector<double> x2;
    if (refactor_primal(x2)) {
      auto xs = structural_x(x2);
      double v2 = primal_violation(p_, xs);
      if (v2 < viol) {
        out.x = xs;
        viol = v2;
      }
    }
  }
  out.residual = viol;
  if (viol > opt_.feas_tol) {
    out.status = LpStatus::NumericalFailure;
    out.message = "primal point failed validation";
    return out;
  }
  out.objective = 0.0;
  for (std::size_t j = 0; j < out.x.size(); ++j) out.objective += p_.cost[j] * out.x[j];
  out.status = LpStatus::Feasible;
  return out;
}

}  // namespace

double primal_violation(const LinearProgram& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.eq_rows.size(); ++i) {
    double r = row_dot(p.eq_rows[i], x) - p.eq_rhs[i];
    worst = std::max(worst, std::abs(r) / row_scale(p.eq_rows[i], x, p.eq_rhs[i]));
  }
  for (std::size_t i = 0; i < p.le_rows.size(); ++i) {
    double r = row_dot(p.le_rows[i], x) - p.le_rhs[i];
    worst = std::max(worst, r / row_scale(p.le_rows[i], x, p.le_rhs[i]));
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!std::isfinite(x[j])) return std::numeric_limits<double>::infinity();
    if (p.sign[j] == VarSign::NonNeg) worst = std::max(worst, -x[j]);
  }
  return worst;
}

double farkas_violation(const LinearProgram& p, const std::vector<double>& y_eq,
                        const std::vector<double>& y_le) {
  if (y_eq.size() != p.eq_rows.size() || y_le.size() != p.le_rows.size()) return -1.0;
  double by = 0.0;
  for (std::size_t i = 0; i < y_eq.size(); ++i) by += p.eq_rhs[i] * y_eq[i];
  for (std::size_t i = 0; i < y_le.size(); ++i) by += p.le_rhs[i] * y_le[i];
  if (!(by < 0)) return -1.0;
  double s = -1.0 / by;
  double worst = 0.0;
  for (double v : y_le) worst = std::max(worst, -v * s);
  std::vector<double> aty(p.num_vars(), 0.0);
  for (std::size_t i = 0; i < y_eq.size(); ++i)
    for (auto [j, a] : p.eq_rows[i]) aty[j] += a * y_eq[i] * s;
  for (std::size_t i = 0; i < y_le.size(); ++i)
    for (auto [j, a] : p.le_rows[i]) aty[j] += a * y_le[i] * s;
  for (std::size_t j = 0; j < aty.size(); ++j) {
    if (p.sign[j] == VarSign::Free) worst = std::max(worst, std::abs(aty[j]));
    else worst = std::max(worst, -aty[j]);
  }
  return worst;
}

LpOutcome solve(const LinearProgram& p, const LpOptions& opt) {
  p.validate();
  Tableau t(p, opt);
  return t.run();
}

// Text format:
//   codvar-lp 1
//   vars <n>
//   var <index> free|nonneg <cost> [name]
//   eq <rhs> <k> j:a ... [#name]
//   le <rhs> <k> j:a ... [#name]
//   end
void write_lp(std::ostream& os, const LinearProgram& p) {
  os << std::setprecision(17);
  os << "codvar-lp 1\n";
  os << "vars " << p.num_vars() << "\n";
  for (std::size_t j = 0; j < p.num_vars(); ++j) {
    os << "var " << j << ' ' << (p.sign[j] == VarSign::Free ? "free" : "nonneg") << ' ' << p.cost[j];
    if (j < p.names.size() && !p.names[j].empty()) os << ' ' << p.names[j];
    os << '\n';
  }
  auto rows = [&os](const char* tag, const std::vector<LpRow>& r, const std::vector<double>& b,
                    const std::vector<std::string>& nm) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      os << tag << ' ' << b[i] << ' ' << r[i].size();
      for (auto [j, a] : r[i]) os << ' ' << j << ':' << a;
      if (i < nm.size() && !nm[i].empty()) os << " #" << nm[i];
      os << '\n';
    }
  };
  rows("eq", p.eq_rows, p.eq_rhs, p.eq_names);
  rows("le", p.le_rows, p.le_rhs, p.le_names);
  os << "end\n";
}

LinearProgram read_lp(std::istream& is) {
  LinearProgram p;
  std::string line;
  if (!std::getline(is, line) || line.rfind("codvar-lp", 0) != 0)
    throw std::runtime_error("read_lp: missing header");
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") break;
    if (tag == "vars") continue;
    if (tag == "var") {
      std::size_t j;
      std::string s, name;
      double c;
      ls >> j >> s >> c;
      ls >> name;
      p.add_var(s == "free" ? VarSign::Free : VarSign::NonNeg, c, name);
    } else if (tag == "eq" || tag == "le") {
      double b;
      std::size_t k;
      ls >> b >> k;
      LpRow r;
      for (std::size_t t = 0; t < k; ++t) {
        std::string tok;
        ls >> tok;
        auto colon = tok.find(':');
        if (colon == std::string::npos) throw std::runtime_error("read_lp: bad entry " + tok);
        r.emplace_back(std::stoi(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
      }
      std::string name;
      ls >> name;
      if (!name.empty() && name[0] == '#') name.erase(0, 1);
      if (tag == "eq") p.add_eq(std::move(r), b, name);
      else p.add_le(std::move(r), b, name);
    } else if (!tag.empty()) {
      throw std::runtime_error("read_lp: unknown tag " + tag);
    }
  }
  return p;
}

}  // namespace codvar
