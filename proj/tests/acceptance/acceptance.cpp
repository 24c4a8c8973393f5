// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "codvar/descent.hpp"
#include "codvar/noether.hpp"
#include "codvar/optimality.hpp"
#include "integrands.hpp"
#include "oracles.hpp"
#include "worked_examples.hpp"

using namespace codvar;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Result {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Result()>& body) {
  Result r;
  auto t0 = Clock::now();
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  if (!r.pass) ++failures;
  std::printf("%s criterion %d (%s): %s [%.2fs]\n", r.pass ? "PASS" : "FAIL", id, title, r.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Result criterion1() {
  auto t0 = Clock::now();
  auto e = worked::ex31(16);
  auto cert = check_unconstrained(e.p, e.u, e.sel);
  double t = seconds_since(t0);
  double pairing = worked::ex31_min_pairing(16);
  bool ok = cert.verdict == Verdict::ConditionsFail && cert.farkas_check >= 0.0 && cert.farkas_check <= 1e-9 &&
            t < 30.0 && pairing >= 4.0 / 3.0 - 0.25 && pairing > 1.0;
  return {ok, std::string(to_string(cert.verdict)) + fmt(", farkas check %.2e", cert.farkas_check) +
                  fmt(", check %.2fs", t) + fmt(", min pairing %.4f (bound 4/3 - 0.25)", pairing)};
}

Result criterion2() {
  auto t0 = Clock::now();
  auto e = worked::ex32(32);
  auto cq = check_cq_boundary(e.p, e.u, e.bsel);
  auto cert = check_boundary(e.p, e.u, e.sel, e.bsel);
  auto b = worked::ex32_implied(cert.lp);
  double t = seconds_since(t0);
  const double h = 1.0 / 32.0;
  // mu_l - mu_u >= 1 - O(h) and mu_u - mu_l >= 1 - O(h) together say 2 + mu_l <= mu_l.
  double gap = b.lower_minus_upper + b.upper_minus_lower;
  bool ok = cq.holds && cert.verdict == Verdict::ConditionsFail && cert.farkas_check <= 1e-9 && b.ok &&
            gap >= 2.0 - h - 1e-9 && t < 1.0;
  return {ok, std::string("CQ ") + (cq.holds ? "holds" : "fails") + ", " + to_string(cert.verdict) +
                  fmt(", implied gap %.5f", gap) + fmt(" (2 - h = %.5f)", 2.0 - h) + fmt(", %.2fs", t)};
}

Result criterion3() {
  auto t0 = Clock::now();
  auto e = worked::ex33(64);
  auto r = check_isoperimetric(e.p, e.u, e.sels);
  double t = seconds_since(t0);
  auto p = worked::make_problem("max(-abs(u1), -abs(xi1))", Grid({0.0}, {1.0}, {64}), 1);
  descent::DescentParams prm;
  prm.max_iterations = 100;
  auto d = descent::solve(p, p.u0, prm);
  bool ok = r.cq_holds && r.optimality.verdict == Verdict::ConditionsFail && r.optimality.farkas_check <= 1e-9 &&
            t < 10.0 && d.value < 0.0 && d.trace.size() <= 100;
  return {ok, std::string("CQ ") + (r.cq_holds ? "holds" : "fails") + ", " + to_string(r.optimality.verdict) +
                  fmt(", %.2fs", t) + fmt(", descent value %.4g", d.value) +
                  fmt(" after %.0f iterations", static_cast<double>(d.trace.size()))};
}

Result criterion4() {
  auto e = worked::ex34(256);
  auto cp = convexify_nonholonomic(e.p, e.u, e.f_sel, e.g_sels);
  double rep = cp.cq_report(worked::ex34_h_star(e));
  auto m1 = min_total_mass(cp, {worked::ex34_test_field(e, 16)});
  auto m2 = min_total_mass(cp, {worked::ex34_test_field(e, 64)});
  bool ok = rep <= -1.0 + 1e-9 && m1.status == LpStatus::Feasible && m2.status == LpStatus::Feasible &&
            m1.mass >= 16.0 * 0.95 && m2.mass >= 64.0 * 0.95;
  return {ok, fmt("CQ report %.6f", rep) + fmt(", mass(h1) %.4f", m1.mass) + fmt(", mass(h2) %.4f", m2.mass)};
}

Result criterion5() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(20240501);
  double worst_dd = 0.0, worst_dc = 0.0;
  std::size_t count = 0;
  auto lib = library::integrands();
  for (const auto& entry : lib) {
    auto e = parse(entry.text, &entry.dims);
    const auto sel = VariableSelector::u_xi();
    std::size_t n = selected_dim(sel, entry.dims);
    for (int k = 0; k < 100; ++k) {
      auto p = library::random_point(rng, entry.dims);
      Vec dir = oracle::random_vec(rng, n);
      double norm = 0.0;
      for (double v : dir) norm += v * v;
      norm = std::sqrt(norm);
      if (norm < 1e-3) continue;
      for (double& v : dir) v /= norm;
      auto r = codiff_at(e, sel, entry.dims, p);
      const double t = 1e-6;
      double f1 = eval(e, library::offset(p, dir, t));
      worst_dd = std::max(worst_dd, std::abs(directional_derivative(r.cd, dir) - (f1 - r.value) / t));
      Vec step(n);
      for (std::size_t i = 0; i < n; ++i) step[i] = t * dir[i];
      worst_dc = std::max(worst_dc, std::abs(f1 - r.value - dc_increment(r.cd, step)) / t);
      ++count;
    }
  }
  double s = seconds_since(t0);
  bool ok = lib.size() >= 8 && worst_dd <= 1e-4 && worst_dc < 1e-3 && s < 60.0 && count >= 100 * lib.size() - 20;
  return {ok, fmt("%.0f integrands", static_cast<double>(lib.size())) + fmt(", %.0f samples", static_cast<double>(count)) +
                  fmt(", max |dd - fd| %.2e", worst_dd) + fmt(", max DC residual %.2e", worst_dc)};
}

double sbp_defect(const Grid& g, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1, 1);
  const std::size_t w = m * g.dim();
  Vec zeta(g.num_cells() * w);
  for (auto& z : zeta) z = U(rng);
  DiscreteField h = DiscreteField::zeros(g, m);
  for (std::size_t n = 0; n < g.num_nodes(); ++n)
    if (!g.on_boundary(n))
      for (std::size_t i = 0; i < m; ++i) h(n, i) = U(rng);
  Vec gh = gradient(g, h);
  double lhs = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c)
    for (std::size_t k = 0; k < w; ++k) lhs += g.cell_weight(c) * zeta[c * w + k] * gh[c * w + k];
  Vec dz = divergence(g, m, zeta);
  double rhs = 0.0;
  for (std::size_t n = 0; n < g.num_nodes(); ++n)
    for (std::size_t i = 0; i < m; ++i) rhs -= g.node_weight(n) * dz[n * m + i] * h(n, i);
  return std::abs(lhs - rhs);
}

Result criterion6() {
  std::mt19937_64 rng(606);
  double worst1 = 0.0, worst2 = 0.0;
  for (int t = 0; t < 50; ++t) {
    worst1 = std::max(worst1, sbp_defect(Grid({0.0}, {3.0}, {23}), 2, rng));
    worst2 = std::max(worst2, sbp_defect(Grid({-1.0, -1.0}, {1.0, 1.0}, {7, 6}), 2, rng));
  }
  return {worst1 <= 1e-13 && worst2 <= 1e-13, fmt("max defect 1D %.2e", worst1) + fmt(", 2D %.2e", worst2)};
}

Result criterion7() {
  auto q = worked::make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {32}), 1);
  q.u0 = sample(q.grid, 1, [](const Vec& x, std::size_t) { return x[0]; });
  auto F = assemble_codifferential(q.integrand, q.grid, q.u0);
  auto el = check_unconstrained(q, q.u0, first_face_vertex(F.cells));
  double zerr = 0.0;
  for (double z : el.witness.zeta) zerr = std::max(zerr, std::abs(z - 1.0));

  CellSelection xs;
  for (std::size_t c = 0; c < q.grid.num_cells(); ++c) {
    auto vc = codiff_at(q.integrand, VariableSelector::x_xi(), q.dims(), cell_point(q.grid, q.u0, c));
    Vec co(vc.cd.hyper.size(), 0.0);
    co[zero_face(vc.cd.hyper).front()] = 1.0;
    xs.coeffs.push_back(co);
  }
  auto no = check_noether(q, q.u0, xs);
  double nerr = 0.0;
  for (double z : no.witness.zeta) nerr = std::max(nerr, std::abs(z - 0.5));

  auto en = check_energy_conservation(q, q.u0);
  double c = en.witness.energy.value_or(NAN);
  auto sq = q;
  sq.u0 = sample(sq.grid, 1, [](const Vec& x, std::size_t) { return x[0] * x[0]; });
  auto bad = check_energy_conservation(sq, sq.u0);

  bool ok = el.verdict == Verdict::ConditionsHold && zerr <= 1e-9 && no.verdict == Verdict::ConditionsHold &&
            !no.witness.zeta.empty() && nerr <= 1e-9 && en.verdict == Verdict::ConditionsHold &&
            std::abs(c - 0.5) <= 1e-10 && bad.verdict == Verdict::ConditionsFail;
  return {ok, fmt("zeta error %.2e", zerr) + fmt(", noether current error %.2e", nerr) + fmt(", c = %.12f", c) +
                  ", x^2: " + to_string(bad.verdict)};
}

Result criterion8() {
  auto p = worked::make_problem("0.5*xi1^2 + abs(u1)", Grid({0.0}, {1.0}, {64}), 1);
  double worst = 0.0;
  std::size_t most = 0;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    DiscreteField u0 = DiscreteField::zeros(p.grid, 1);
    for (std::size_t n = 0; n < p.grid.num_nodes(); ++n)
      if (!p.grid.on_boundary(n)) u0(n, 0) = U(rng);
    descent::DescentParams prm;
    prm.seed = seed;
    auto r = descent::solve(p, u0, prm);
    double prev = assemble_value(p.integrand, p.grid, u0);
    for (const auto& t : r.trace) {
      ok = ok && t.value <= prev;
      prev = t.value;
    }
    ok = ok && r.value <= 1e-6 && r.trace.size() <= 200;
    worst = std::max(worst, r.value);
    most = std::max(most, r.trace.size());
  }
  return {ok, fmt("worst final value %.2e", worst) + fmt(", most iterations %.0f", static_cast<double>(most)) +
                  (ok ? ", traces monotone" : "")};
}

Result criterion9() {
  std::mt19937_64 rng(909);
  int mismatches = 0, infeasible = 0, bad_farkas = 0;
  for (int t = 0; t < 1000; ++t) {
    auto p = oracle::random_lp(rng);
    auto ref = oracle::brute_force_min(p);
    auto r = solve(p);
    if (!ref) {
      ++infeasible;
      if (r.status != LpStatus::Infeasible) ++mismatches;
      else if (!(farkas_violation(p, r.farkas_eq, r.farkas_le) <= 1e-9)) ++bad_farkas;
    } else if (r.status != LpStatus::Feasible ||
               std::abs(r.objective - *ref) > 1e-7 * (1.0 + std::abs(*ref)) || primal_violation(p, r.x) > 1e-9) {
      ++mismatches;
    }
  }
  return {mismatches == 0 && bad_farkas == 0,
          fmt("1000 LPs, %.0f infeasible", infeasible) + fmt(", %.0f mismatches", mismatches) +
              fmt(", %.0f invalid Farkas vectors", bad_farkas)};
}

}  // namespace

int main() {
  report(1, "|xi1| - |xi2| refutation", criterion1);
  report(2, "endpoint-constrained refutation", criterion2);
  report(3, "isoperimetric refutation and descent", criterion3);
  report(4, "nonholonomic CQ report and multiplier mass", criterion4);
  report(5, "calculus suite", criterion5);
  report(6, "gradient/divergence adjointness", criterion6);
  report(7, "smooth regression", criterion7);
  report(8, "descent convergence", criterion8);
  report(9, "LP kernel", criterion9);
  return failures == 0 ? 0 : 1;
}
