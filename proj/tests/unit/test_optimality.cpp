#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "codvar/optimality.hpp"
#include "worked_examples.hpp"

using namespace codvar;
using worked::make_problem;

namespace {

DiscreteField linear_field(const Grid& g, double slope) {
  return sample(g, 1, [&](const Vec& x, std::size_t) { return slope * x[0]; });
}

Certificate check_default(const VariationalProblem& p, const DiscreteField& u) {
  auto F = assemble_codifferential(p.integrand, p.grid, u);
  return check_unconstrained(p, u, first_face_vertex(F.cells));
}

}  // namespace

TEST_CASE("quadratic extremal: zeta recovers f_xi") {
  for (std::size_t N : {8u, 33u}) {
    auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {N}), 1);
    p.u0 = linear_field(p.grid, 1.0);
    auto cert = check_default(p, p.u0);
    REQUIRE(cert.verdict == Verdict::ConditionsHold);
    for (double z : cert.witness.zeta) CHECK(std::abs(z - 1.0) < 1e-9);
    for (double dz : cert.witness.div_zeta) CHECK(std::abs(dz) < 1e-9);
    CHECK(cert.witness.residual < 1e-9);
  }
}

TEST_CASE("quadratic in 2D with affine u") {
  auto p = make_problem("0.5*xi11^2 + 0.5*xi12^2", Grid({0.0, 0.0}, {1.0, 2.0}, {6, 5}), 1);
  p.u0 = sample(p.grid, 1, [](const Vec& x, std::size_t) { return 2.0 * x[0] - x[1]; });
  auto cert = check_default(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  for (std::size_t c = 0; c < p.grid.num_cells(); ++c) {
    CHECK(std::abs(cert.witness.zeta[2 * c] - 2.0) < 1e-9);
    CHECK(std::abs(cert.witness.zeta[2 * c + 1] + 1.0) < 1e-9);
  }
}

TEST_CASE("abs(u) at zero holds with zero flux") {
  auto p = make_problem("abs(u1)", Grid({0.0}, {1.0}, {16}), 1);
  auto u = DiscreteField::zeros(p.grid, 1);
  auto cert = check_default(p, u);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  for (double z : cert.witness.zeta) CHECK(z == doctest::Approx(0.0));
}

TEST_CASE("non-extremal smooth field fails with a validated certificate") {
  auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {10}), 1);
  auto u = sample(p.grid, 1, [](const Vec& x, std::size_t) { return x[0] * (1.0 - x[0]); });
  p.u0 = u;
  auto cert = check_default(p, u);
  CHECK(cert.verdict == Verdict::ConditionsFail);
  CHECK(cert.farkas_check >= 0.0);
  CHECK(cert.farkas_check < 1e-9);
}

TEST_CASE("example: |xi1| - |xi2| with the alternating selection fails") {
  auto e = worked::ex31(8);
  auto cert = check_unconstrained(e.p, e.u, e.sel);
  CHECK(cert.verdict == Verdict::ConditionsFail);
  CHECK(cert.farkas_check < 1e-9);
  // Clarke-type selection (w = 0) is consistent.
  std::vector<Vec> zero(e.p.grid.num_cells(), Vec{0.0, 0.0, 0.0});
  auto ok = check_unconstrained(e.p, e.u, select_points(e.F.cells, zero));
  CHECK(ok.verdict == Verdict::ConditionsHold);
}

TEST_CASE("pairing bound for the alternating selection") {
  for (std::size_t N : {16u, 32u}) CHECK(worked::ex31_min_pairing(N) > 4.0 / 3.0 - 0.25);
}

TEST_CASE("verdict is invariant under positive scaling") {
  auto e = worked::ex31(6);
  auto p2 = e.p;
  p2.integrand = parse("3*(abs(xi11) - abs(xi12))");
  auto F2 = assemble_codifferential(p2.integrand, p2.grid, e.u);
  std::vector<Vec> pts;
  for (std::size_t c = 0; c < p2.grid.num_cells(); ++c) {
    Vec v = selection_point(e.F.cells[c].hyper, e.sel.coeffs[c]).v;
    for (double& x : v) x *= 3.0;
    pts.push_back(v);
  }
  auto a = check_unconstrained(e.p, e.u, e.sel);
  auto b = check_unconstrained(p2, e.u, select_points(F2.cells, pts));
  CHECK(a.verdict == b.verdict);

  auto q = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {8}), 1);
  q.u0 = linear_field(q.grid, 1.0);
  auto q2 = q;
  q2.integrand = parse("2.5*(0.5*xi1^2)");
  auto c1 = check_default(q, q.u0), c2 = check_default(q2, q.u0);
  REQUIRE(c1.verdict == Verdict::ConditionsHold);
  REQUIRE(c2.verdict == Verdict::ConditionsHold);
  for (std::size_t c = 0; c < c1.witness.zeta.size(); ++c)
    CHECK(c2.witness.zeta[c] == doctest::Approx(2.5 * c1.witness.zeta[c]).epsilon(1e-12));
}

TEST_CASE("precondition and selection errors") {
  auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {4}), 1);
  p.u0 = linear_field(p.grid, 1.0);
  auto bad = DiscreteField::zeros(p.grid, 1);
  auto F = assemble_codifferential(p.integrand, p.grid, p.u0);
  CHECK_THROWS_AS(check_unconstrained(p, bad, first_face_vertex(F.cells)), std::invalid_argument);
  CellSelection short_sel = first_face_vertex(F.cells);
  short_sel.coeffs.pop_back();
  CHECK_THROWS_AS(check_unconstrained(p, p.u0, short_sel), std::invalid_argument);
  auto e = worked::ex31(4);
  CHECK_THROWS_AS(select_points(e.F.cells, std::vector<Vec>(16, Vec{0.0, 0.0, 2.0})), std::invalid_argument);
}

TEST_CASE("vertex pattern enumeration") {
  auto e = worked::ex31(4);
  std::vector<std::size_t> region(16);
  for (std::size_t c = 0; c < 16; ++c) region[c] = c < 8 ? 0 : 1;
  auto pats = enumerate_vertex_patterns(e.F.cells, region, 2, 100);
  CHECK(pats.size() == 4);
  CHECK(enumerate_vertex_patterns(e.F.cells, region, 2, 3).size() == 3);
  for (auto& s : pats)
    for (std::size_t c = 0; c < 16; ++c) CHECK(selection_point(e.F.cells[c].hyper, s.coeffs[c]).a == 0.0);
}

TEST_CASE("certificate serialization") {
  auto e = worked::ex31(4);
  auto cert = check_unconstrained(e.p, e.u, e.sel);
  std::ostringstream os;
  write_certificate(os, cert);
  std::string s = os.str();
  CHECK(s.find("verdict ConditionsFail") != std::string::npos);
  CHECK(s.find("farkas_eq ") != std::string::npos);
  CHECK(s.find("resolution 4x4") != std::string::npos);
}

// ---- boundary ------------------------------------------------------------

TEST_CASE("boundary example: CQ holds and transversality fails") {
  auto e = worked::ex32(32);
  auto cq = check_cq_boundary(e.p, e.u, e.bsel);
  CHECK(cq.holds);
  CHECK(cq.lps == 2);
  auto cert = check_boundary(e.p, e.u, e.sel, e.bsel);
  CHECK(cert.verdict == Verdict::ConditionsFail);
  CHECK(cert.farkas_check < 1e-9);
  auto b = worked::ex32_implied(cert.lp);
  REQUIRE(b.ok);
  double h = 1.0 / 32.0;
  CHECK(b.lower_minus_upper >= 1.0 - h / 2 - 1e-9);
  CHECK(b.upper_minus_lower >= 1.0 - h / 2 - 1e-9);
}

TEST_CASE("boundary selections are validated") {
  auto e = worked::ex32(8);
  BoundarySelections bad = e.bsel;
  bad.s = {{0.0, 0.0, 1.0, 0.0}};  // not in the hyper face
  CHECK_THROWS_AS(check_boundary(e.p, e.u, e.sel, bad), std::invalid_argument);
}

TEST_CASE("single inequality with zero in the shifted face: CQ fails") {
  VariationalProblem p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {4}), 1);
  p.g_ineq.push_back(parse_boundary("abs(ub1)", 1));
  auto u = DiscreteField::zeros(p.grid, 1);
  auto cq = check_cq_boundary(p, u, {});
  CHECK_FALSE(cq.holds);
  CHECK(cq.failed == "active inequalities");
}

TEST_CASE("natural boundary condition") {
  VariationalProblem p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {16}), 1);
  p.g0 = parse_boundary("ub1", 1);
  p.g_eq.push_back(parse_boundary("ua1", 1));
  auto u = linear_field(p.grid, -1.0);
  auto F = assemble_codifferential(p.integrand, p.grid, u);
  CHECK(check_cq_boundary(p, u, {}).holds);
  auto cert = check_boundary(p, u, first_face_vertex(F.cells), {});
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  for (double z : cert.witness.zeta) CHECK(z == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cert.witness.zeta_ends[0] == doctest::Approx(-1.0));
  CHECK(cert.witness.zeta_ends[1] == doctest::Approx(-1.0));
  CHECK(cert.witness.mu_lower[0] - cert.witness.mu_upper[0] == doctest::Approx(-1.0));
  // The wrong slope violates the natural condition.
  auto w = linear_field(p.grid, -0.5);
  CHECK(check_boundary(p, w, first_face_vertex(F.cells), {}).verdict == Verdict::ConditionsFail);
}

TEST_CASE("no boundary terms agrees with the unconstrained verdict") {
  for (const char* f : {"0.5*xi1^2 + abs(u1)", "abs(u1) + abs(xi1)"}) {
    auto p = make_problem(f, Grid({0.0}, {1.0}, {12}), 1);
    auto u = DiscreteField::zeros(p.grid, 1);
    auto F = assemble_codifferential(p.integrand, p.grid, u);
    auto sel = first_face_vertex(F.cells);
    auto a = check_unconstrained(p, u, sel);
    auto b = check_boundary(p, u, sel, {});
    CHECK(a.verdict == b.verdict);
  }
}

TEST_CASE("hull_meets_cone against 2D separating directions") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Vec> P, Q;
    int np = 1 + static_cast<int>(rng() % 3), nq = static_cast<int>(rng() % 3);
    for (int k = 0; k < np; ++k) P.push_back({U(rng), U(rng)});
    for (int k = 0; k < nq; ++k) Q.push_back({U(rng), U(rng)});
    // Disjoint iff some y has y.p > 0 on P and y.q >= 0 on Q; margin decides ambiguous cases.
    double best = -1e9;
    for (int a = 0; a < 20000; ++a) {
      double t = 2.0 * M_PI * a / 20000.0, y0 = std::cos(t), y1 = std::sin(t);
      double mp = 1e9, mq = 1e9;
      for (auto& p : P) mp = std::min(mp, y0 * p[0] + y1 * p[1]);
      for (auto& q : Q) mq = std::min(mq, y0 * q[0] + y1 * q[1]);
      best = std::max(best, std::min(mp, Q.empty() ? 1e9 : mq));
    }
    if (std::abs(best) < 1e-2) continue;
    ++checked;
    Vec pt;
    bool meets = hull_meets_cone(P, Q, &pt);
    CHECK(meets == (best < 0));
  }
  CHECK(checked > 200);
}

// ---- isoperimetric ---------------------------------------------------------

TEST_CASE("isoperimetric example: CQ holds, optimality fails") {
  auto e = worked::ex33(32);
  auto r = check_isoperimetric(e.p, e.u, e.sels);
  CHECK(r.active.size() == 1);
  CHECK(r.cq_holds);
  CHECK(r.optimality.verdict == Verdict::ConditionsFail);
  CHECK(r.optimality.farkas_check < 1e-9);
}

TEST_CASE("inactive isoperimetric constraint reduces to the unconstrained check") {
  auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {8}), 1);
  p.u0 = linear_field(p.grid, 1.0);
  p.isoperimetric.push_back({parse("u1"), 10.0});
  auto F0 = assemble_codifferential(p.integrand, p.grid, p.u0);
  auto F1 = assemble_codifferential(p.isoperimetric[0].f, p.grid, p.u0);
  auto r = check_isoperimetric(p, p.u0, {first_face_vertex(F0.cells), first_face_vertex(F1.cells)});
  CHECK(r.active.empty());
  REQUIRE(r.optimality.verdict == Verdict::ConditionsHold);
  CHECK(r.optimality.witness.lambda[0] == 0.0);
  auto plain = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {8}), 1);
  plain.u0 = p.u0;
  CHECK(check_default(plain, p.u0).verdict == r.optimality.verdict);
}

TEST_CASE("active isoperimetric constraint with a multiplier") {
  // min int 0.5 u'^2 s.t. int -u <= -1/12, zero BC: the extremal u = x(1-x)/2 has lambda = 1.
  auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {16}), 1);
  auto u = sample(p.grid, 1, [](const Vec& x, std::size_t) { return 0.5 * x[0] * (1.0 - x[0]); });
  p.u0 = u;
  p.isoperimetric.push_back({parse("-u1"), 0.0});
  p.isoperimetric[0].theta = assemble_value(p.isoperimetric[0].f, p.grid, u);
  auto F0 = assemble_codifferential(p.integrand, p.grid, u);
  auto F1 = assemble_codifferential(p.isoperimetric[0].f, p.grid, u);
  auto r = check_isoperimetric(p, u, {first_face_vertex(F0.cells), first_face_vertex(F1.cells)});
  CHECK(r.cq_holds);
  REQUIRE(r.optimality.verdict == Verdict::ConditionsHold);
  CHECK(r.optimality.witness.lambda[0] == doctest::Approx(1.0).epsilon(1e-6));
}

// ---- nonholonomic ----------------------------------------------------------

TEST_CASE("nonholonomic example: convexification and CQ report") {
  auto e = worked::ex34(96);
  auto cp = convexify_nonholonomic(e.p, e.u, e.f_sel, e.g_sels);
  CHECK(cp.cq_report(worked::ex34_h_star(e)) <= -1.0 + 1e-9);
  auto zero = DiscreteField::zeros(e.p.grid, 1);
  CHECK(cp.objective(zero) == 0.0);
  for (std::size_t c = 0; c < e.p.grid.num_cells(); ++c) CHECK(cp.phi(0, c, zero) == cp.g_values[0][c]);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    auto h1 = DiscreteField::zeros(e.p.grid, 1), h2 = h1, hm = h1;
    for (std::size_t n = 1; n + 1 < e.p.grid.num_nodes(); ++n) {
      h1(n, 0) = U(rng);
      h2(n, 0) = U(rng);
      hm(n, 0) = 0.5 * (h1(n, 0) + h2(n, 0));
    }
    CHECK(cp.objective(hm) <= 0.5 * cp.objective(h1) + 0.5 * cp.objective(h2) + 1e-12);
  }
}

TEST_CASE("nonholonomic example: regular multipliers fail, mass grows") {
  auto e = worked::ex34(192);
  auto cert = check_nonholonomic_regular(e.p, e.u, e.f_sel, e.g_sels);
  CHECK(cert.verdict == Verdict::ConditionsFail);
  auto cp = convexify_nonholonomic(e.p, e.u, e.f_sel, e.g_sels);
  for (std::size_t s : {16u, 64u}) {
    auto h = worked::ex34_test_field(e, s);
    CHECK(cp.objective(h) == doctest::Approx(-1.0).epsilon(1e-12));
    auto r = min_total_mass(cp, {h});
    REQUIRE(r.status == LpStatus::Feasible);
    CHECK(r.mass == doctest::Approx(static_cast<double>(s)).epsilon(0.05));
  }
}

TEST_CASE("smooth feasible nonholonomic instance holds with zero multipliers") {
  auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {16}), 1);
  p.nonholonomic.push_back(parse("u1"));
  auto u = DiscreteField::zeros(p.grid, 1);
  auto F = assemble_codifferential(p.integrand, p.grid, u);
  auto G = assemble_codifferential(p.nonholonomic[0], p.grid, u);
  auto cert = check_nonholonomic_regular(p, u, first_face_vertex(F.cells), {first_face_vertex(G.cells)});
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  for (double z : cert.witness.zeta) CHECK(z == doctest::Approx(0.0));
  // Inactive everywhere: lambda vanishes identically.
  p.nonholonomic[0] = parse("u1 - 1");
  auto G2 = assemble_codifferential(p.nonholonomic[0], p.grid, u);
  auto c2 = check_nonholonomic_regular(p, u, first_face_vertex(F.cells), {first_face_vertex(G2.cells)});
  REQUIRE(c2.verdict == Verdict::ConditionsHold);
  for (double l : c2.witness.lambda) CHECK(l == 0.0);
  CHECK(check_default(make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {16}), 1), u).verdict == c2.verdict);
}

TEST_CASE("nonholonomic checks reject d = 2") {
  auto p = make_problem("0.5*xi11^2", Grid({0.0, 0.0}, {1.0, 1.0}, {2, 2}), 1);
  p.nonholonomic.push_back(parse("u1"));
  auto u = DiscreteField::zeros(p.grid, 1);
  auto F = assemble_codifferential(p.integrand, p.grid, u);
  CHECK_THROWS_AS(check_nonholonomic_regular(p, u, first_face_vertex(F.cells), {first_face_vertex(F.cells)}),
                  std::invalid_argument);
}
