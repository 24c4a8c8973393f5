#include <doctest.h>

#include <cmath>
#include <sstream>

#include "codvar/noether.hpp"
#include "worked_examples.hpp"

using namespace codvar;
using worked::make_problem;

namespace {

CellSelection first_hyper_xxi(const VariationalProblem& p, const DiscreteField& u) {
  CellSelection s;
  for (std::size_t c = 0; c < p.grid.num_cells(); ++c) {
    auto vc = codiff_at(p.integrand, VariableSelector::x_xi(), p.dims(), cell_point(p.grid, u, c));
    Vec co(vc.cd.hyper.size(), 0.0);
    co[zero_face(vc.cd.hyper).front()] = 1.0;
    s.coeffs.push_back(co);
  }
  return s;
}

NoetherCertificate noether(const VariationalProblem& p, const DiscreteField& u) {
  return check_noether(p, u, first_hyper_xxi(p, u));
}

VariationalProblem with_field(VariationalProblem p, const std::function<double(double)>& f) {
  p.u0 = sample(p.grid, 1, [&](const Vec& x, std::size_t) { return f(x[0]); });
  return p;
}

}  // namespace

TEST_CASE("noether current of the quadratic with a linear extremal") {
  auto p = with_field(make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {8}), 1), [](double x) { return x; });
  auto cert = noether(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  REQUIRE(cert.witness.zeta.size() == 8);
  for (double z : cert.witness.zeta) CHECK(std::abs(z - 0.5) < 1e-12);
  for (double dz : cert.witness.div_zeta) CHECK(std::abs(dz) < 1e-12);
  CHECK(cert.condition == "noether");
}

TEST_CASE("noether current in 2D matches grad u^T f_xi - f I") {
  auto p = make_problem("0.5*xi11^2 + 0.5*xi12^2", Grid({0.0, 0.0}, {1.0, 1.0}, {4, 5}), 1);
  const double a = 0.7, b = -1.3;
  p.u0 = sample(p.grid, 1, [&](const Vec& x, std::size_t) { return a * x[0] + b * x[1]; });
  auto cert = noether(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  const double f = 0.5 * (a * a + b * b);
  const double expect[4] = {a * a - f, a * b, b * a, b * b - f};
  for (std::size_t c = 0; c < p.grid.num_cells(); ++c)
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(cert.witness.zeta[4 * c + k] - expect[k]) < 1e-9);
}

TEST_CASE("noether for |xi| with u = x has zero current") {
  auto p = with_field(make_problem("abs(xi1)", Grid({0.0}, {2.0}, {10}), 1), [](double x) { return x; });
  auto cert = noether(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  for (double z : cert.witness.zeta) CHECK(std::abs(z) < 1e-12);
}

TEST_CASE("noether rows for x*xi against a hand-assembled LP") {
  // Weak form on N = 4: sum_c w_c [zeta_c phi_n'(c) - v1_c phibar_n(c)] = 0 at interior nodes, with
  // zeta_c = u'_c x_c - f_c and v1_c = u'_c (single hypo vertex, beta_c = 1).
  for (double slope : {0.0, 1.0}) {
    auto p = with_field(make_problem("x1*xi1", Grid({0.0}, {1.0}, {4}), 1), [&](double x) { return 2.0 + slope * x; });
    auto cert = noether(p, p.u0);

    LinearProgram hand;
    const Grid& g = p.grid;
    const double h = g.h(0);
    std::vector<int> beta;
    for (std::size_t c = 0; c < 4; ++c) {
      beta.push_back(hand.add_var(VarSign::NonNeg));
      hand.add_eq({{beta.back(), 1.0}}, 1.0);
    }
    for (std::size_t n = 1; n < 4; ++n) {
      LpRow row;
      double rhs = 0.0;
      for (std::size_t c : {n - 1, n}) {
        double xc = g.cell_center(c)[0];
        double zeta = slope * xc - xc * slope;
        double dphi = c == n - 1 ? 1.0 / h : -1.0 / h;
        rhs -= h * zeta * dphi;
        row.emplace_back(beta[c], -h * slope * 0.5);
      }
      hand.add_eq(row, rhs);
    }
    auto ref = solve(hand);
    bool hand_feasible = ref.status == LpStatus::Feasible;
    CHECK(hand_feasible == (slope == 0.0));
    CHECK((cert.verdict == Verdict::ConditionsHold) == hand_feasible);
    if (!hand_feasible) {
      CHECK(cert.verdict == Verdict::ConditionsFail);
      CHECK(cert.farkas_check >= 0.0);
      CHECK(cert.farkas_check <= 1e-9);
    }
  }
}

TEST_CASE("noether with a nonsmooth hypo keeps the witness coefficients") {
  auto p = make_problem("abs(xi1) + 0.5*xi1^2", Grid({0.0}, {1.0}, {6}), 1);
  auto cert = noether(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  CHECK(cert.witness.beta.size() >= 6);
  std::ostringstream os;
  write_certificate(os, cert);
  CHECK(os.str().find("beta ") != std::string::npos);
}

TEST_CASE("noether input errors") {
  auto p = make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {4}), 1);
  CellSelection short_sel;
  CHECK_THROWS_AS(check_noether(p, p.u0, short_sel), std::invalid_argument);
  auto q = p;
  q.isoperimetric.push_back({parse("u1"), 0.0});
  CHECK_THROWS_AS(check_noether(q, q.u0, first_hyper_xxi(p, p.u0)), std::invalid_argument);
}

TEST_CASE("energy conservation: linear extremal of the quadratic") {
  auto p = with_field(make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {16}), 1), [](double x) { return x; });
  auto cert = check_energy_conservation(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  REQUIRE(cert.witness.energy.has_value());
  CHECK(std::abs(*cert.witness.energy - 0.5) < 1e-10);
  CHECK(cert.witness.residual < 1e-10);
  std::ostringstream os;
  write_certificate(os, cert);
  CHECK(os.str().find("energy 5") != std::string::npos);
}

TEST_CASE("energy conservation: zero field of a nonsmooth integrand") {
  auto p = make_problem("0.5*xi1^2 + abs(u1)", Grid({0.0}, {1.0}, {16}), 1);
  auto cert = check_energy_conservation(p, p.u0);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  CHECK(std::abs(*cert.witness.energy) < 1e-12);
}

TEST_CASE("energy conservation fails for a non-extremal") {
  auto p = with_field(make_problem("0.5*xi1^2", Grid({0.0}, {1.0}, {16}), 1), [](double x) { return x * x; });
  auto cert = check_energy_conservation(p, p.u0);
  CHECK(cert.verdict == Verdict::ConditionsFail);
  CHECK(cert.farkas_check >= 0.0);
  CHECK(cert.farkas_check <= 1e-9);
}

TEST_CASE("energy constant shifts with the integrand") {
  auto p = with_field(make_problem("abs(xi1) + 0.25*xi1^2", Grid({0.0}, {1.0}, {12}), 1),
                      [](double x) { return -2.0 * x; });
  auto q = p;
  q.integrand = parse("abs(xi1) + 0.25*xi1^2 + 3");
  auto a = check_energy_conservation(p, p.u0);
  auto b = check_energy_conservation(q, q.u0);
  REQUIRE(a.verdict == Verdict::ConditionsHold);
  REQUIRE(b.verdict == Verdict::ConditionsHold);
  CHECK(std::abs(*b.witness.energy - (*a.witness.energy - 3.0)) < 1e-10);
  // u' = -2: |xi| contributes 2, the quadratic 2 - 1 = 1, so c = 1.
  CHECK(std::abs(*a.witness.energy - 1.0) < 1e-10);
}

TEST_CASE("energy with a fixed hyper selection") {
  auto p = make_problem("-abs(xi1)", Grid({0.0}, {1.0}, {8}), 1);
  // At xi = 0 the hyper face is {-1, 1} in the xi coordinate; u' = 0 makes the pairing vanish.
  CellSelection sel;
  for (std::size_t c = 0; c < 8; ++c) {
    auto vc = codiff_at(p.integrand, VariableSelector::xi_only(), p.dims(), cell_point(p.grid, p.u0, c));
    Vec co(vc.cd.hyper.size(), 0.0);
    co[0] = 1.0;
    sel.coeffs.push_back(co);
  }
  auto cert = check_energy_conservation(p, p.u0, &sel);
  REQUIRE(cert.verdict == Verdict::ConditionsHold);
  CHECK(std::abs(*cert.witness.energy) < 1e-12);
  CHECK(cert.selection.size() == 16);
}

TEST_CASE("energy preconditions") {
  auto p = make_problem("x1*xi1^2", Grid({0.0}, {1.0}, {4}), 1);
  CHECK_THROWS_AS(check_energy_conservation(p, p.u0), std::invalid_argument);
  auto q = make_problem("0.5*xi11^2", Grid({0.0, 0.0}, {1.0, 1.0}, {3, 3}), 1);
  CHECK_THROWS_AS(check_energy_conservation(q, q.u0), std::invalid_argument);
}
