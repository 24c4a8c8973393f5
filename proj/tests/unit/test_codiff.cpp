#include <doctest.h>

#include <cmath>
#include <random>

#include "codvar/codiff.hpp"
#include "codvar/expr.hpp"
#include "oracles.hpp"

using namespace codvar;

namespace {

Polytope P1(std::vector<std::pair<double, double>> pts) {
  std::vector<AffinePiece> v;
  for (auto [a, x] : pts) v.push_back({a, {x}});
  return Polytope(1, v);
}

// Phi + Psi agreement at quasi-random directions.
bool same_dc(const Codifferential& a, const Codifferential& b, int samples = 50, double tol = 1e-10) {
  std::mt19937_64 rng(1234);
  for (int k = 0; k < samples; ++k) {
    auto dx = oracle::random_vec(rng, a.dim(), 3.0);
    if (std::abs(dc_increment(a, dx) - dc_increment(b, dx)) > tol) return false;
  }
  return true;
}

bool normalized(const Codifferential& cd) {
  return std::abs(cd.hypo.max_a()) <= kTolNorm && std::abs(cd.hyper.min_a()) <= kTolNorm;
}

}  // namespace

TEST_CASE("phi_eval") {
  Vec z{0.0};
  CHECK(phi_eval(P1({{0, 1}, {0, -1}}), z) == 0.0);
  Polytope h(2, {{0.0, {0, 1}}, {0.0, {0, -1}}});
  CHECK(phi_eval(h, Vec{0, 2}) == 2.0);
  CHECK_THROWS(phi_eval(h, Vec{1.0}));
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto p = oracle::random_polytope(rng, 3, 6, true);
    auto dx = oracle::random_vec(rng, 3);
    CHECK(phi_eval(p, dx) == doctest::Approx(oracle::brute_phi(p, dx)).epsilon(1e-14));
  }
}

TEST_CASE("psi_eval") {
  CHECK(psi_eval(Polytope::zero(1), Vec{5.0}) == 0.0);
  CHECK(psi_eval(P1({{0, 1}, {0, -1}}), Vec{3.0}) == -3.0);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    auto p = oracle::random_polytope(rng, 2, 5, false);
    auto dx = oracle::random_vec(rng, 2);
    CHECK(psi_eval(p, dx) == doctest::Approx(oracle::brute_psi(p, dx)).epsilon(1e-14));
  }
}

TEST_CASE("linear_combine") {
  auto a = Codifferential::smooth({1.0, 2.0});
  auto b = Codifferential::smooth({-3.0, 0.5});
  Term t[2] = {{1.0, &a}, {1.0, &b}};
  auto s = linear_combine(t);
  REQUIRE(s.hypo.size() == 1);
  CHECK(s.hypo[0].v == Vec{-2.0, 2.5});
  CHECK(s.hyper.size() == 1);

  Codifferential absx{P1({{0, 1}, {0, -1}}), Polytope::zero(1)};
  Term neg{-1.0, &absx};
  auto n = linear_combine(std::span<const Term>(&neg, 1));
  CHECK(n.hypo.size() == 1);
  CHECK(n.hypo[0].v[0] == 0.0);
  CHECK(n.hyper.size() == 2);
  CHECK(psi_eval(n.hyper, Vec{2.0}) == -2.0);

  Codifferential abs1{P1({{0, 1}, {-2, -1}}), Polytope::zero(1)};
  Term two{2.0, &abs1};
  auto d = linear_combine(std::span<const Term>(&two, 1));
  for (double x : {-3.0, -0.5, 0.2, 4.0})
    CHECK(phi_eval(d.hypo, Vec{x}) == doctest::Approx(2 * phi_eval(abs1.hypo, Vec{x})));
  CHECK(normalized(d));
}

TEST_CASE("max_rule") {
  auto px = Codifferential::smooth({1.0});
  auto mx = Codifferential::smooth({-1.0});
  Codifferential cds[2] = {px, mx};
  double vals[2] = {0.0, 0.0};
  auto r = max_rule(cds, vals);
  Codifferential expect{P1({{0, 1}, {0, -1}}), Polytope::zero(1)};
  CHECK(same_dc(r, expect));
  CHECK(r.hypo.size() == 2);

  Codifferential one[1] = {expect};
  double v1[1] = {3.0};
  CHECK(same_dc(max_rule(one, v1), expect));
  CHECK_THROWS(max_rule(std::span<const Codifferential>(), std::span<const double>()));
}

TEST_CASE("max rule reproduces the listed codifferential of max{|xi|-|u|, 0}") {
  // Listed pair with M = max{|xi|, |u|}:
  //   hypo = co{(+-xi - M, (0, +-1)), (+-u - M, (+-1, 0))}, hyper = co{(+-u + |u|, (+-1, 0))}
  Expr e = parse("max(abs(xi1) - abs(u1), 0)");
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    double u = std::uniform_real_distribution<double>(-2, 2)(rng);
    double xi = std::uniform_real_distribution<double>(-2, 2)(rng);
    if (t % 4 == 0) u = 0;
    if (t % 5 == 0) xi = 0;
    Point p{{0.5}, {u}, {xi}, {}, {}, 1};
    auto r = codiff_at(e, VariableSelector::u_xi(), {1, 1}, p);
    double M = std::max(std::abs(xi), std::abs(u));
    std::vector<AffinePiece> hy, hr;
    for (double s : {1.0, -1.0}) {
      hy.push_back({s * xi - M, {0.0, s}});
      hy.push_back({s * u - M, {s, 0.0}});
      hr.push_back({s * u + std::abs(u), {s, 0.0}});
    }
    Codifferential listed{Polytope(2, hy), Polytope(2, hr)};
    CHECK(same_dc(r.cd, listed, 50, 1e-9));
  }
}

TEST_CASE("min_rule") {
  auto px = Codifferential::smooth({1.0});
  auto mx = Codifferential::smooth({-1.0});
  Codifferential cds[2] = {px, mx};
  double vals0[2] = {0.0, 0.0};
  auto r = min_rule(cds, vals0);
  CHECK(r.hypo.size() == 1);
  CHECK(same_dc(r, Codifferential{Polytope::zero(1), P1({{0, 1}, {0, -1}})}));

  // -|u| = min{u, -u} at u = 1: shifts f_i - min f are 2 and 0.
  double vals1[2] = {1.0, -1.0};
  auto m = min_rule(cds, vals1);
  CHECK(same_dc(m, Codifferential{Polytope::zero(1), P1({{2, 1}, {0, -1}})}));
  CHECK(normalized(m));
  for (double dx : {-3.0, -1.5, -0.2, 0.7})
    CHECK(-1.0 + dc_increment(m, Vec{dx}) == doctest::Approx(-std::abs(1.0 + dx)));
}

TEST_CASE("compose_smooth") {
  Codifferential abs1{P1({{0, 1}, {-2, -1}}), Polytope::zero(1)};
  double id[1] = {1.0};
  Codifferential one[1] = {abs1};
  CHECK(same_dc(compose_smooth(id, one), abs1));
  double sq[1] = {2.0};
  auto r = compose_smooth(sq, one);
  CHECK(same_dc(r, Codifferential{P1({{0, 2}, {-4, -2}}), Polytope::zero(1)}));
  double two[2] = {1.0, 1.0};
  Codifferential pair[2] = {abs1, abs1};
  Term t[2] = {{1.0, &abs1}, {1.0, &abs1}};
  CHECK(same_dc(compose_smooth(two, pair), linear_combine(t)));
  CHECK_THROWS(compose_smooth(two, one));
}

TEST_CASE("precompose_affine") {
  Codifferential c{P1({{0, 1}}), Polytope::zero(1)};
  Matrix M(1, 2);
  double h = 0.25;
  M(0, 0) = -1 / h;
  M(0, 1) = 1 / h;
  auto r = precompose_affine(c, M);
  REQUIRE(r.hypo.size() == 1);
  CHECK(r.hypo[0].v == Vec{-4.0, 4.0});
  CHECK(same_dc(precompose_affine(c, Matrix::identity(1)), c));

  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    Codifferential cd{oracle::random_polytope(rng, 3, 5, true), oracle::random_polytope(rng, 3, 4, false)};
    Matrix A(3, 4);
    for (auto& x : A.data) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    auto nw = precompose_affine(cd, A);
    for (int k = 0; k < 20; ++k) {
      auto dx = oracle::random_vec(rng, 4);
      Vec mdx(3, 0.0);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) mdx[i] += A(i, j) * dx[j];
      CHECK(phi_eval(nw.hypo, dx) == doctest::Approx(phi_eval(cd.hypo, mdx)).epsilon(1e-9));
      CHECK(psi_eval(nw.hyper, dx) == doctest::Approx(psi_eval(cd.hyper, mdx)).epsilon(1e-9));
    }
  }
  CHECK_THROWS(precompose_affine(c, Matrix(2, 2)));
}

TEST_CASE("quasidiff_extract") {
  auto q = quasidiff_extract({P1({{0, 1}, {-2, -1}}), Polytope::zero(1)});
  REQUIRE(q.sub.size() == 1);
  CHECK(q.sub[0] == Vec{1.0});
  CHECK(q.sup[0] == Vec{0.0});
  auto q2 = quasidiff_extract({P1({{0, 1}, {0, -1}}), Polytope::zero(1)});
  CHECK(q2.sub.size() == 2);

  Expr f0 = parse("max(-abs(u1), -abs(xi1))");
  Point p{{0.3}, {0.0}, {0.0}, {}, {}, 1};
  auto cd = codiff_at(f0, VariableSelector::u_xi(), {1, 1}, p).cd;
  auto q3 = quasidiff_extract(cd);
  std::vector<Vec> want{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  CHECK(q3.sub.size() == 4);
  for (const auto& w : want) CHECK(std::find(q3.sub.begin(), q3.sub.end(), w) != q3.sub.end());

  CHECK_THROWS(quasidiff_extract({P1({{-1, 1}}), Polytope::zero(1)}));
}

TEST_CASE("directional_derivative") {
  Codifferential absx{P1({{0, 1}, {0, -1}}), Polytope::zero(1)};
  CHECK(directional_derivative(absx, Vec{1.0}) == 1.0);
  CHECK(directional_derivative(absx, Vec{-1.0}) == 1.0);
  Expr e = parse("abs(xi1) - abs(u1)");
  auto cd = codiff_at(e, VariableSelector::u_xi(), {1, 1}, Point{{0}, {0}, {0}, {}, {}, 1}).cd;
  CHECK(directional_derivative(cd, Vec{1.0, 1.0}) == 0.0);
  CHECK(directional_derivative(cd, Vec{0.0, -2.0}) == 2.0);
}

TEST_CASE("hausdorff_distance") {
  auto p = P1({{0, 1}, {-1, 2}});
  CHECK(hausdorff_distance(p, p) == 0.0);
  CHECK(hausdorff_distance(P1({{0, 0}}), P1({{0, 3}})) == doctest::Approx(3.0));
  CHECK(hausdorff_distance(P1({{0, 0}, {0, 2}}), P1({{0, 1}})) == doctest::Approx(1.0));
  // point-to-triangle oracle in 2D (a, v)
  Polytope tri(1, {{0, {0}}, {2, {0}}, {0, {2}}});
  CHECK(hausdorff_distance(tri, P1({{2, 2}})) == doctest::Approx(std::sqrt(8.0)));
  Vec near;
  double d = point_polytope_distance(Vec{2, 2}, {{0, 0}, {2, 0}, {0, 2}}, &near);
  CHECK(d == doctest::Approx(std::sqrt(2.0)));
  CHECK(near[0] == doctest::Approx(1.0));
  CHECK(near[1] == doctest::Approx(1.0));
  CHECK_THROWS(hausdorff_distance(tri, Polytope::zero(2)));
}

TEST_CASE("point_polytope_distance matches sampling bound") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    std::vector<Vec> pts;
    for (int k = 0; k < 6; ++k) pts.push_back(oracle::random_vec(rng, 3));
    auto x = oracle::random_vec(rng, 3, 3.0);
    Vec near;
    double d = point_polytope_distance(x, pts, &near);
    // nearest point must lie in the hull and no sampled hull point may be closer
    std::vector<AffinePiece> ap;
    for (auto& q : pts) ap.push_back({q[0], {q[1], q[2]}});
    Polytope hull(2, ap);
    CHECK(polytope_contains(hull, near[0], Vec{near[1], near[2]}, 1e-8));
    std::uniform_real_distribution<double> U(0, 1);
    for (int s = 0; s < 200; ++s) {
      Vec w(6);
      double tot = 0;
      for (auto& v : w) tot += (v = -std::log(U(rng) + 1e-300));
      Vec y(3, 0.0);
      for (int k = 0; k < 6; ++k)
        for (int i = 0; i < 3; ++i) y[i] += w[k] / tot * pts[k][i];
      double dd = 0;
      for (int i = 0; i < 3; ++i) dd += (y[i] - x[i]) * (y[i] - x[i]);
      CHECK(std::sqrt(dd) >= d - 1e-9);
    }
  }
}

TEST_CASE("reduce") {
  auto r = reduce(P1({{0, 0}, {0, 1}, {0, 0.5}}));
  CHECK(r.size() == 2);
  auto m = P1({{0, 0}, {-1, 1}});
  CHECK(reduce(m).size() == 2);
  std::mt19937_64 rng(77);
  for (int t = 0; t < 20; ++t) {
    auto p = oracle::random_polytope(rng, 2, 12, true);
    auto q = reduce(p);
    CHECK(q.size() <= p.size());
    for (int k = 0; k < 100; ++k) {
      auto dx = oracle::random_vec(rng, 2, 2.0);
      CHECK(phi_eval(q, dx) == doctest::Approx(phi_eval(p, dx)).epsilon(1e-12));
    }
  }
}

TEST_CASE("polytope validation") {
  CHECK_THROWS(Polytope(1, {}));
  CHECK_THROWS(Polytope(2, {{0.0, {1.0}}}));
  CHECK_THROWS(Polytope(1, {{NAN, {1.0}}}));
}
