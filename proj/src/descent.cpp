#include "codvar/descent.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace codvar::descent {

void DescentParams::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("descent: radius must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("descent: shrink must lie in (0, 1)");
  if (!(grow > 1.0)) throw std::invalid_argument("descent: grow must exceed 1");
  if (max_iterations < 0) throw std::invalid_argument("descent: negative iteration cap");
  if (vertex_cap < 1) throw std::invalid_argument("descent: vertex cap must be at least 1");
  if (!(accept_ratio > 0.0 && accept_ratio < 1.0)) throw std::invalid_argument("descent: accept ratio must lie in (0, 1)");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Stationary: return "stationary";
    case StopReason::Target: return "target";
    case StopReason::IterationCap: return "iteration-cap";
    case StopReason::RadiusCollapse: return "radius-collapse";
    case StopReason::LpFailure: return "lp-failure";
  }
  return "?";
}

namespace {

using Choice = std::vector<std::size_t>;  // hyper vertex index per cell

std::vector<Choice> candidates(const DiscreteFunctional& F, std::size_t cap, std::mt19937_64& rng) {
  const std::size_t nc = F.cells.size();
  std::set<Choice> seen;
  std::vector<Choice> out;
  auto push = [&](Choice c) {
    if (out.size() < cap && seen.insert(c).second) out.push_back(std::move(c));
  };
  std::size_t widest = 1;
  Choice first(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    first[c] = zero_face(F.cells[c].hyper).front();
    widest = std::max(widest, F.cells[c].hyper.size());
  }
  push(first);
  if (widest == 1) return out;
  for (std::size_t k = 0; k < widest; ++k) {
    Choice ch(nc);
    for (std::size_t c = 0; c < nc; ++c) ch[c] = k % F.cells[c].hyper.size();
    push(ch);
  }
  // Random cell blocks with one vertex index per block.
  for (std::size_t attempt = 0; out.size() < cap && attempt < 8 * cap; ++attempt) {
    std::size_t blocks = 1 + rng() % std::min<std::size_t>(8, nc);
    std::vector<std::size_t> cuts{0, nc};
    for (std::size_t b = 1; b < blocks; ++b) cuts.push_back(rng() % nc);
    std::sort(cuts.begin(), cuts.end());
    Choice ch(nc);
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
      std::size_t k = rng() % widest;
      for (std::size_t c = cuts[b]; c < cuts[b + 1]; ++c) ch[c] = k % F.cells[c].hyper.size();
    }
    push(ch);
  }
  return out;
}

struct Step {
  bool ok = false;
  double model = 0.0;
  DiscreteField h;
  std::string message;
};

double model_value(const DiscreteFunctional& F, const Choice& ch, const DiscreteField& h) {
  double s = 0.0;
  for (std::size_t c = 0; c < F.cells.size(); ++c) {
    Point q = cell_point(F.grid, h, c);
    Vec dx = q.u;
    dx.insert(dx.end(), q.xi.begin(), q.xi.end());
    const AffinePiece& w = F.cells[c].hyper[ch[c]];
    double lin = w.a;
    for (std::size_t e = 0; e < dx.size(); ++e) lin += w.v[e] * dx[e];
    s += F.weights[c] * (phi_eval(F.cells[c].hypo, dx) + lin);
  }
  return s;
}

// Minimizes the piecewise-affine model over |grad h| <= r, |h| <= r * diam, h = 0 on the boundary.
// h = 0 is feasible with every right-hand side nonnegative, so the LP starts from a feasible basis.
Step model_step(const DiscreteFunctional& F, const Choice& ch, double r, const LpOptions& lpo) {
  const Grid& g = F.grid;
  const std::size_t m = F.m, d = g.dim(), nn = g.nodes_per_cell();
  double diam = 0.0;
  for (std::size_t a = 0; a < d; ++a) diam = std::max(diam, g.hi(a) - g.lo(a));
  const double R = r * diam;
  Matrix M = local_map(g, m);

  LinearProgram lp;
  std::vector<int> var(g.num_nodes() * m, -1);
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    if (g.on_boundary(n)) continue;
    for (std::size_t i = 0; i < m; ++i) {
      int v = lp.add_var(VarSign::Free);
      var[n * m + i] = v;
      lp.add_le({{v, 1.0}}, R);
      lp.add_le({{v, -1.0}}, R);
    }
  }
  if (lp.num_vars() == 0) return {false, 0.0, {}, "no free nodes"};

  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    auto nodes = g.cell_nodes(c);
    const double wc = F.weights[c];
    int t = lp.add_var(VarSign::Free, wc);
    // coef^T M restricted to the free local dofs.
    auto map_row = [&](const Vec& coef) {
      LpRow row;
      for (std::size_t k = 0; k < nn; ++k)
        for (std::size_t i = 0; i < m; ++i) {
          int v = var[nodes[k] * m + i];
          if (v < 0) continue;
          double a = 0.0;
          for (std::size_t e = 0; e < coef.size(); ++e) a += coef[e] * M(e, k * m + i);
          if (a != 0.0) row.emplace_back(v, a);
        }
      return row;
    };
    for (const AffinePiece& pc : F.cells[c].hypo.vertices()) {
      LpRow row = map_row(pc.v);
      row.emplace_back(t, -1.0);
      lp.add_le(std::move(row), -pc.a);
    }
    for (auto [v, a] : map_row(F.cells[c].hyper[ch[c]].v)) lp.cost[static_cast<std::size_t>(v)] += wc * a;
    for (std::size_t e = 0; e < m * d; ++e) {
      Vec unit(m + m * d, 0.0);
      unit[m + e] = 1.0;
      LpRow row = map_row(unit);
      if (row.empty()) continue;
      LpRow neg = row;
      for (auto& [v, a] : neg) a = -a;
      lp.add_le(std::move(row), r);
      lp.add_le(std::move(neg), r);
    }
  }
  LpOutcome out = solve(lp, lpo);
  if (out.status != LpStatus::Feasible) return {false, 0.0, {}, std::string("model LP ") + to_string(out.status) + ": " + out.message};
  Step s;
  s.ok = true;
  s.h = DiscreteField::zeros(g, m);
  for (std::size_t q = 0; q < var.size(); ++q)
    if (var[q] >= 0) s.h.values[q] = out.x[static_cast<std::size_t>(var[q])];
  s.model = model_value(F, ch, s.h);
  return s;
}

CellSelection to_selection(const DiscreteFunctional& F, const Choice& ch) {
  CellSelection s;
  for (std::size_t c = 0; c < F.cells.size(); ++c) {
    Vec co(F.cells[c].hyper.size(), 0.0);
    co[ch[c]] = 1.0;
    s.coeffs.push_back(std::move(co));
  }
  return s;
}

}  // namespace

DescentResult solve(const VariationalProblem& p, const DiscreteField& u0, const DescentParams& params) {
  params.validate();
  p.validate();
  if (p.family() != VariationalProblem::Family::None)
    throw std::invalid_argument("descent: constrained problems are not supported");
  if (u0.m != p.m || u0.values.size() != p.grid.num_nodes() * p.m)
    throw std::invalid_argument("descent: initial field does not match the grid");
  if (!p.u0.values.empty())
    for (std::size_t n = 0; n < p.grid.num_nodes(); ++n)
      if (p.grid.on_boundary(n))
        for (std::size_t i = 0; i < p.m; ++i)
          if (std::abs(u0(n, i) - p.u0(n, i)) > 1e-12 * (1.0 + std::abs(p.u0(n, i))))
            throw std::invalid_argument("descent: initial field does not match the boundary data");

  std::mt19937_64 rng(params.seed);
  DescentResult res;
  res.u = u0;
  res.value = assemble_value(p.integrand, p.grid, res.u);
  double r = params.radius;
  if (res.value <= params.target) {
    res.reason = StopReason::Target;
    return res;
  }
  for (int it = 1;; ++it) {
    if (it > params.max_iterations) {
      res.reason = StopReason::IterationCap;
      break;
    }
    DiscreteFunctional F = assemble_codifferential(p.integrand, p.grid, res.u);
    auto cands = candidates(F, params.vertex_cap, rng);
    std::vector<Step> steps(cands.size());
    parallel_for(cands.size(), [&](std::size_t k) { steps[k] = model_step(F, cands[k], r, params.lp); });
    std::size_t best = cands.size();
    for (std::size_t k = 0; k < steps.size(); ++k)
      if (steps[k].ok && (best == cands.size() || steps[k].model < steps[best].model)) best = k;
    if (best == cands.size()) {
      res.reason = StopReason::LpFailure;
      res.message = steps.empty() ? "no candidates" : steps.front().message;
      break;
    }
    res.last_selection = to_selection(F, cands[best]);
    TraceRow row;
    row.iter = it;
    row.radius = r;
    row.candidates = cands.size();
    row.model_decrease = steps[best].model;
    if (steps[best].model >= -params.eps_stat * r) {
      row.value = res.value;
      res.trace.push_back(row);
      res.reason = StopReason::Stationary;
      break;
    }
    DiscreteField trial = res.u;
    for (std::size_t q = 0; q < trial.values.size(); ++q) trial.values[q] += steps[best].h.values[q];
    double v = assemble_value(p.integrand, p.grid, trial);
    row.actual_decrease = v - res.value;
    double ratio = row.actual_decrease / steps[best].model;
    row.accepted = row.actual_decrease < 0.0 && ratio >= params.accept_ratio;
    if (row.accepted) {
      res.u = std::move(trial);
      res.value = v;
      if (ratio >= params.grow_ratio) r *= params.grow;
    } else {
      r *= params.shrink;
    }
    row.value = res.value;
    res.trace.push_back(row);
    if (res.value <= params.target) {
      res.reason = StopReason::Target;
      break;
    }
    if (r < params.min_radius) {
      res.reason = StopReason::RadiusCollapse;
      break;
    }
  }
  return res;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iter,value,model_decrease,actual_decrease,radius,accepted,candidates\n";
  for (const auto& t : trace)
    os << t.iter << ',' << format_double(t.value) << ',' << format_double(t.model_decrease) << ','
       << format_double(t.actual_decrease) << ',' << format_double(t.radius) << ',' << (t.accepted ? 1 : 0) << ','
       << t.candidates << '\n';
}

}  // namespace codvar::descent
