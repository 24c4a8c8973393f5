#include "codvar/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>

#include "codvar/descent.hpp"
#include "codvar/expr.hpp"
#include "codvar/noether.hpp"
#include "codvar/optimality.hpp"

namespace codvar::cli {

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::ConditionsHold: return kHold;
    case Verdict::ConditionsFail: return kFail;
    case Verdict::Inconclusive: return kInconclusive;
  }
  return kInconclusive;
}

ProblemConfig apply_overrides(ProblemConfig cfg, const Overrides& o) {
  if (!o.cells.empty()) cfg = with_cells(std::move(cfg), o.cells);
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
    cfg.run.check.tol_lp = *o.tol;
  }
  if (o.max_iter) {
    if (*o.max_iter < 0) throw std::invalid_argument("--max-iter must be nonnegative");
    cfg.run.descent.max_iterations = *o.max_iter;
  }
  if (o.seed) cfg.run.descent.seed = *o.seed;
  if (o.refine) cfg.run.refine = *o.refine;
  if (o.energy) cfg.run.energy = true;
  return cfg;
}

namespace {

struct Named {
  std::string file;  // file stem in the output directory
  Certificate cert;
};

struct Outcome {
  Verdict verdict = Verdict::Inconclusive;
  std::vector<Named> certs;  // certs[0] carries the zeta witness
  std::vector<std::string> notes;
};

std::vector<Polytope> hyper_of(const DiscreteFunctional& F) {
  std::vector<Polytope> out;
  for (const auto& cd : F.cells) out.push_back(cd.hyper);
  return out;
}

CellSelection selection_for(const ProblemConfig& cfg, const std::string& name, const Expr& e, const Grid& g,
                            const DiscreteField& u) {
  return resolve_selection(pattern_or_default(cfg, name), g, hyper_of(assemble_codifferential(e, g, u)));
}

std::string constraint_name(std::size_t i) { return "constraint" + std::to_string(i + 1); }

bool field_from_expressions(const ProblemConfig& cfg) {
  if (!cfg.field.empty()) return cfg.field.file.empty();
  return cfg.boundary.file.empty();
}

// Zigzag of amplitude 1/s over the s cells ending at the anchor node.
DiscreteField zigzag(const Grid& g, std::size_t anchor, std::size_t s) {
  if (s > anchor) throw std::invalid_argument("mass test length " + std::to_string(s) + " exceeds the anchor node");
  DiscreteField h = DiscreteField::zeros(g, 1);
  for (std::size_t k = 1; k < s; k += 2) h(anchor - s + k, 0) = 1.0 / static_cast<double>(s);
  return h;
}

Outcome verify_once(const ProblemConfig& cfg) {
  VariationalProblem p = build_problem(cfg);
  DiscreteField u = verify_field(cfg, p.grid);
  const CheckOptions& opt = cfg.run.check;
  const Grid& g = p.grid;
  Outcome o;
  CellSelection obj = selection_for(cfg, "objective", p.integrand, g, u);

  switch (p.family()) {
    case VariationalProblem::Family::None: {
      o.certs.push_back({"certificate", check_unconstrained(p, u, obj, opt)});
      o.verdict = o.certs[0].cert.verdict;
      break;
    }
    case VariationalProblem::Family::Boundary: {
      CqReport cq = check_cq_boundary(p, u, cfg.boundary_selection, opt);
      o.notes.push_back(std::string("boundary CQ ") + (cq.holds ? "holds" : "fails (" + cq.failed + ")"));
      o.certs.push_back({"certificate", check_boundary(p, u, obj, cfg.boundary_selection, opt)});
      o.verdict = o.certs[0].cert.verdict;
      if (!cq.holds && o.verdict == Verdict::ConditionsFail) o.verdict = Verdict::Inconclusive;
      break;
    }
    case VariationalProblem::Family::Isoperimetric: {
      std::vector<CellSelection> sels{obj};
      for (std::size_t i = 0; i < p.isoperimetric.size(); ++i)
        sels.push_back(selection_for(cfg, constraint_name(i), p.isoperimetric[i].f, g, u));
      IsoperimetricResult r = check_isoperimetric(p, u, sels, opt);
      o.notes.push_back(std::string("isoperimetric CQ ") + (r.cq_holds ? "holds" : "fails"));
      o.notes.push_back("active constraints " + std::to_string(r.active.size()));
      o.certs.push_back({"certificate", r.optimality});
      o.certs.push_back({"cq_certificate", r.cq});
      o.verdict = r.optimality.verdict;
      if (!r.cq_holds && o.verdict == Verdict::ConditionsFail) o.verdict = Verdict::Inconclusive;
      break;
    }
    case VariationalProblem::Family::Nonholonomic: {
      std::vector<CellSelection> gs;
      for (std::size_t i = 0; i < p.nonholonomic.size(); ++i)
        gs.push_back(selection_for(cfg, constraint_name(i), p.nonholonomic[i], g, u));
      o.certs.push_back({"certificate", check_nonholonomic_regular(p, u, obj, gs, opt)});
      o.verdict = o.certs[0].cert.verdict;
      if (!cfg.run.h_star.empty() || !cfg.run.mass_tests.empty()) {
        ConvexifiedProblem cp = convexify_nonholonomic(p, u, obj, gs);
        if (!cfg.run.h_star.empty()) {
          FieldSource hs;
          hs.expressions.assign(p.m, cfg.run.h_star);
          double rep = cp.cq_report(build_field(cfg, g, hs));
          o.notes.push_back("CQ report max phi(h*) " + format_double(rep));
        }
        if (!cfg.run.mass_tests.empty()) {
          if (g.dim() != 1 || p.m != 1) throw std::invalid_argument("mass tests need d = 1 and m = 1");
          auto anchor = static_cast<std::size_t>(std::floor((cfg.run.mass_anchor - g.lo(0)) / g.h(0) + 1e-9));
          std::vector<DiscreteField> tests;
          for (std::size_t s : cfg.run.mass_tests) {
            tests.push_back(zigzag(g, anchor, s));
            MassResult mr = min_total_mass(cp, tests, opt);
            o.notes.push_back("mass lower bound with tests up to " + std::to_string(s) + ": " +
                              (mr.status == LpStatus::Feasible ? format_double(mr.mass) : to_string(mr.status)));
          }
        }
      }
      break;
    }
  }
  return o;
}

void write_zeta_csv(const std::filesystem::path& file, const Grid& g, const Vec& zeta) {
  std::ofstream os(file, std::ios::binary);
  const std::size_t nc = g.num_cells(), w = nc ? zeta.size() / nc : 0;
  os << "cell";
  for (std::size_t a = 0; a < g.dim(); ++a) os << ",x" << a + 1;
  for (std::size_t k = 0; k < w; ++k) os << ",zeta" << k + 1;
  os << '\n';
  for (std::size_t c = 0; c < nc; ++c) {
    os << c;
    for (double x : g.cell_center(c)) os << ',' << format_double(x);
    for (std::size_t k = 0; k < w; ++k) os << ',' << format_double(zeta[c * w + k]);
    os << '\n';
  }
}

void write_outcome(const Outcome& o, const Grid& g, const std::string& dir, const std::string& suffix) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  for (const auto& n : o.certs) {
    std::ofstream os(std::filesystem::path(dir) / (n.file + suffix + ".txt"), std::ios::binary);
    write_certificate(os, n.cert);
  }
  if (!o.certs.empty() && !o.certs[0].cert.witness.zeta.empty())
    write_zeta_csv(std::filesystem::path(dir) / ("zeta" + suffix + ".csv"), g, o.certs[0].cert.witness.zeta);
}

void report(std::ostream& out, const Outcome& o) {
  for (const auto& n : o.certs) {
    const Certificate& c = n.cert;
    out << c.condition << " [" << c.resolution << "]: " << to_string(c.verdict);
    if (!c.reason.empty()) out << " (" << c.reason << ")";
    out << '\n';
    if (c.farkas_check >= 0.0) out << "  farkas check " << format_double(c.farkas_check) << '\n';
    if (c.verdict == Verdict::ConditionsHold) out << "  witness residual " << format_double(c.witness.residual) << '\n';
    if (c.witness.energy) out << "  energy c = " << format_double(*c.witness.energy) << '\n';
  }
  for (const auto& s : o.notes) out << s << '\n';
}

std::vector<std::size_t> doubled(const ProblemConfig& cfg) {
  std::vector<std::size_t> c = cfg.cells;
  for (auto& n : c) n *= 2;
  return c;
}

DiscreteField start_field(const ProblemConfig& cfg, const VariationalProblem& p) {
  const Grid& g = p.grid;
  DiscreteField u = p.u0;
  const std::string& s = cfg.run.start;
  if (s == "boundary") return u;
  std::mt19937_64 rng(cfg.run.descent.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  DiscreteField inner = DiscreteField::zeros(g, p.m);
  if (s == "random") {
    for (double& v : inner.values) v = U(rng);
  } else if (s != "zero") {
    FieldSource src;
    src.expressions.assign(p.m, s);
    inner = build_field(cfg, g, src);
  }
  for (std::size_t n = 0; n < g.num_nodes(); ++n)
    if (!g.on_boundary(n))
      for (std::size_t i = 0; i < p.m; ++i) u(n, i) = inner(n, i);
  return u;
}

}  // namespace

int run_verify(const ProblemConfig& cfg, const std::string& out_dir, std::ostream& out) {
  Outcome o = verify_once(cfg);
  Grid g = build_grid(cfg);
  report(out, o);
  write_outcome(o, g, out_dir, "");
  Verdict v = o.verdict;
  if (v == Verdict::ConditionsFail && cfg.run.refine && field_from_expressions(cfg)) {
    ProblemConfig fine = with_cells(cfg, doubled(cfg));
    Outcome r = verify_once(fine);
    out << "refined:\n";
    report(out, r);
    write_outcome(r, build_grid(fine), out_dir, "_" + resolution_of(build_grid(fine)));
    if (r.verdict != Verdict::ConditionsFail) {
      out << "verdict changes under refinement\n";
      v = Verdict::Inconclusive;
    }
  }
  out << "verdict " << to_string(v) << '\n';
  return exit_code(v);
}

int run_solve(const ProblemConfig& cfg, const std::string& out_dir, std::ostream& out) {
  VariationalProblem p = build_problem(cfg);
  DiscreteField u0 = start_field(cfg, p);
  const auto& prm = cfg.run.descent;
  descent::DescentResult r = descent::solve(p, u0, prm);
  out << "start value " << format_double(assemble_value(p.integrand, p.grid, u0)) << '\n';
  out << "final value " << format_double(r.value) << '\n';
  out << "iterations " << r.trace.size() << '\n';
  out << "stop " << descent::to_string(r.reason);
  if (!r.message.empty()) out << " (" << r.message << ")";
  out << '\n';
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "field.csv", std::ios::binary);
    write_field_csv(f, p.grid, r.u);
    std::ofstream t(std::filesystem::path(out_dir) / "trace.csv", std::ios::binary);
    descent::write_trace_csv(t, r.trace);
  }
  const bool has_target = std::isfinite(prm.target);
  switch (r.reason) {
    case descent::StopReason::Target: return kHold;
    case descent::StopReason::Stationary:
    case descent::StopReason::RadiusCollapse: return has_target ? kInconclusive : kHold;
    case descent::StopReason::IterationCap: return kIterationCap;
    case descent::StopReason::LpFailure: return kInconclusive;
  }
  return kInconclusive;
}

int run_noether(const ProblemConfig& cfg, bool energy, const std::string& out_dir, std::ostream& out) {
  VariationalProblem p = build_problem(cfg);
  DiscreteField u = verify_field(cfg, p.grid);
  const Grid& g = p.grid;
  std::vector<Polytope> hx, hxi;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    Point pt = cell_point(g, u, c);
    hx.push_back(codiff_at(p.integrand, VariableSelector::x_xi(), p.dims(), pt).cd.hyper);
    hxi.push_back(codiff_at(p.integrand, VariableSelector::xi_only(), p.dims(), pt).cd.hyper);
  }
  Outcome o;
  if (energy || cfg.run.energy) {
    // Preconditions first so that an x-dependent integrand is rejected before any LP runs.
    std::optional<CellSelection> es;
    if (cfg.selections.count("energy")) es = resolve_selection(cfg.selections.at("energy"), g, hxi);
    o.certs.push_back({"energy_certificate", check_energy_conservation(p, u, es ? &*es : nullptr, cfg.run.check)});
  }
  CellSelection sel = resolve_selection(pattern_or_default(cfg, "noether"), g, hx);
  o.certs.insert(o.certs.begin(), {"certificate", check_noether(p, u, sel, cfg.run.check)});
  report(out, o);
  write_outcome(o, g, out_dir, "");
  Verdict v = Verdict::ConditionsHold;
  for (const auto& n : o.certs) {
    if (n.cert.verdict == Verdict::ConditionsFail) v = Verdict::ConditionsFail;
    else if (n.cert.verdict == Verdict::Inconclusive && v == Verdict::ConditionsHold) v = Verdict::Inconclusive;
  }
  out << "verdict " << to_string(v) << '\n';
  return exit_code(v);
}

int run(const Request& req, std::ostream& out, std::ostream& err) {
  try {
    ProblemConfig cfg = apply_overrides(load_config(req.config), req.overrides);
    if (req.command == "verify") return run_verify(cfg, req.out_dir, out);
    if (req.command == "solve") return run_solve(cfg, req.out_dir, out);
    if (req.command == "noether") return run_noether(cfg, req.overrides.energy, req.out_dir, out);
    err << "error: unknown command '" << req.command << "'\n";
    return kInputError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    err << "error: " << req.config << ": " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kInputError;
}

}  // namespace codvar::cli
