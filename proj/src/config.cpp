#include "codvar/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "codvar/expr.hpp"

namespace codvar {

ConfigError::ConfigError(std::string file, std::size_t line, const std::string& msg)
    : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg),
      file_(std::move(file)),
      line_(line) {}

namespace {

class Reader {
 public:
  explicit Reader(std::string path) : path_(std::move(path)) {}

  [[noreturn]] void fail(const toml::node* n, const std::string& msg) const {
    std::size_t line = n ? static_cast<std::size_t>(n->source().begin.line) : 0;
    throw ConfigError(path_, line, msg);
  }

  void only_keys(const toml::table& t, std::initializer_list<const char*> keys, const std::string& where) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto&& [k, v] : t)
      if (!ok.count(std::string(k.str()))) fail(&v, "unknown key '" + std::string(k.str()) + "' in " + where);
  }

  const toml::table* table(const toml::table& t, const char* key) const {
    const toml::node* n = t.get(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(n, std::string("'") + key + "' must be a table");
    return n->as_table();
  }

  double number(const toml::node& n, const std::string& what) const {
    if (auto v = n.value<double>()) return *v;
    fail(&n, what + " must be a number");
  }

  std::size_t count(const toml::node& n, const std::string& what) const {
    auto v = n.value<std::int64_t>();
    if (!v || *v < 0) fail(&n, what + " must be a nonnegative integer");
    return static_cast<std::size_t>(*v);
  }

  std::string string(const toml::node& n, const std::string& what) const {
    if (auto v = n.value<std::string>()) return *v;
    fail(&n, what + " must be a string");
  }

  Vec vec(const toml::node& n, const std::string& what) const {
    const toml::array* a = n.as_array();
    if (!a) fail(&n, what + " must be an array of numbers");
    Vec out;
    for (auto&& e : *a) out.push_back(number(e, what));
    return out;
  }

  std::vector<Vec> vecs(const toml::node& n, const std::string& what) const {
    const toml::array* a = n.as_array();
    if (!a) fail(&n, what + " must be an array of arrays");
    std::vector<Vec> out;
    for (auto&& e : *a) out.push_back(vec(e, what));
    return out;
  }

  std::vector<std::string> strings(const toml::node& n, const std::string& what) const {
    if (n.is_string()) return {string(n, what)};
    const toml::array* a = n.as_array();
    if (!a) fail(&n, what + " must be a string or an array of strings");
    std::vector<std::string> out;
    for (auto&& e : *a) out.push_back(string(e, what));
    return out;
  }

  // Parses to surface expression errors with the line of the key.
  void check_expr(const toml::node& n, const std::string& text, bool boundary, std::size_t m) const {
    try {
      if (boundary) parse_boundary(text, m);
      else parse(text);
    } catch (const ParseError& e) {
      fail(&n, "expression error: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
      fail(&n, "expression error: " + std::string(e.what()));
    }
  }

  std::string resolve_path(const std::string& f) const {
    std::filesystem::path p(f);
    if (p.is_absolute()) return f;
    return (std::filesystem::path(path_).parent_path() / p).string();
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

FieldSource read_field_source(const Reader& r, const toml::table& t, const std::string& where) {
  FieldSource src;
  if (const toml::node* u = t.get("u")) {
    src.expressions = r.strings(*u, where + ".u");
    for (const auto& e : src.expressions) r.check_expr(*u, e, false, 0);
  }
  if (const toml::node* f = t.get("file")) {
    if (!src.expressions.empty()) r.fail(f, where + ": give either 'u' or 'file'");
    src.file = r.resolve_path(r.string(*f, where + ".file"));
  }
  return src;
}

SelectionPattern read_pattern(const Reader& r, const toml::table& t, const std::string& where) {
  r.only_keys(t, {"default", "regions"}, where);
  SelectionPattern pat;
  if (const toml::node* d = t.get("default")) pat.default_vertex = r.count(*d, where + ".default");
  if (const toml::node* regs = t.get("regions")) {
    const toml::array* a = regs->as_array();
    if (!a) r.fail(regs, where + ".regions must be an array of tables");
    for (auto&& e : *a) {
      const toml::table* rt = e.as_table();
      if (!rt) r.fail(&e, where + ".regions entries must be tables");
      r.only_keys(*rt, {"lower", "upper", "vertex", "point", "points"}, where + ".regions");
      SelectionRegion reg;
      const toml::node* lo = rt->get("lower");
      const toml::node* hi = rt->get("upper");
      if (!lo || !hi) r.fail(&e, "selection region needs 'lower' and 'upper'");
      reg.lower = r.vec(*lo, "lower");
      reg.upper = r.vec(*hi, "upper");
      int given = 0;
      if (const toml::node* v = rt->get("vertex")) {
        reg.vertex = r.count(*v, "vertex");
        ++given;
      }
      if (const toml::node* p = rt->get("point")) {
        reg.points = {r.vec(*p, "point")};
        ++given;
      }
      if (const toml::node* p = rt->get("points")) {
        reg.points = r.vecs(*p, "points");
        if (reg.points.empty()) r.fail(p, "'points' must not be empty");
        ++given;
      }
      if (given != 1) r.fail(&e, "selection region needs exactly one of 'vertex', 'point', 'points'");
      pat.regions.push_back(std::move(reg));
    }
  }
  return pat;
}

ProblemConfig from_table(const toml::table& root, const std::string& path) {
  Reader r(path);
  ProblemConfig cfg;
  cfg.path = path;
  r.only_keys(root, {"domain", "integrand", "boundary", "field", "constraints", "selections", "run", "solve"},
              "the top level");

  const toml::table* dom = r.table(root, "domain");
  if (!dom) throw ConfigError(path, 0, "missing [domain]");
  r.only_keys(*dom, {"lower", "upper", "cells", "components"}, "[domain]");
  const toml::node* lo = dom->get("lower");
  const toml::node* hi = dom->get("upper");
  const toml::node* cells = dom->get("cells");
  if (!lo || !hi || !cells) r.fail(dom, "[domain] needs lower, upper and cells");
  cfg.lower = r.vec(*lo, "lower");
  cfg.upper = r.vec(*hi, "upper");
  if (cfg.lower.size() != cfg.upper.size() || cfg.lower.empty() || cfg.lower.size() > 2)
    r.fail(lo, "lower and upper must have the same length, 1 or 2");
  if (cells->is_array()) {
    for (auto&& e : *cells->as_array()) cfg.cells.push_back(r.count(e, "cells"));
  } else {
    cfg.cells.assign(cfg.lower.size(), r.count(*cells, "cells"));
  }
  if (cfg.cells.size() != cfg.lower.size()) r.fail(cells, "cells must have one entry per axis");
  for (std::size_t a = 0; a < cfg.cells.size(); ++a) {
    if (cfg.cells[a] == 0) r.fail(cells, "cells must be positive");
    if (!(cfg.upper[a] > cfg.lower[a])) r.fail(hi, "upper must exceed lower");
  }
  if (const toml::node* m = dom->get("components")) {
    cfg.m = r.count(*m, "components");
    if (cfg.m == 0) r.fail(m, "components must be positive");
  }

  const toml::table* integ = r.table(root, "integrand");
  if (!integ) throw ConfigError(path, 0, "missing [integrand]");
  r.only_keys(*integ, {"f"}, "[integrand]");
  const toml::node* f = integ->get("f");
  if (!f) r.fail(integ, "[integrand] needs f");
  cfg.integrand = r.string(*f, "f");
  r.check_expr(*f, cfg.integrand, false, 0);

  if (const toml::table* b = r.table(root, "boundary")) {
    r.only_keys(*b, {"u", "file", "g0", "inequalities", "equalities"}, "[boundary]");
    cfg.boundary = read_field_source(r, *b, "boundary");
    if (const toml::node* g = b->get("g0")) {
      cfg.g0 = r.string(*g, "g0");
      r.check_expr(*g, cfg.g0, true, cfg.m);
    }
    if (const toml::node* g = b->get("inequalities")) {
      cfg.g_ineq = r.strings(*g, "inequalities");
      for (const auto& e : cfg.g_ineq) r.check_expr(*g, e, true, cfg.m);
    }
    if (const toml::node* g = b->get("equalities")) {
      cfg.g_eq = r.strings(*g, "equalities");
      for (const auto& e : cfg.g_eq) r.check_expr(*g, e, true, cfg.m);
    }
  }
  if (const toml::table* fld = r.table(root, "field")) {
    r.only_keys(*fld, {"u", "file"}, "[field]");
    cfg.field = read_field_source(r, *fld, "field");
  }

  if (const toml::table* c = r.table(root, "constraints")) {
    r.only_keys(*c, {"type", "isoperimetric", "nonholonomic"}, "[constraints]");
    std::string type = "none";
    if (const toml::node* t = c->get("type")) type = r.string(*t, "type");
    if (const toml::node* iso = c->get("isoperimetric")) {
      const toml::array* a = iso->as_array();
      if (!a) r.fail(iso, "isoperimetric must be an array of tables");
      for (auto&& e : *a) {
        const toml::table* it = e.as_table();
        if (!it || !it->get("f")) r.fail(&e, "isoperimetric entries need f (and optional theta)");
        r.only_keys(*it, {"f", "theta"}, "isoperimetric");
        std::string fi = r.string(*it->get("f"), "f");
        r.check_expr(*it->get("f"), fi, false, 0);
        double theta = it->get("theta") ? r.number(*it->get("theta"), "theta") : 0.0;
        cfg.isoperimetric.emplace_back(fi, theta);
      }
    }
    if (const toml::node* nh = c->get("nonholonomic")) {
      cfg.nonholonomic = r.strings(*nh, "nonholonomic");
      for (const auto& e : cfg.nonholonomic) r.check_expr(*nh, e, false, 0);
    }
    bool iso = !cfg.isoperimetric.empty(), non = !cfg.nonholonomic.empty();
    const toml::node* where = c->get("type") ? c->get("type") : static_cast<const toml::node*>(c);
    if (type == "none" && (iso || non)) r.fail(where, "constraints listed but type is 'none'");
    if (type == "isoperimetric" && (!iso || non)) r.fail(where, "type 'isoperimetric' needs isoperimetric entries only");
    if (type == "nonholonomic" && (!non || iso)) r.fail(where, "type 'nonholonomic' needs nonholonomic entries only");
    if (type != "none" && type != "isoperimetric" && type != "nonholonomic") r.fail(where, "unknown constraint type '" + type + "'");
  }

  if (const toml::table* s = r.table(root, "selections")) {
    for (auto&& [k, v] : *s) {
      std::string name(k.str());
      const toml::table* t = v.as_table();
      if (!t) r.fail(&v, "selections." + name + " must be a table");
      if (name == "boundary") {
        r.only_keys(*t, {"s0", "s", "r"}, "selections.boundary");
        if (const toml::node* n = t->get("s0")) cfg.boundary_selection.s0 = r.vec(*n, "s0");
        if (const toml::node* n = t->get("s")) cfg.boundary_selection.s = r.vecs(*n, "s");
        if (const toml::node* n = t->get("r")) cfg.boundary_selection.r = r.vecs(*n, "r");
      } else {
        cfg.selections[name] = read_pattern(r, *t, "selections." + name);
      }
    }
  }

  if (const toml::table* run = r.table(root, "run")) {
    r.only_keys(*run, {"tol", "tol_active", "tol_comp", "refine", "energy", "h_star", "mass_tests", "mass_anchor"},
                "[run]");
    if (const toml::node* n = run->get("tol")) cfg.run.check.tol_lp = r.number(*n, "tol");
    if (const toml::node* n = run->get("tol_active")) cfg.run.check.tol_active = r.number(*n, "tol_active");
    if (const toml::node* n = run->get("tol_comp")) cfg.run.check.tol_comp = r.number(*n, "tol_comp");
    if (const toml::node* n = run->get("refine")) {
      auto v = n->value<bool>();
      if (!v) r.fail(n, "refine must be true or false");
      cfg.run.refine = *v;
    }
    if (const toml::node* n = run->get("energy")) {
      auto v = n->value<bool>();
      if (!v) r.fail(n, "energy must be true or false");
      cfg.run.energy = *v;
    }
    if (const toml::node* n = run->get("h_star")) {
      cfg.run.h_star = r.string(*n, "h_star");
      r.check_expr(*n, cfg.run.h_star, false, 0);
    }
    if (const toml::node* n = run->get("mass_tests")) {
      const toml::array* a = n->as_array();
      if (!a) r.fail(n, "mass_tests must be an array of integers");
      for (auto&& e : *a) cfg.run.mass_tests.push_back(r.count(e, "mass_tests"));
    }
    if (const toml::node* n = run->get("mass_anchor")) cfg.run.mass_anchor = r.number(*n, "mass_anchor");
  }

  if (const toml::table* sv = r.table(root, "solve")) {
    r.only_keys(*sv, {"start", "radius", "max_iterations", "target", "seed", "vertex_cap", "eps_stat"}, "[solve]");
    auto& d = cfg.run.descent;
    if (const toml::node* n = sv->get("start")) {
      cfg.run.start = r.string(*n, "start");
      const std::string& s = cfg.run.start;
      if (s != "boundary" && s != "zero" && s != "random") r.check_expr(*n, s, false, 0);
    }
    if (const toml::node* n = sv->get("radius")) d.radius = r.number(*n, "radius");
    if (const toml::node* n = sv->get("max_iterations")) d.max_iterations = static_cast<int>(r.count(*n, "max_iterations"));
    if (const toml::node* n = sv->get("target")) d.target = r.number(*n, "target");
    if (const toml::node* n = sv->get("seed")) d.seed = r.count(*n, "seed");
    if (const toml::node* n = sv->get("vertex_cap")) d.vertex_cap = r.count(*n, "vertex_cap");
    if (const toml::node* n = sv->get("eps_stat")) d.eps_stat = r.number(*n, "eps_stat");
    try {
      d.validate();
    } catch (const std::invalid_argument& e) {
      r.fail(sv, e.what());
    }
  }
  return cfg;
}

}  // namespace

ProblemConfig parse_config(const std::string& text, const std::string& path) {
  toml::table root;
  try {
    root = toml::parse(text, path);
  } catch (const toml::parse_error& e) {
    throw ConfigError(path, static_cast<std::size_t>(e.source().begin.line), std::string(e.description()));
  }
  return from_table(root, path);
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

ProblemConfig with_cells(ProblemConfig cfg, const std::vector<std::size_t>& cells) {
  if (cells.size() == 1) cfg.cells.assign(cfg.lower.size(), cells[0]);
  else if (cells.size() == cfg.lower.size()) cfg.cells = cells;
  else throw std::invalid_argument("cells: expected 1 or " + std::to_string(cfg.lower.size()) + " entries");
  for (std::size_t n : cfg.cells)
    if (n == 0) throw std::invalid_argument("cells must be positive");
  return cfg;
}

Grid build_grid(const ProblemConfig& cfg) { return Grid(cfg.lower, cfg.upper, cfg.cells); }

DiscreteField build_field(const ProblemConfig& cfg, const Grid& g, const FieldSource& src) {
  if (!src.file.empty()) {
    std::ifstream in(src.file);
    if (!in) throw std::invalid_argument("cannot open field file " + src.file);
    DiscreteField u = read_field_csv(in, g);
    if (u.m != cfg.m) throw std::invalid_argument("field file " + src.file + " has the wrong number of components");
    return u;
  }
  if (src.expressions.empty()) return DiscreteField::zeros(g, cfg.m);
  if (src.expressions.size() != cfg.m)
    throw std::invalid_argument("field: expected " + std::to_string(cfg.m) + " expressions");
  std::vector<Expr> ex;
  for (const auto& s : src.expressions) {
    ex.push_back(parse(s));
    if (ex.back().uses(Block::U) || ex.back().uses(Block::Xi))
      throw std::invalid_argument("field expression may only use x: " + s);
  }
  return sample(g, cfg.m, [&](const Vec& x, std::size_t i) {
    Point p;
    p.d = g.dim();
    p.x = x;
    return eval(ex[i], p);
  });
}

VariationalProblem build_problem(const ProblemConfig& cfg) {
  VariationalProblem p;
  p.integrand = parse(cfg.integrand);
  p.grid = build_grid(cfg);
  p.m = cfg.m;
  p.u0 = build_field(cfg, p.grid, cfg.boundary);
  if (!cfg.g0.empty()) p.g0 = parse_boundary(cfg.g0, cfg.m);
  for (const auto& s : cfg.g_ineq) p.g_ineq.push_back(parse_boundary(s, cfg.m));
  for (const auto& s : cfg.g_eq) p.g_eq.push_back(parse_boundary(s, cfg.m));
  for (const auto& [f, theta] : cfg.isoperimetric) p.isoperimetric.push_back({parse(f), theta});
  for (const auto& s : cfg.nonholonomic) p.nonholonomic.push_back(parse(s));
  p.validate();
  return p;
}

DiscreteField verify_field(const ProblemConfig& cfg, const Grid& g) {
  return build_field(cfg, g, cfg.field.empty() ? cfg.boundary : cfg.field);
}

CellSelection resolve_selection(const SelectionPattern& pat, const Grid& g, const std::vector<Polytope>& hyper) {
  if (hyper.size() != g.num_cells()) throw std::invalid_argument("selection: one polytope per cell expected");
  std::vector<std::size_t> used(pat.regions.size(), 0);
  CellSelection sel;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const Polytope& P = hyper[c];
    Vec x = g.cell_center(c);
    const SelectionRegion* reg = nullptr;
    std::size_t k = 0;
    for (std::size_t r = 0; r < pat.regions.size() && !reg; ++r) {
      const auto& R = pat.regions[r];
      if (R.lower.size() != x.size() || R.upper.size() != x.size())
        throw std::invalid_argument("selection region dimension does not match the domain");
      bool in = true;
      for (std::size_t a = 0; a < x.size(); ++a) {
        double eps = 1e-12 * (1.0 + std::abs(x[a]));
        in = in && x[a] >= R.lower[a] - eps && x[a] <= R.upper[a] + eps;
      }
      if (in) {
        reg = &R;
        k = used[r]++;
      }
    }
    Vec co(P.size(), 0.0);
    if (reg && !reg->points.empty()) {
      const Vec& v = reg->points[k % reg->points.size()];
      if (v.size() != P.dim() || !polytope_contains(P, 0.0, v, 1e-9, &co))
        throw std::invalid_argument("selection point outside the hyperdifferential a = 0 face in cell " +
                                    std::to_string(c));
    } else {
      std::size_t idx = reg ? *reg->vertex : pat.default_vertex;
      auto face = zero_face(P);
      if (idx >= face.size())
        throw std::invalid_argument("selection vertex " + std::to_string(idx) + " out of range in cell " +
                                    std::to_string(c) + " (face has " + std::to_string(face.size()) + ")");
      co[face[idx]] = 1.0;
    }
    sel.coeffs.push_back(std::move(co));
  }
  return sel;
}

const SelectionPattern& pattern_or_default(const ProblemConfig& cfg, const std::string& name) {
  static const SelectionPattern kDefault;
  auto it = cfg.selections.find(name);
  return it == cfg.selections.end() ? kDefault : it->second;
}

}  // namespace codvar
