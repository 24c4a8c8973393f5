#include "codvar/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace codvar {

namespace {

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::string text;
  double num = 0.0;
  std::size_t col = 0;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
      if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        std::size_t k = i + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          i = k;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        }
      }
      std::string t(s.substr(start, i - start));
      char* end = nullptr;
      double v = std::strtod(t.c_str(), &end);
      if (end != t.c_str() + t.size()) throw ParseError("malformed number '" + t + "'", start);
      out.push_back({Tok::Num, t, v, start});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Tok::Ident, std::string(s.substr(start, i - start)), 0.0, start});
      continue;
    }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case ',': k = Tok::Comma; break;
      default: throw ParseError(std::string("unexpected character '") + c + "'", start);
    }
    out.push_back({k, std::string(1, c), 0.0, start});
    ++i;
  }
  out.push_back({Tok::End, "", 0.0, s.size()});
  return out;
}

using MNode = std::shared_ptr<Node>;

MNode make(Op op, std::vector<NodePtr> kids = {}) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->kids = std::move(kids);
  return n;
}

MNode constant(double v) {
  auto n = make(Op::Const);
  n->value = v;
  return n;
}

bool is_constant(const Node& n) {
  if (n.op == Op::Var) return false;
  return std::all_of(n.kids.begin(), n.kids.end(), [](const NodePtr& k) { return is_constant(*k); });
}

double eval_node(const Node& n, const Point& p);

class Parser {
 public:
  Parser(std::string_view text, bool boundary) : toks_(lex(text)), boundary_(boundary) {}

  MNode parse_all() {
    MNode e = expr();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return e;
  }

  std::vector<Node*> shorthand;  // xi<k> nodes awaiting resolution
  std::vector<std::size_t> shorthand_cols;

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  bool boundary_;

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  [[noreturn]] void fail(const std::string& msg) const {
    if (peek().kind == Tok::End) throw ParseError("syntax error: unexpected end of input", peek().col);
    throw ParseError("syntax error: " + msg, peek().col);
  }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what);
    ++pos_;
  }

  MNode expr() {
    MNode lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      Op op = next().kind == Tok::Plus ? Op::Add : Op::Sub;
      lhs = make(op, {lhs, term()});
    }
    return lhs;
  }

  MNode term() {
    MNode lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      Op op = next().kind == Tok::Star ? Op::Mul : Op::Div;
      lhs = make(op, {lhs, unary()});
    }
    return lhs;
  }

  MNode unary() {
    if (peek().kind == Tok::Minus) {
      ++pos_;
      return make(Op::Neg, {unary()});
    }
    if (peek().kind == Tok::Plus) {
      ++pos_;
      return unary();
    }
    return power();
  }

  MNode power() {
    MNode base = primary();
    if (peek().kind == Tok::Caret) {
      std::size_t col = next().col;
      MNode ex = unary();
      if (!is_constant(*ex)) throw ParseError("exponent must be a constant", col);
      auto n = make(Op::Pow, {base});
      n->value = eval_node(*ex, Point{});
      return n;
    }
    return base;
  }

  std::vector<NodePtr> args() {
    expect(Tok::LParen, "'('");
    std::vector<NodePtr> a;
    a.push_back(expr());
    while (peek().kind == Tok::Comma) {
      ++pos_;
      a.push_back(expr());
    }
    expect(Tok::RParen, "')'");
    return a;
  }

  static bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }

  MNode variable(const Token& t) {
    const std::string& s = t.text;
    auto index = [&](std::string_view digits) -> std::size_t {
      std::size_t v = std::stoul(std::string(digits));
      if (v == 0) throw ParseError("variable indices start at 1 in '" + s + "'", t.col);
      return v - 1;
    };
    auto var = [](Block b, std::size_t i, std::size_t j = 0) {
      auto n = make(Op::Var);
      n->block = b;
      n->i = i;
      n->j = j;
      return n;
    };
    if (boundary_) {
      if (s.size() > 2 && (s.rfind("ua", 0) == 0 || s.rfind("ub", 0) == 0) && all_digits(s.substr(2)))
        return var(s[1] == 'a' ? Block::UA : Block::UB, index(s.substr(2)));
      return nullptr;
    }
    if (s.size() > 2 && s.rfind("xi", 0) == 0) {
      std::string rest = s.substr(2);
      auto us = rest.find('_');
      if (us != std::string::npos) {
        if (!all_digits(rest.substr(0, us)) || !all_digits(rest.substr(us + 1))) return nullptr;
        return var(Block::Xi, index(rest.substr(0, us)), index(rest.substr(us + 1)));
      }
      if (!all_digits(rest)) return nullptr;
      if (rest.size() == 2) return var(Block::Xi, index(rest.substr(0, 1)), index(rest.substr(1, 1)));
      if (rest.size() == 1) {
        auto n = var(Block::Xi, 0, index(rest));
        shorthand.push_back(n.get());
        shorthand_cols.push_back(t.col);
        return n;
      }
      return nullptr;
    }
    if (s.size() > 1 && s[0] == 'x' && all_digits(s.substr(1))) return var(Block::X, index(s.substr(1)));
    if (s.size() > 1 && s[0] == 'u' && all_digits(s.substr(1))) return var(Block::U, index(s.substr(1)));
    return nullptr;
  }

  MNode primary() {
    const Token& t = peek();
    if (t.kind == Tok::Num) {
      ++pos_;
      return constant(t.num);
    }
    if (t.kind == Tok::LParen) {
      ++pos_;
      MNode e = expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind != Tok::Ident) fail("unexpected '" + t.text + "'");
    Token id = next();
    const std::string& s = id.text;
    if (s == "pi") return constant(std::numbers::pi);
    struct Fn {
      const char* name;
      Op op;
    };
    static const Fn unary_fns[] = {{"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp},
                                   {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"square", Op::Square}};
    for (const auto& f : unary_fns) {
      if (s != f.name) continue;
      auto a = args();
      if (a.size() != 1) throw ParseError("arity mismatch: " + s + " takes 1 argument", id.col);
      return make(f.op, std::move(a));
    }
    if (s == "abs") {
      auto a = args();
      if (a.size() != 1) throw ParseError("arity mismatch: abs takes 1 argument", id.col);
      // abs(e) is rewritten as max(e, -e); nested abs then stays inside the max/min rules.
      return make(Op::Max, {a[0], make(Op::Neg, {a[0]})});
    }
    if (s == "max" || s == "min") {
      auto a = args();
      return make(s == "max" ? Op::Max : Op::Min, std::move(a));
    }
    if (peek().kind == Tok::LParen) throw ParseError("unknown function '" + s + "'", id.col);
    MNode v = variable(id);
    if (!v) throw ParseError("unknown identifier '" + s + "'", id.col);
    return v;
  }
};

void collect_dims(const Node& n, Dims& dims, std::size_t& mb) {
  if (n.op == Op::Var) {
    switch (n.block) {
      case Block::X: dims.d = std::max(dims.d, n.i + 1); break;
      case Block::U: dims.m = std::max(dims.m, n.i + 1); break;
      case Block::Xi:
        dims.m = std::max(dims.m, n.i + 1);
        dims.d = std::max(dims.d, n.j + 1);
        break;
      case Block::UA:
      case Block::UB: mb = std::max(mb, n.i + 1); break;
    }
  }
  for (const auto& k : n.kids) collect_dims(*k, dims, mb);
}

double eval_node(const Node& n, const Point& p) {
  auto k = [&](std::size_t i) { return eval_node(*n.kids[i], p); };
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: {
      const Vec* src = nullptr;
      std::size_t idx = n.i;
      switch (n.block) {
        case Block::X: src = &p.x; break;
        case Block::U: src = &p.u; break;
        case Block::Xi: {
          src = &p.xi;
          idx = n.i * p.d + n.j;
          break;
        }
        case Block::UA: src = &p.ua; break;
        case Block::UB: src = &p.ub; break;
      }
      if (idx >= src->size()) throw std::out_of_range("eval: variable index out of range");
      return (*src)[idx];
    }
    case Op::Add: return k(0) + k(1);
    case Op::Sub: return k(0) - k(1);
    case Op::Mul: return k(0) * k(1);
    case Op::Div: {
      double b = k(1);
      if (b == 0.0) throw std::domain_error("eval: division by zero");
      return k(0) / b;
    }
    case Op::Neg: return -k(0);
    case Op::Pow: {
      double b = k(0);
      if (b < 0 && n.value != std::floor(n.value)) throw std::domain_error("eval: negative base with non-integer exponent");
      if (b == 0 && n.value < 0) throw std::domain_error("eval: zero to a negative power");
      return std::pow(b, n.value);
    }
    case Op::Sin: return std::sin(k(0));
    case Op::Cos: return std::cos(k(0));
    case Op::Exp: return std::exp(k(0));
    case Op::Log: {
      double a = k(0);
      if (a <= 0) throw std::domain_error("eval: log of non-positive value");
      return std::log(a);
    }
    case Op::Sqrt: {
      double a = k(0);
      if (a < 0) throw std::domain_error("eval: sqrt of negative value");
      return std::sqrt(a);
    }
    case Op::Square: {
      double a = k(0);
      return a * a;
    }
    case Op::Max: {
      double m = k(0);
      for (std::size_t i = 1; i < n.kids.size(); ++i) m = std::max(m, k(i));
      return m;
    }
    case Op::Min: {
      double m = k(0);
      for (std::size_t i = 1; i < n.kids.size(); ++i) m = std::min(m, k(i));
      return m;
    }
  }
  return 0.0;
}

bool uses_block(const Node& n, Block b) {
  if (n.op == Op::Var && n.block == b) return true;
  return std::any_of(n.kids.begin(), n.kids.end(), [b](const NodePtr& k) { return uses_block(*k, b); });
}

void check_ranges(const Node& n, Dims dims, const std::string& text) {
  if (n.op == Op::Var) {
    bool ok = true;
    switch (n.block) {
      case Block::X: ok = n.i < dims.d; break;
      case Block::U: ok = n.i < dims.m; break;
      case Block::Xi: ok = n.i < dims.m && n.j < dims.d; break;
      case Block::UA:
      case Block::UB: ok = n.i < dims.m; break;
    }
    if (!ok) throw ParseError("variable index out of declared range in '" + text + "'", 0);
  }
  for (const auto& k : n.kids) check_ranges(*k, dims, text);
}

}  // namespace

bool Expr::uses(Block b) const { return root_ && uses_block(*root_, b); }

Expr parse(std::string_view text, const Dims* declared) {
  Parser ps(text, false);
  MNode root = ps.parse_all();
  Dims dims;
  std::size_t mb = 0;
  collect_dims(*root, dims, mb);
  std::size_t m = declared ? declared->m : dims.m;
  // xi<k>: component k of a vector field (derivative 1) when m >= 2, else derivative k of u1.
  for (Node* n : ps.shorthand) {
    if (m >= 2) {
      n->i = n->j;
      n->j = 0;
    }
  }
  dims = Dims{};
  collect_dims(*root, dims, mb);
  if (declared) {
    check_ranges(*root, *declared, std::string(text));
    dims = *declared;
  }
  return Expr(root, std::string(text), dims, false);
}

Expr parse_boundary(std::string_view text, std::size_t m) {
  Parser ps(text, true);
  MNode root = ps.parse_all();
  Dims dims;
  std::size_t mb = 0;
  collect_dims(*root, dims, mb);
  Dims out{1, m ? m : mb};
  if (m) check_ranges(*root, out, std::string(text));
  return Expr(root, std::string(text), out, true);
}

double eval(const Expr& e, const Point& p) {
  if (!e.root()) throw std::invalid_argument("eval: empty expression");
  return eval_node(*e.root(), p);
}

std::size_t selected_dim(const VariableSelector& sel, Dims dims) {
  std::size_t n = 0;
  if (sel.x) n += dims.d;
  if (sel.u) n += dims.m;
  if (sel.xi) n += dims.m * dims.d;
  if (sel.ua) n += dims.m;
  if (sel.ub) n += dims.m;
  return n;
}

namespace {

struct Layout {
  std::size_t n = 0;
  long off[5] = {-1, -1, -1, -1, -1};
  Dims dims;
};

Layout layout(const VariableSelector& sel, Dims dims) {
  Layout L;
  L.dims = dims;
  std::size_t o = 0;
  if (sel.x) { L.off[0] = static_cast<long>(o); o += dims.d; }
  if (sel.u) { L.off[1] = static_cast<long>(o); o += dims.m; }
  if (sel.xi) { L.off[2] = static_cast<long>(o); o += dims.m * dims.d; }
  if (sel.ua) { L.off[3] = static_cast<long>(o); o += dims.m; }
  if (sel.ub) { L.off[4] = static_cast<long>(o); o += dims.m; }
  L.n = o;
  return L;
}

ValueCodiff cd_node(const Node& n, const Layout& L, const Point& p) {
  auto kid = [&](std::size_t i) { return cd_node(*n.kids[i], L, p); };
  auto chain = [&](double value, double partial, const ValueCodiff& a) {
    Term t{partial, &a.cd};
    return ValueCodiff{value, linear_combine(std::span<const Term>(&t, 1))};
  };
  switch (n.op) {
    case Op::Const: return {n.value, Codifferential::zero(L.n)};
    case Op::Var: {
      double v = eval_node(n, p);
      long off = L.off[static_cast<int>(n.block)];
      if (off < 0) return {v, Codifferential::zero(L.n)};
      std::size_t idx = n.block == Block::Xi ? n.i * L.dims.d + n.j : n.i;
      Vec g(L.n, 0.0);
      g[static_cast<std::size_t>(off) + idx] = 1.0;
      return {v, Codifferential::smooth(std::move(g))};
    }
    case Op::Add:
    case Op::Sub: {
      auto a = kid(0), b = kid(1);
      double s = n.op == Op::Add ? 1.0 : -1.0;
      Term t[2] = {{1.0, &a.cd}, {s, &b.cd}};
      return {a.value + s * b.value, linear_combine(t)};
    }
    case Op::Neg: {
      auto a = kid(0);
      return chain(-a.value, -1.0, a);
    }
    case Op::Mul: {
      auto a = kid(0), b = kid(1);
      double partials[2] = {b.value, a.value};
      Codifferential cds[2] = {a.cd, b.cd};
      return {a.value * b.value, compose_smooth(partials, cds)};
    }
    case Op::Div: {
      auto a = kid(0), b = kid(1);
      if (b.value == 0.0) throw std::domain_error("codiff: division by zero");
      double partials[2] = {1.0 / b.value, -a.value / (b.value * b.value)};
      Codifferential cds[2] = {a.cd, b.cd};
      return {a.value / b.value, compose_smooth(partials, cds)};
    }
    case Op::Pow: {
      auto a = kid(0);
      double c = n.value;
      bool integer = c == std::floor(c);
      if (c == 0.0) return {1.0, Codifferential::zero(L.n)};
      if (a.value < 0 && !integer) throw std::domain_error("codiff: negative base with non-integer exponent");
      if (a.value == 0.0 && !(integer && c >= 1.0))
        throw UnsupportedNode("codiff: power with exponent " + std::to_string(c) + " is not differentiable at 0");
      return chain(std::pow(a.value, c), c * std::pow(a.value, c - 1.0), a);
    }
    case Op::Sin: {
      auto a = kid(0);
      return chain(std::sin(a.value), std::cos(a.value), a);
    }
    case Op::Cos: {
      auto a = kid(0);
      return chain(std::cos(a.value), -std::sin(a.value), a);
    }
    case Op::Exp: {
      auto a = kid(0);
      double e = std::exp(a.value);
      return chain(e, e, a);
    }
    case Op::Log: {
      auto a = kid(0);
      if (a.value <= 0) throw std::domain_error("codiff: log of non-positive value");
      return chain(std::log(a.value), 1.0 / a.value, a);
    }
    case Op::Sqrt: {
      auto a = kid(0);
      if (a.value < 0) throw std::domain_error("codiff: sqrt of negative value");
      if (a.value == 0) throw UnsupportedNode("codiff: sqrt is not differentiable at 0");
      double r = std::sqrt(a.value);
      return chain(r, 0.5 / r, a);
    }
    case Op::Square: {
      auto a = kid(0);
      return chain(a.value * a.value, 2.0 * a.value, a);
    }
    case Op::Max:
    case Op::Min: {
      std::vector<Codifferential> cds;
      std::vector<double> vals;
      for (std::size_t i = 0; i < n.kids.size(); ++i) {
        auto a = kid(i);
        vals.push_back(a.value);
        cds.push_back(std::move(a.cd));
      }
      bool mx = n.op == Op::Max;
      double f = mx ? *std::max_element(vals.begin(), vals.end()) : *std::min_element(vals.begin(), vals.end());
      return {f, mx ? max_rule(cds, vals) : min_rule(cds, vals)};
    }
  }
  throw UnsupportedNode("codiff: unknown node");
}

}  // namespace

ValueCodiff codiff_at(const Expr& e, const VariableSelector& sel, Dims dims, const Point& p) {
  if (!e.root()) throw std::invalid_argument("codiff_at: empty expression");
  if (!sel.any()) throw std::invalid_argument("codiff_at: no differentiated block");
  Layout L = layout(sel, dims);
  if (L.n == 0) throw std::invalid_argument("codiff_at: selected blocks are empty");
  return cd_node(*e.root(), L, p);
}

}  // namespace codvar
