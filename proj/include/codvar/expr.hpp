#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "codvar/codiff.hpp"

namespace codvar {

// Variable blocks. UA/UB are the endpoint values u(alpha), u(beta) used by boundary functions.
enum class Block { X, U, Xi, UA, UB };

struct Dims {
  std::size_t d = 0;  // space dimension
  std::size_t m = 0;  // field components
  bool operator==(const Dims&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t column)
      : std::runtime_error(msg + " at column " + std::to_string(column)), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

// Raised when a codifferential cannot be produced at a point (e.g. sqrt at 0).
class UnsupportedNode : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt, Square, Max, Min };

struct Node {
  Op op = Op::Const;
  double value = 0.0;            // Const value, or exponent for Pow
  Block block = Block::X;        // Var
  std::size_t i = 0, j = 0;      // Var indices (0-based); j only for Xi
  std::vector<NodePtr> kids;
};

// Point at which an expression is evaluated. xi is row-major m x d.
struct Point {
  Vec x, u, xi, ua, ub;
  std::size_t d = 1;  // row length of xi
};

// Which blocks are differentiated. Variable order in the result is x, u, xi, ua, ub.
struct VariableSelector {
  bool x = false, u = false, xi = false, ua = false, ub = false;
  static VariableSelector u_xi() { return {false, true, true, false, false}; }
  static VariableSelector x_xi() { return {true, false, true, false, false}; }
  static VariableSelector xi_only() { return {false, false, true, false, false}; }
  static VariableSelector boundary() { return {false, false, false, true, true}; }
  bool any() const { return x || u || xi || ua || ub; }
};

class Expr {
 public:
  Expr() = default;
  explicit Expr(NodePtr root, std::string text, Dims dims, bool boundary)
      : root_(std::move(root)), text_(std::move(text)), dims_(dims), boundary_(boundary) {}

  const NodePtr& root() const { return root_; }
  const std::string& text() const { return text_; }
  // Dimensions inferred from the largest indices referenced (0 when a block is unused).
  Dims dims() const { return dims_; }
  bool is_boundary() const { return boundary_; }
  bool uses(Block b) const;

 private:
  NodePtr root_;
  std::string text_;
  Dims dims_;
  bool boundary_ = false;
};

// Integrand grammar: numbers, x1.., u1.., xi<i><j> (or xi<k> shorthand), + - * / ^,
// abs max min sin cos exp log sqrt square, parentheses.
// If `declared` is given, shorthand xi<k> and index ranges are resolved against it.
Expr parse(std::string_view text, const Dims* declared = nullptr);
// Boundary grammar: ua1.., ub1.. for u(alpha), u(beta); numbers and the same operators.
Expr parse_boundary(std::string_view text, std::size_t m = 0);

double eval(const Expr& e, const Point& p);

std::size_t selected_dim(const VariableSelector& sel, Dims dims);

struct ValueCodiff {
  double value;
  Codifferential cd;
};

// Codifferential with respect to the selected blocks at p (dims give the block sizes).
ValueCodiff codiff_at(const Expr& e, const VariableSelector& sel, Dims dims, const Point& p);

}  // namespace codvar
