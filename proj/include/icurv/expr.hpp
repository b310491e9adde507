#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icurv/jet.hpp"

namespace icurv::expr {

// Scalar expression language used for warp and weight functions. Grammar
// (EBNF, also in docs/grammar.ebnf):
//
//   expression = term { ("+" | "-") term } ;
//   term       = unary { ("*" | "/") unary } ;
//   unary      = "-" unary | power ;
//   power      = atom [ "^" unary ] ;
//   atom       = number | "pi" | variable | function "(" expression ")"
//              | "(" expression ")" ;
//   function   = "sin" | "cos" | "exp" | "log" | "sqrt"
//              | "sinh" | "cosh" | "tanh" | "coth" ;
//
// "^" binds tighter than "*" and "/" and is right-associative; unary minus
// binds looser than "^" (so -x^2 parses as -(x^2)).

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, int pos)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"),
        position(pos) {}
  int position;
};

class EvalError : public std::runtime_error {
public:
  EvalError(const std::string& msg, int pos)
      : std::runtime_error(msg + " (expression position " + std::to_string(pos) + ")"),
        position(pos) {}
  int position;
};

enum class UnaryFn { Neg, Sin, Cos, Exp, Log, Sqrt, Sinh, Cosh, Tanh, Coth };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

// Immutable after parse; shared freely across threads.
struct Node {
  enum class Kind { Constant, Variable, Unary, Binary } kind = Kind::Constant;
  double constant = 0.0;
  int var = -1;
  UnaryFn fn = UnaryFn::Neg;
  BinOp op = BinOp::Add;
  NodePtr a, b;
  int pos = 0;
  bool has_vars = false;
};

class ExprAst {
public:
  ExprAst() = default;
  ExprAst(NodePtr root, std::shared_ptr<const std::vector<std::string>> vars,
          std::string source)
      : root_(std::move(root)), vars_(std::move(vars)), source_(std::move(source)) {}

  bool valid() const { return root_ != nullptr; }
  const NodePtr& root() const { return root_; }
  const std::vector<std::string>& variables() const { return *vars_; }
  int nvars() const { return static_cast<int>(vars_->size()); }
  const std::string& source() const { return source_; }

private:
  NodePtr root_;
  std::shared_ptr<const std::vector<std::string>> vars_;
  std::string source_;
};

namespace detail {

inline const char* fn_name(UnaryFn f) {
  switch (f) {
    case UnaryFn::Neg: return "-";
    case UnaryFn::Sin: return "sin";
    case UnaryFn::Cos: return "cos";
    case UnaryFn::Exp: return "exp";
    case UnaryFn::Log: return "log";
    case UnaryFn::Sqrt: return "sqrt";
    case UnaryFn::Sinh: return "sinh";
    case UnaryFn::Cosh: return "cosh";
    case UnaryFn::Tanh: return "tanh";
    case UnaryFn::Coth: return "coth";
  }
  return "?";
}

class Parser {
public:
  Parser(std::string_view src, const std::vector<std::string>& vars)
      : src_(src), vars_(vars) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_ws();
    if (pos_ != src_.size())
      throw ParseError("unexpected trailing input", static_cast<int>(pos_));
    return e;
  }

private:
  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      skip_ws();
      if (peek() == '+' || peek() == '-') {
        const int at = static_cast<int>(pos_);
        const char c = advance();
        NodePtr rhs = term();
        lhs = make_binary(c == '+' ? BinOp::Add : BinOp::Sub, lhs, rhs, at);
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      skip_ws();
      if (peek() == '*' || peek() == '/') {
        const int at = static_cast<int>(pos_);
        const char c = advance();
        NodePtr rhs = unary();
        lhs = make_binary(c == '*' ? BinOp::Mul : BinOp::Div, lhs, rhs, at);
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    skip_ws();
    if (peek() == '-') {
      const int at = static_cast<int>(pos_);
      advance();
      NodePtr operand = unary();
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Unary;
      n->fn = UnaryFn::Neg;
      n->a = operand;
      n->pos = at;
      n->has_vars = operand->has_vars;
      return n;
    }
    if (peek() == '+') {  // unary plus: accepted, no-op
      advance();
      return unary();
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    skip_ws();
    if (peek() == '^') {
      const int at = static_cast<int>(pos_);
      advance();
      NodePtr exponent = unary();  // right-associative, signed exponents allowed
      return make_binary(BinOp::Pow, base, exponent, at);
    }
    return base;
  }

  NodePtr atom() {
    skip_ws();
    const int at = static_cast<int>(pos_);
    const char c = peek();
    if (c == '\0') throw ParseError("unexpected end of expression", at);
    if (c == '(') {
      advance();
      NodePtr e = expression();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(at);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier(at);
    throw ParseError(std::string("unexpected character '") + c + "'", at);
  }

  NodePtr number(int at) {
    double value = 0.0;
    const char* begin = src_.data() + pos_;
    const char* end = src_.data() + src_.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin)
      throw ParseError("malformed number", at);
    pos_ += static_cast<size_t>(ptr - begin);
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Constant;
    n->constant = value;
    n->pos = at;
    return n;
  }

  NodePtr identifier(int at) {
    size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    if (name == "pi") {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Constant;
      n->constant = 3.14159265358979323846;
      n->pos = at;
      return n;
    }

    const UnaryFn* fn = lookup_fn(name);
    skip_ws();
    if (fn != nullptr) {
      if (peek() != '(')
        throw ParseError("function '" + name + "' requires parenthesized argument", at);
      advance();
      NodePtr arg = expression();
      skip_ws();
      if (peek() == ',')
        throw ParseError("function '" + name + "' takes exactly one argument", at);
      expect(')');
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Unary;
      n->fn = *fn;
      n->a = arg;
      n->pos = at;
      n->has_vars = arg->has_vars;
      return n;
    }

    for (size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::Variable;
        n->var = static_cast<int>(i);
        n->pos = at;
        n->has_vars = true;
        return n;
      }
    }
    if (peek() == '(')
      throw ParseError("unknown function '" + name + "'", at);
    throw ParseError("unknown identifier '" + name + "'", at);
  }

  static const UnaryFn* lookup_fn(const std::string& name) {
    static const std::pair<const char*, UnaryFn> table[] = {
        {"sin", UnaryFn::Sin},   {"cos", UnaryFn::Cos},   {"exp", UnaryFn::Exp},
        {"log", UnaryFn::Log},   {"sqrt", UnaryFn::Sqrt}, {"sinh", UnaryFn::Sinh},
        {"cosh", UnaryFn::Cosh}, {"tanh", UnaryFn::Tanh}, {"coth", UnaryFn::Coth}};
    for (const auto& [k, v] : table)
      if (name == k) return &v;
    return nullptr;
  }

  NodePtr make_binary(BinOp op, NodePtr a, NodePtr b, int at) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Binary;
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    n->pos = at;
    n->has_vars = n->a->has_vars || n->b->has_vars;
    return n;
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
  }
  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
  char advance() { return src_[pos_++]; }
  void expect(char c) {
    skip_ws();
    if (peek() != c)
      throw ParseError(std::string("expected '") + c + "'", static_cast<int>(pos_));
    advance();
  }

  std::string_view src_;
  const std::vector<std::string>& vars_;
  size_t pos_ = 0;
};

inline Jet2 eval_node(const Node& node, std::span<const double> point, int nvars) {
  switch (node.kind) {
    case Node::Kind::Constant:
      return Jet2::constant(node.constant, nvars);
    case Node::Kind::Variable:
      return Jet2::variable(point[static_cast<size_t>(node.var)], node.var, nvars);
    case Node::Kind::Unary: {
      Jet2 u = eval_node(*node.a, point, nvars);
      Jet2 r(nvars);
      switch (node.fn) {
        case UnaryFn::Neg: r = -u; break;
        case UnaryFn::Sin: r = jet_sin(u); break;
        case UnaryFn::Cos: r = jet_cos(u); break;
        case UnaryFn::Exp: r = jet_exp(u); break;
        case UnaryFn::Log:
          if (!(u.value() > 0.0)) throw EvalError("log of non-positive value", node.pos);
          r = jet_log(u);
          break;
        case UnaryFn::Sqrt:
          if (!(u.value() > 0.0)) throw EvalError("sqrt of non-positive value", node.pos);
          r = jet_sqrt(u);
          break;
        case UnaryFn::Sinh: r = jet_sinh(u); break;
        case UnaryFn::Cosh: r = jet_cosh(u); break;
        case UnaryFn::Tanh: r = jet_tanh(u); break;
        case UnaryFn::Coth:
          if (u.value() == 0.0) throw EvalError("coth evaluated at zero", node.pos);
          r = jet_coth(u);
          break;
      }
      if (!r.all_finite())
        throw EvalError(std::string("non-finite result in ") + fn_name(node.fn), node.pos);
      return r;
    }
    case Node::Kind::Binary: {
      Jet2 a = eval_node(*node.a, point, nvars);
      Jet2 b = eval_node(*node.b, point, nvars);
      Jet2 r(nvars);
      switch (node.op) {
        case BinOp::Add: r = a + b; break;
        case BinOp::Sub: r = a - b; break;
        case BinOp::Mul: r = a * b; break;
        case BinOp::Div:
          if (b.value() == 0.0) throw EvalError("division by zero", node.pos);
          r = a / b;
          break;
        case BinOp::Pow:
          if (!node.b->has_vars) {
            r = jet_pow_const(a, b.value());
          } else {
            if (!(a.value() > 0.0))
              throw EvalError("power with non-constant exponent requires positive base",
                              node.pos);
            r = jet_exp(b * jet_log(a));
          }
          break;
      }
      if (!r.all_finite()) throw EvalError("non-finite result", node.pos);
      return r;
    }
  }
  throw EvalError("corrupt expression node", node.pos);
}

inline double eval_node_value(const Node& node, std::span<const double> point) {
  switch (node.kind) {
    case Node::Kind::Constant:
      return node.constant;
    case Node::Kind::Variable:
      return point[static_cast<size_t>(node.var)];
    case Node::Kind::Unary: {
      const double u = eval_node_value(*node.a, point);
      double r = 0;
      switch (node.fn) {
        case UnaryFn::Neg: r = -u; break;
        case UnaryFn::Sin: r = std::sin(u); break;
        case UnaryFn::Cos: r = std::cos(u); break;
        case UnaryFn::Exp: r = std::exp(u); break;
        case UnaryFn::Log:
          if (!(u > 0.0)) throw EvalError("log of non-positive value", node.pos);
          r = std::log(u);
          break;
        case UnaryFn::Sqrt:
          if (!(u > 0.0)) throw EvalError("sqrt of non-positive value", node.pos);
          r = std::sqrt(u);
          break;
        case UnaryFn::Sinh: r = std::sinh(u); break;
        case UnaryFn::Cosh: r = std::cosh(u); break;
        case UnaryFn::Tanh: r = std::tanh(u); break;
        case UnaryFn::Coth:
          if (u == 0.0) throw EvalError("coth evaluated at zero", node.pos);
          r = 1.0 / std::tanh(u);
          break;
      }
      if (!std::isfinite(r))
        throw EvalError(std::string("non-finite result in ") + fn_name(node.fn), node.pos);
      return r;
    }
    case Node::Kind::Binary: {
      const double a = eval_node_value(*node.a, point);
      const double b = eval_node_value(*node.b, point);
      double r = 0;
      switch (node.op) {
        case BinOp::Add: r = a + b; break;
        case BinOp::Sub: r = a - b; break;
        case BinOp::Mul: r = a * b; break;
        case BinOp::Div:
          if (b == 0.0) throw EvalError("division by zero", node.pos);
          r = a / b;
          break;
        case BinOp::Pow:
          r = std::pow(a, b);
          break;
      }
      if (!std::isfinite(r)) throw EvalError("non-finite result", node.pos);
      return r;
    }
  }
  throw EvalError("corrupt expression node", node.pos);
}

inline NodePtr rebuild_pinned(const NodePtr& node, int index, double value) {
  switch (node->kind) {
    case Node::Kind::Constant:
      return node;
    case Node::Kind::Variable: {
      auto n = std::make_shared<Node>(*node);
      if (node->var == index) {
        n->kind = Node::Kind::Constant;
        n->constant = value;
        n->var = -1;
        n->has_vars = false;
      } else if (node->var > index) {
        n->var = node->var - 1;
      }
      return n;
    }
    case Node::Kind::Unary: {
      auto n = std::make_shared<Node>(*node);
      n->a = rebuild_pinned(node->a, index, value);
      n->has_vars = n->a->has_vars;
      return n;
    }
    case Node::Kind::Binary: {
      auto n = std::make_shared<Node>(*node);
      n->a = rebuild_pinned(node->a, index, value);
      n->b = rebuild_pinned(node->b, index, value);
      n->has_vars = n->a->has_vars || n->b->has_vars;
      return n;
    }
  }
  return node;
}

inline void collect_vars(const NodePtr& node, std::vector<bool>& used) {
  if (!node || !node->has_vars) return;
  if (node->kind == Node::Kind::Variable) {
    used[static_cast<size_t>(node->var)] = true;
    return;
  }
  collect_vars(node->a, used);
  collect_vars(node->b, used);
}

}  // namespace detail

inline ExprAst parse(std::string_view source, const std::vector<std::string>& variables) {
  if (source.empty()) throw ParseError("empty expression", 0);
  for (size_t i = 0; i < variables.size(); ++i)
    for (size_t j = i + 1; j < variables.size(); ++j)
      if (variables[i] == variables[j])
        throw ParseError("duplicate variable name '" + variables[i] + "'", 0);
  detail::Parser p(source, variables);
  NodePtr root = p.parse();
  return ExprAst(root, std::make_shared<const std::vector<std::string>>(variables),
                 std::string(source));
}

// Value, gradient and Hessian at a point. Deterministic; throws EvalError on
// domain violations (log/sqrt of non-positive values, division by zero,
// coth at zero) and on any non-finite intermediate.
inline Jet2 eval_jet2(const ExprAst& ast, std::span<const double> point) {
  if (static_cast<int>(point.size()) != ast.nvars())
    throw EvalError("point dimension does not match variable count", 0);
  return detail::eval_node(*ast.root(), point, ast.nvars());
}

inline double eval_value(const ExprAst& ast, std::span<const double> point) {
  if (static_cast<int>(point.size()) != ast.nvars())
    throw EvalError("point dimension does not match variable count", 0);
  return detail::eval_node_value(*ast.root(), point);
}

// Freezes one variable at a fixed value, producing an expression over the
// remaining variables (used to induce metrics on coordinate slices).
inline ExprAst pin_variable(const ExprAst& ast, int index, double value) {
  auto vars = std::make_shared<std::vector<std::string>>(ast.variables());
  vars->erase(vars->begin() + index);
  NodePtr root = detail::rebuild_pinned(ast.root(), index, value);
  return ExprAst(root, std::move(vars),
                 "pin(" + ast.source() + ", " + ast.variables()[static_cast<size_t>(index)] +
                     ")");
}

inline std::vector<bool> variables_used(const ExprAst& ast) {
  std::vector<bool> used(static_cast<size_t>(ast.nvars()), false);
  detail::collect_vars(ast.root(), used);
  return used;
}

// Exact decimal formatting for splicing numeric constants into expression
// sources (round-trips through the parser bit for bit).
inline std::string fmt_num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace icurv::expr
