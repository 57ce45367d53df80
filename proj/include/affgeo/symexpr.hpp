#pragma once

/**
 * @file symexpr.hpp
 * @brief Scalar-field expressions: parsing, exact symbolic differentiation,
 * conservative simplification and pointwise evaluation.
 *
 * Expressions are immutable trees shared through `std::shared_ptr<const>`;
 * copying an Expression is cheap and instances may be evaluated concurrently.
 *
 * @code
 * auto ctx = affgeo::VarContext::of({"p", "q"});
 * auto h = affgeo::parse("p^2/2 + q^2/2", ctx);
 * auto dh = affgeo::differentiate(h, "p");        // p
 * double v = affgeo::evaluate(dh, {{"p", 3.0}, {"q", 1.0}});
 * @endcode
 */

#include <array>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "affgeo/errors.hpp"

namespace affgeo {

enum class Op : std::uint8_t { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt };

namespace detail {

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  int exponent = 0;
  std::string name;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

inline bool is_function(Op op) {
  return op == Op::Sin || op == Op::Cos || op == Op::Exp || op == Op::Sqrt;
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Sqrt: return "sqrt";
    default: return "";
  }
}

}  // namespace detail

/// Point at which an expression is evaluated: variable name -> value.
using Point = std::map<std::string, double, std::less<>>;

class Expression {
 public:
  Expression() : Expression(0.0) {}
  Expression(double value) : node_(make_const(value)) {}  // NOLINT: implicit numeric literals

  static Expression constant(double value) { return Expression(value); }

  static Expression variable(std::string name) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Var;
    n->name = std::move(name);
    return Expression(std::move(n));
  }

  Op op() const noexcept { return node_->op; }
  const detail::NodePtr& node() const noexcept { return node_; }

  bool is_constant() const noexcept { return node_->op == Op::Const; }
  bool is_constant(double v) const noexcept { return is_constant() && node_->value == v; }
  bool is_zero() const noexcept { return is_constant(0.0); }
  double constant_value() const noexcept { return node_->value; }
  const std::string& variable_name() const noexcept { return node_->name; }
  int exponent() const noexcept { return node_->exponent; }

  Expression lhs() const { return Expression(node_->lhs); }
  Expression rhs() const { return Expression(node_->rhs); }

  explicit Expression(detail::NodePtr n) : node_(std::move(n)) {}

 private:
  static detail::NodePtr make_const(double v) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
  }

  detail::NodePtr node_;
};

// ---------------------------------------------------------------------------
// Structural equality
// ---------------------------------------------------------------------------

inline bool structurally_equal(const Expression& a, const Expression& b) {
  const auto& x = *a.node();
  const auto& y = *b.node();
  if (a.node() == b.node()) return true;
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::Const: return x.value == y.value;
    case Op::Var: return x.name == y.name;
    case Op::Pow: return x.exponent == y.exponent && structurally_equal(a.lhs(), b.lhs());
    case Op::Neg:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Sqrt: return structurally_equal(a.lhs(), b.lhs());
    default:
      return structurally_equal(a.lhs(), b.lhs()) && structurally_equal(a.rhs(), b.rhs());
  }
}

// ---------------------------------------------------------------------------
// Simplifying constructors. Only constant folding, 0/1 identities, double
// negation, x - x and coefficient flattening; no canonical form.
// ---------------------------------------------------------------------------

namespace detail {

inline Expression make(Op op, const Expression& l, const Expression& r = Expression(), int k = 0) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = l.node();
  if (op != Op::Pow && op != Op::Neg && !is_function(op)) n->rhs = r.node();
  n->exponent = k;
  return Expression(std::move(n));
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace detail

inline Expression operator-(const Expression& e) {
  if (e.is_constant()) return Expression(-e.constant_value());
  if (e.op() == Op::Neg) return e.lhs();
  return detail::make(Op::Neg, e);
}

inline Expression operator+(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return Expression(a.constant_value() + b.constant_value());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.op() == Op::Neg) return detail::make(Op::Sub, a, b.lhs());
  return detail::make(Op::Add, a, b);
}

inline Expression operator-(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return Expression(a.constant_value() - b.constant_value());
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (structurally_equal(a, b)) return Expression(0.0);
  if (b.op() == Op::Neg) return detail::make(Op::Add, a, b.lhs());
  return detail::make(Op::Sub, a, b);
}

inline Expression operator*(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) return Expression(a.constant_value() * b.constant_value());
  if (a.is_zero() || b.is_zero()) return Expression(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  if (a.op() == Op::Neg) return -(a.lhs() * b);
  if (b.op() == Op::Neg) return -(a * b.lhs());
  // c1 * (c2 * x) -> (c1 c2) * x; constants are kept on the left.
  if (b.is_constant()) return b * a;
  if (a.is_constant() && b.op() == Op::Mul && b.lhs().is_constant())
    return Expression(a.constant_value() * b.lhs().constant_value()) * b.rhs();
  return detail::make(Op::Mul, a, b);
}

inline Expression operator/(const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
    return Expression(a.constant_value() / b.constant_value());
  if (a.is_zero() && !b.is_zero()) return Expression(0.0);
  if (b.is_constant(1.0)) return a;
  if (b.is_constant(-1.0)) return -a;
  if (a.op() == Op::Neg) return -(a.lhs() / b);
  // (c * x) / k -> (c / k) * x.
  if (b.is_constant() && !b.is_zero() && a.op() == Op::Mul && a.lhs().is_constant())
    return Expression(a.lhs().constant_value() / b.constant_value()) * a.rhs();
  return detail::make(Op::Div, a, b);
}

inline Expression pow(const Expression& base, int k) {
  if (k == 0) return Expression(1.0);
  if (k == 1) return base;
  if (base.is_constant()) {
    const double v = std::pow(base.constant_value(), k);
    if (detail::finite(v)) return Expression(v);
  }
  if (base.op() == Op::Pow) {
    const long long combined = static_cast<long long>(base.exponent()) * k;
    if (combined >= -1'000'000 && combined <= 1'000'000)
      return pow(base.lhs(), static_cast<int>(combined));
  }
  return detail::make(Op::Pow, base, Expression(), k);
}

inline Expression sin(const Expression& e) {
  if (e.is_constant()) return Expression(std::sin(e.constant_value()));
  return detail::make(Op::Sin, e);
}

inline Expression cos(const Expression& e) {
  if (e.is_constant()) return Expression(std::cos(e.constant_value()));
  return detail::make(Op::Cos, e);
}

inline Expression exp(const Expression& e) {
  if (e.is_constant() && detail::finite(std::exp(e.constant_value())))
    return Expression(std::exp(e.constant_value()));
  return detail::make(Op::Exp, e);
}

inline Expression sqrt(const Expression& e) {
  if (e.is_constant() && e.constant_value() >= 0.0) return Expression(std::sqrt(e.constant_value()));
  return detail::make(Op::Sqrt, e);
}

inline Expression& operator+=(Expression& a, const Expression& b) { return a = a + b; }
inline Expression& operator-=(Expression& a, const Expression& b) { return a = a - b; }
inline Expression& operator*=(Expression& a, const Expression& b) { return a = a * b; }

/// Rebuild `e` through the simplifying constructors.
inline Expression simplify(const Expression& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var: return e;
    case Op::Add: return simplify(e.lhs()) + simplify(e.rhs());
    case Op::Sub: return simplify(e.lhs()) - simplify(e.rhs());
    case Op::Mul: return simplify(e.lhs()) * simplify(e.rhs());
    case Op::Div: return simplify(e.lhs()) / simplify(e.rhs());
    case Op::Pow: return pow(simplify(e.lhs()), e.exponent());
    case Op::Neg: return -simplify(e.lhs());
    case Op::Sin: return sin(simplify(e.lhs()));
    case Op::Cos: return cos(simplify(e.lhs()));
    case Op::Exp: return exp(simplify(e.lhs()));
    case Op::Sqrt: return sqrt(simplify(e.lhs()));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Variables, substitution, differentiation
// ---------------------------------------------------------------------------

inline void collect_variables(const Expression& e, std::set<std::string, std::less<>>& out) {
  switch (e.op()) {
    case Op::Const: return;
    case Op::Var: out.insert(e.variable_name()); return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
      collect_variables(e.lhs(), out);
      collect_variables(e.rhs(), out);
      return;
    default: collect_variables(e.lhs(), out); return;
  }
}

inline std::set<std::string, std::less<>> free_variables(const Expression& e) {
  std::set<std::string, std::less<>> out;
  collect_variables(e, out);
  return out;
}

inline bool depends_on(const Expression& e, std::string_view v) {
  return free_variables(e).contains(v);
}

/// Replace every occurrence of variable `v` by `replacement`, simplifying on the way up.
inline Expression substitute(const Expression& e, std::string_view v, const Expression& replacement) {
  switch (e.op()) {
    case Op::Const: return e;
    case Op::Var: return e.variable_name() == v ? replacement : e;
    case Op::Add: return substitute(e.lhs(), v, replacement) + substitute(e.rhs(), v, replacement);
    case Op::Sub: return substitute(e.lhs(), v, replacement) - substitute(e.rhs(), v, replacement);
    case Op::Mul: return substitute(e.lhs(), v, replacement) * substitute(e.rhs(), v, replacement);
    case Op::Div: return substitute(e.lhs(), v, replacement) / substitute(e.rhs(), v, replacement);
    case Op::Pow: return pow(substitute(e.lhs(), v, replacement), e.exponent());
    case Op::Neg: return -substitute(e.lhs(), v, replacement);
    case Op::Sin: return sin(substitute(e.lhs(), v, replacement));
    case Op::Cos: return cos(substitute(e.lhs(), v, replacement));
    case Op::Exp: return exp(substitute(e.lhs(), v, replacement));
    case Op::Sqrt: return sqrt(substitute(e.lhs(), v, replacement));
  }
  return e;
}

/// Exact partial derivative d e / d v.
inline Expression differentiate(const Expression& e, std::string_view v) {
  switch (e.op()) {
    case Op::Const: return Expression(0.0);
    case Op::Var: return Expression(e.variable_name() == v ? 1.0 : 0.0);
    case Op::Add: return differentiate(e.lhs(), v) + differentiate(e.rhs(), v);
    case Op::Sub: return differentiate(e.lhs(), v) - differentiate(e.rhs(), v);
    case Op::Mul: {
      const auto a = e.lhs();
      const auto b = e.rhs();
      return differentiate(a, v) * b + a * differentiate(b, v);
    }
    case Op::Div: {
      const auto a = e.lhs();
      const auto b = e.rhs();
      const auto da = differentiate(a, v);
      const auto db = differentiate(b, v);
      if (db.is_zero()) return da / b;
      return (da * b - a * db) / pow(b, 2);
    }
    case Op::Pow: {
      const auto base = e.lhs();
      const int k = e.exponent();
      return Expression(static_cast<double>(k)) * pow(base, k - 1) * differentiate(base, v);
    }
    case Op::Neg: return -differentiate(e.lhs(), v);
    case Op::Sin: return cos(e.lhs()) * differentiate(e.lhs(), v);
    case Op::Cos: return -(sin(e.lhs()) * differentiate(e.lhs(), v));
    case Op::Exp: return e * differentiate(e.lhs(), v);
    case Op::Sqrt: {
      const auto d = differentiate(e.lhs(), v);
      if (d.is_zero()) return Expression(0.0);
      return d / (Expression(2.0) * e);
    }
  }
  return Expression(0.0);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

inline double apply_div(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return checked(a / b, "division");
}

inline double apply_pow(double a, int k) {
  if (k < 0 && a == 0.0) throw DomainError("negative power of zero");
  return checked(std::pow(a, k), "power");
}

inline double apply_sqrt(double a) {
  if (a < 0.0) throw DomainError("sqrt of negative argument");
  return std::sqrt(a);
}

template <class Lookup>
double eval(const Node& n, const Lookup& lookup) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return lookup(n.name);
    case Op::Add: return checked(eval(*n.lhs, lookup) + eval(*n.rhs, lookup), "addition");
    case Op::Sub: return checked(eval(*n.lhs, lookup) - eval(*n.rhs, lookup), "subtraction");
    case Op::Mul: return checked(eval(*n.lhs, lookup) * eval(*n.rhs, lookup), "product");
    case Op::Div: return apply_div(eval(*n.lhs, lookup), eval(*n.rhs, lookup));
    case Op::Pow: return apply_pow(eval(*n.lhs, lookup), n.exponent);
    case Op::Neg: return -eval(*n.lhs, lookup);
    case Op::Sin: return std::sin(eval(*n.lhs, lookup));
    case Op::Cos: return std::cos(eval(*n.lhs, lookup));
    case Op::Exp: return checked(std::exp(eval(*n.lhs, lookup)), "exp");
    case Op::Sqrt: return apply_sqrt(eval(*n.lhs, lookup));
  }
  return 0.0;
}

}  // namespace detail

/// Evaluate at `point`. Throws UnboundVariable or DomainError.
inline double evaluate(const Expression& e, const Point& point) {
  return detail::eval(*e.node(), [&](const std::string& name) {
    auto it = point.find(name);
    if (it == point.end()) throw UnboundVariable(name);
    return it->second;
  });
}

/**
 * Expression flattened to a postfix program over an ordered variable list.
 * Used by integrators and grid checks, where map lookups would dominate.
 */
class CompiledExpression {
 public:
  CompiledExpression() = default;

  CompiledExpression(const Expression& e, std::span<const std::string> variables) {
    emit(*e.node(), variables);
  }

  double operator()(std::span<const double> x) const {
    std::array<double, 64> inline_stack{};
    std::vector<double> heap_stack;
    double* stack = inline_stack.data();
    if (max_depth_ > inline_stack.size()) {
      heap_stack.resize(max_depth_);
      stack = heap_stack.data();
    }
    std::size_t top = 0;
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::Const: stack[top++] = ins.value; break;
        case Op::Var: stack[top++] = x[ins.index]; break;
        case Op::Add: --top; stack[top - 1] = detail::checked(stack[top - 1] + stack[top], "addition"); break;
        case Op::Sub: --top; stack[top - 1] = detail::checked(stack[top - 1] - stack[top], "subtraction"); break;
        case Op::Mul: --top; stack[top - 1] = detail::checked(stack[top - 1] * stack[top], "product"); break;
        case Op::Div: --top; stack[top - 1] = detail::apply_div(stack[top - 1], stack[top]); break;
        case Op::Pow: stack[top - 1] = detail::apply_pow(stack[top - 1], ins.exponent); break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
        case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
        case Op::Exp: stack[top - 1] = detail::checked(std::exp(stack[top - 1]), "exp"); break;
        case Op::Sqrt: stack[top - 1] = detail::apply_sqrt(stack[top - 1]); break;
      }
    }
    return code_.empty() ? 0.0 : stack[0];
  }

 private:
  struct Instruction {
    Op op;
    int exponent = 0;
    std::size_t index = 0;
    double value = 0.0;
  };

  std::size_t emit(const detail::Node& n, std::span<const std::string> vars) {
    std::size_t depth = 1;
    switch (n.op) {
      case Op::Const: code_.push_back({Op::Const, 0, 0, n.value}); break;
      case Op::Var: {
        std::size_t i = 0;
        while (i < vars.size() && vars[i] != n.name) ++i;
        if (i == vars.size()) throw UnboundVariable(n.name);
        code_.push_back({Op::Var, 0, i, 0.0});
        break;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        const auto l = emit(*n.lhs, vars);
        const auto r = emit(*n.rhs, vars);
        depth = std::max(l, r + 1);
        code_.push_back({n.op});
        break;
      }
      default:
        depth = emit(*n.lhs, vars);
        code_.push_back({n.op, n.exponent});
        break;
    }
    max_depth_ = std::max(max_depth_, depth);
    return depth;
  }

  std::vector<Instruction> code_;
  std::size_t max_depth_ = 0;
};

// ---------------------------------------------------------------------------
// Variable contexts
// ---------------------------------------------------------------------------

enum class VarRole : std::uint8_t { Base, Fiber, Time, AVCoordinate };

/// Ordered, duplicate-free list of variable names, each with a role.
class VarContext {
 public:
  struct Entry {
    std::string name;
    VarRole role;
  };

  VarContext() = default;

  static VarContext of(std::initializer_list<std::string_view> names, VarRole role = VarRole::Base) {
    VarContext ctx;
    for (auto n : names) ctx.add(std::string(n), role);
    return ctx;
  }

  static VarContext of(const std::vector<std::string>& names, VarRole role = VarRole::Base) {
    VarContext ctx;
    for (const auto& n : names) ctx.add(n, role);
    return ctx;
  }

  VarContext& add(std::string name, VarRole role = VarRole::Base) {
    if (name.empty()) throw ContractViolation("empty variable name");
    if (contains(name)) throw ContractViolation("duplicate variable \"" + name + "\"");
    entries_.push_back({std::move(name), role});
    return *this;
  }

  bool contains(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return true;
    return false;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  std::vector<std::string> names(VarRole role) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (e.role == role) out.push_back(e.name);
    return out;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Parsing
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' int)?
//   base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const VarContext* ctx) : text_(text), ctx_(ctx) {}

  Expression parse() {
    auto e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression expr() {
    auto e = term();
    for (;;) {
      if (accept('+')) e = make(Op::Add, e, term());
      else if (accept('-')) e = make(Op::Sub, e, term());
      else return e;
    }
  }

  Expression term() {
    auto e = factor();
    for (;;) {
      if (accept('*')) e = make(Op::Mul, e, factor());
      else if (accept('/')) e = make(Op::Div, e, factor());
      else return e;
    }
  }

  Expression factor() {
    auto b = base();
    if (accept('^')) {
      skip_ws();
      const std::size_t start = pos_;
      if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
      const std::size_t digits = pos_;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_;
      if (pos_ == digits) {
        pos_ = start;
        fail("integer exponent expected");
      }
      int k = 0;
      auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, k);
      if (ec != std::errc() || ptr != text_.data() + pos_) {
        pos_ = start;
        fail("exponent out of range");
      }
      return make(Op::Pow, b, Expression(), k);
    }
    return b;
  }

  Expression base() {
    skip_ws();
    if (pos_ >= text_.size()) fail("operand expected");
    const char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return make(Op::Neg, base());
    }
    if (c == '(') {
      ++pos_;
      auto e = expr();
      if (!accept(')')) fail("')' expected");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("operand expected");
  }

  Expression number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') ++pos_, ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) fail("malformed number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      const std::size_t mark = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = mark;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Expression(v);
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    Op fn = Op::Const;
    if (name == "sin") fn = Op::Sin;
    else if (name == "cos") fn = Op::Cos;
    else if (name == "exp") fn = Op::Exp;
    else if (name == "sqrt") fn = Op::Sqrt;

    skip_ws();
    const bool call = pos_ < text_.size() && text_[pos_] == '(';
    if (fn != Op::Const) {
      if (!call) fail("'(' expected after function " + name);
      ++pos_;
      auto arg = expr();
      if (!accept(')')) fail("')' expected");
      return make(fn, arg);
    }
    if (call) throw UnknownIdentifier(name, start);
    if (ctx_ && !ctx_->contains(name)) throw UnknownIdentifier(name, start);
    return Expression::variable(name);
  }

  std::string_view text_;
  const VarContext* ctx_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parse `text`; every identifier must be declared in `ctx`.
inline Expression parse(std::string_view text, const VarContext& ctx) {
  return detail::Parser(text, &ctx).parse();
}

/// Parse without a scope check; any identifier that is not a function name is a variable.
inline Expression parse(std::string_view text) { return detail::Parser(text, nullptr).parse(); }

// ---------------------------------------------------------------------------
// Printing. Output is accepted by parse() and evaluates identically.
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf.data(), ptr);
}

namespace detail {

// 1: sum, 2: product, 3: factor, 4: base (atom)
inline int precedence(const Expression& e) {
  switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Pow: return 3;
    case Op::Neg: return 3;
    case Op::Const: return e.constant_value() < 0.0 || std::signbit(e.constant_value()) ? 3 : 4;
    default: return 4;
  }
}

inline void print(const Expression& e, std::string& out);

inline void print_wrapped(const Expression& e, std::string& out, bool wrap) {
  if (wrap) out += '(';
  print(e, out);
  if (wrap) out += ')';
}

inline void print(const Expression& e, std::string& out) {
  switch (e.op()) {
    case Op::Const: out += format_number(e.constant_value()); return;
    case Op::Var: out += e.variable_name(); return;
    case Op::Add:
    case Op::Sub:
      print(e.lhs(), out);
      out += e.op() == Op::Add ? " + " : " - ";
      print_wrapped(e.rhs(), out, precedence(e.rhs()) <= 1);
      return;
    case Op::Mul:
    case Op::Div:
      print_wrapped(e.lhs(), out, precedence(e.lhs()) < 2);
      out += e.op() == Op::Mul ? "*" : "/";
      print_wrapped(e.rhs(), out, precedence(e.rhs()) <= 2);
      return;
    case Op::Pow:
      print_wrapped(e.lhs(), out, precedence(e.lhs()) < 4);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    case Op::Neg:
      out += '-';
      print_wrapped(e.lhs(), out, precedence(e.lhs()) < 4);
      return;
    default:
      out += function_name(e.op());
      out += '(';
      print(e.lhs(), out);
      out += ')';
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expression& e) {
  std::string out;
  detail::print(e, out);
  return out;
}

}  // namespace affgeo
