#pragma once

// A small arithmetic expression language used for map components, Morse
// functions and symbol coefficients given in configuration files.
//
// Grammar (lowest to highest precedence):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right-associative)
//   primary := number | 'pi' | var | func '(' expr [',' expr] ')' | '(' expr ')'

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "msop/error.hpp"

namespace msop {
namespace expr {

enum class BinaryOp { add, sub, mul, div, pow };
enum class Func { sin, cos, exp, log, sqrt, atan2, abs };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Literal { double value; };
struct Variable { std::size_t index; };
struct PiConstant {};
struct Negate { NodePtr operand; };
struct Binary { BinaryOp op; NodePtr lhs; NodePtr rhs; };
struct Call { Func func; NodePtr arg0; NodePtr arg1; };

struct Node {
  std::variant<Literal, Variable, PiConstant, Negate, Binary, Call> data;
};

inline NodePtr make_literal(double v) { return std::make_shared<Node>(Node{Literal{v}}); }
inline NodePtr make_variable(std::size_t i) { return std::make_shared<Node>(Node{Variable{i}}); }
inline NodePtr make_pi() { return std::make_shared<Node>(Node{PiConstant{}}); }
inline NodePtr make_negate(NodePtr a) { return std::make_shared<Node>(Node{Negate{std::move(a)}}); }
inline NodePtr make_binary(BinaryOp op, NodePtr a, NodePtr b) {
  return std::make_shared<Node>(Node{Binary{op, std::move(a), std::move(b)}});
}
inline NodePtr make_call(Func f, NodePtr a, NodePtr b = nullptr) {
  return std::make_shared<Node>(Node{Call{f, std::move(a), std::move(b)}});
}

inline const char* func_name(Func f) {
  switch (f) {
    case Func::sin: return "sin";
    case Func::cos: return "cos";
    case Func::exp: return "exp";
    case Func::log: return "log";
    case Func::sqrt: return "sqrt";
    case Func::atan2: return "atan2";
    case Func::abs: return "abs";
  }
  return "?";
}

inline int func_arity(Func f) { return f == Func::atan2 ? 2 : 1; }

inline bool structurally_equal(const NodePtr& a, const NodePtr& b) {
  if (!a || !b) return a == b;
  if (a->data.index() != b->data.index()) return false;
  return std::visit(
      [&](const auto& na) -> bool {
        using T = std::decay_t<decltype(na)>;
        const auto& nb = std::get<T>(b->data);
        if constexpr (std::is_same_v<T, Literal>) {
          return na.value == nb.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return na.index == nb.index;
        } else if constexpr (std::is_same_v<T, PiConstant>) {
          return true;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return structurally_equal(na.operand, nb.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return na.op == nb.op && structurally_equal(na.lhs, nb.lhs) &&
                 structurally_equal(na.rhs, nb.rhs);
        } else {
          return na.func == nb.func && structurally_equal(na.arg0, nb.arg0) &&
                 structurally_equal(na.arg1, nb.arg1);
        }
      },
      a->data);
}

inline bool uses_variables(const NodePtr& n) {
  if (!n) return false;
  return std::visit(
      [](const auto& node) -> bool {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Variable>) {
          return true;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return uses_variables(node.operand);
        } else if constexpr (std::is_same_v<T, Binary>) {
          return uses_variables(node.lhs) || uses_variables(node.rhs);
        } else if constexpr (std::is_same_v<T, Call>) {
          return uses_variables(node.arg0) || uses_variables(node.arg1);
        } else {
          return false;
        }
      },
      n->data);
}

namespace detail {

inline double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

inline double eval_node(const Node& n, std::span<const double> vars) {
  return std::visit(
      [&](const auto& node) -> double {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return node.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          return vars[node.index];
        } else if constexpr (std::is_same_v<T, PiConstant>) {
          return std::numbers::pi;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return -eval_node(*node.operand, vars);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const double l = eval_node(*node.lhs, vars);
          const double r = eval_node(*node.rhs, vars);
          switch (node.op) {
            case BinaryOp::add: return checked(l + r, "addition");
            case BinaryOp::sub: return checked(l - r, "subtraction");
            case BinaryOp::mul: return checked(l * r, "multiplication");
            case BinaryOp::div:
              if (r == 0.0) throw DomainError("division by zero");
              return checked(l / r, "division");
            case BinaryOp::pow: return checked(std::pow(l, r), "power");
          }
          return 0.0;
        } else {
          const double x = eval_node(*node.arg0, vars);
          switch (node.func) {
            case Func::sin: return checked(std::sin(x), "sin");
            case Func::cos: return checked(std::cos(x), "cos");
            case Func::exp: return checked(std::exp(x), "exp");
            case Func::log:
              if (!(x > 0.0)) throw DomainError("log of nonpositive argument");
              return std::log(x);
            case Func::sqrt:
              if (x < 0.0) throw DomainError("sqrt of negative argument");
              return std::sqrt(x);
            case Func::atan2: return std::atan2(x, eval_node(*node.arg1, vars));
            case Func::abs: return std::abs(x);
          }
          return 0.0;
        }
      },
      n.data);
}

inline void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

inline void print_node(const Node& n, const std::vector<std::string>& names, std::string& out) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Literal>) {
          format_double(out, node.value);
        } else if constexpr (std::is_same_v<T, Variable>) {
          out += names.at(node.index);
        } else if constexpr (std::is_same_v<T, PiConstant>) {
          out += "pi";
        } else if constexpr (std::is_same_v<T, Negate>) {
          out += "(-";
          print_node(*node.operand, names, out);
          out += ")";
        } else if constexpr (std::is_same_v<T, Binary>) {
          static constexpr const char* ops[] = {" + ", " - ", " * ", " / ", " ^ "};
          out += "(";
          print_node(*node.lhs, names, out);
          out += ops[static_cast<int>(node.op)];
          print_node(*node.rhs, names, out);
          out += ")";
        } else {
          out += func_name(node.func);
          out += "(";
          print_node(*node.arg0, names, out);
          if (node.arg1) {
            out += ", ";
            print_node(*node.arg1, names, out);
          }
          out += ")";
        }
      },
      n.data);
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars) : text_(text), vars_(vars) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(BinaryOp::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(BinaryOp::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(BinaryOp::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(BinaryOp::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_negate(parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return make_binary(BinaryOp::pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    double value = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      throw ParseError("malformed number", start);
    }
    return make_literal(value);
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    static const std::map<std::string, Func, std::less<>> funcs = {
        {"sin", Func::sin},   {"cos", Func::cos},     {"exp", Func::exp}, {"log", Func::log},
        {"sqrt", Func::sqrt}, {"atan2", Func::atan2}, {"abs", Func::abs}};
    if (auto it = funcs.find(name); it != funcs.end()) {
      if (!accept('(')) throw ParseError("expected '(' after function " + name, pos_);
      NodePtr a0 = parse_expr();
      NodePtr a1;
      if (func_arity(it->second) == 2) {
        expect(',');
        a1 = parse_expr();
      }
      expect(')');
      return make_call(it->second, a0, a1);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == name) return make_variable(i);
    }
    if (name == "pi") return make_pi();
    throw UnknownIdentifierError(name, start);
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail
}  // namespace expr

/// Immutable parsed expression over a declared list of variables.
class Expr {
 public:
  Expr() = default;
  Expr(expr::NodePtr root, std::vector<std::string> vars)
      : root_(std::move(root)), vars_(std::move(vars)) {}

  static Expr parse(std::string_view text, std::vector<std::string> allowed_vars) {
    expr::detail::Parser p(text, allowed_vars);
    expr::NodePtr root = p.parse();
    return Expr(std::move(root), std::move(allowed_vars));
  }

  /// Evaluate with values given in declaration order of the variables.
  double eval(std::span<const double> values) const {
    if (values.size() < vars_.size()) throw Error("expression: missing variable bindings");
    return expr::detail::eval_node(*root_, values);
  }

  double eval(std::initializer_list<double> values) const {
    return eval(std::span<const double>(values.begin(), values.size()));
  }

  double eval(const std::map<std::string, double>& bindings) const {
    std::vector<double> values(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      auto it = bindings.find(vars_[i]);
      if (it == bindings.end()) throw Error("expression: unbound variable '" + vars_[i] + "'");
      values[i] = it->second;
    }
    return eval(values);
  }

  /// Fully parenthesized text that parses back to the same tree.
  std::string print() const {
    std::string out;
    expr::detail::print_node(*root_, vars_, out);
    return out;
  }

  bool structurally_equal(const Expr& other) const {
    return vars_ == other.vars_ && expr::structurally_equal(root_, other.root_);
  }

  /// True when the tree references no variable.
  bool is_constant() const { return !expr::uses_variables(root_); }
  const expr::NodePtr& root() const { return root_; }
  const std::vector<std::string>& variables() const { return vars_; }
  bool valid() const { return static_cast<bool>(root_); }

 private:
  expr::NodePtr root_;
  std::vector<std::string> vars_;
};

}  // namespace msop
