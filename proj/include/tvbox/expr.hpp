#pragma once

// Minimal expression grammar for analytic bounds and targets:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-'|'+') factor | primary ('^' factor)?
//   primary:= number | 'x1' | 'x2' | 'pi' | 'sin' '(' expr ')'
//           | 'cos' '(' expr ')' | '(' expr ')'
// Covers bound formulas like "8*sin(pi*x1)*sin(pi*x2)" and polynomials.

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "tvbox/errors.hpp"

namespace tvbox {

class Expression {
 public:
  double eval(double x1, double x2) const { return eval_node(root_, x1, x2); }
  const std::string& text() const { return text_; }

  static Expression parse(const std::string& text) {
    Expression e;
    e.text_ = text;
    Parser p{text, 0};
    e.root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size())
      throw config_error("expression: trailing input at position " +
                         std::to_string(p.pos) + " in '" + text + "'");
    return e;
  }

 private:
  enum class Op { Const, X1, X2, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos };
  struct Node {
    Op op;
    double value = 0.0;
    std::unique_ptr<Node> a, b;
  };
  using NodePtr = std::unique_ptr<Node>;

  static double eval_node(const NodePtr& n, double x1, double x2) {
    switch (n->op) {
      case Op::Const: return n->value;
      case Op::X1: return x1;
      case Op::X2: return x2;
      case Op::Add: return eval_node(n->a, x1, x2) + eval_node(n->b, x1, x2);
      case Op::Sub: return eval_node(n->a, x1, x2) - eval_node(n->b, x1, x2);
      case Op::Mul: return eval_node(n->a, x1, x2) * eval_node(n->b, x1, x2);
      case Op::Div: return eval_node(n->a, x1, x2) / eval_node(n->b, x1, x2);
      case Op::Pow: return std::pow(eval_node(n->a, x1, x2), eval_node(n->b, x1, x2));
      case Op::Neg: return -eval_node(n->a, x1, x2);
      case Op::Sin: return std::sin(eval_node(n->a, x1, x2));
      case Op::Cos: return std::cos(eval_node(n->a, x1, x2));
    }
    return 0.0;
  }

  struct Parser {
    const std::string& s;
    size_t pos;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) { ++pos; return true; }
      return false;
    }
    bool match_word(const char* w) {
      skip_ws();
      const size_t len = std::string(w).size();
      if (s.compare(pos, len, w) != 0) return false;
      const size_t end = pos + len;
      if (end < s.size() &&
          (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_'))
        return false;
      pos = end;
      return true;
    }
    [[noreturn]] void fail(const std::string& what) {
      throw config_error("expression: " + what + " at position " +
                         std::to_string(pos) + " in '" + s + "'");
    }

    NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
      auto n = std::make_unique<Node>();
      n->op = op;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }

    NodePtr parse_expr() {
      NodePtr n = parse_term();
      for (;;) {
        if (eat('+')) n = make(Op::Add, std::move(n), parse_term());
        else if (eat('-')) n = make(Op::Sub, std::move(n), parse_term());
        else return n;
      }
    }
    NodePtr parse_term() {
      NodePtr n = parse_factor();
      for (;;) {
        if (eat('*')) n = make(Op::Mul, std::move(n), parse_factor());
        else if (eat('/')) n = make(Op::Div, std::move(n), parse_factor());
        else return n;
      }
    }
    NodePtr parse_factor() {
      if (eat('-')) return make(Op::Neg, parse_factor());
      if (eat('+')) return parse_factor();
      NodePtr base = parse_primary();
      if (eat('^')) return make(Op::Pow, std::move(base), parse_factor());
      return base;
    }
    NodePtr parse_primary() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end of input");
      if (match_word("x1")) return make(Op::X1);
      if (match_word("x2")) return make(Op::X2);
      if (match_word("pi")) {
        auto n = make(Op::Const);
        n->value = 3.14159265358979323846;
        return n;
      }
      if (match_word("sin")) {
        if (!eat('(')) fail("expected '(' after sin");
        NodePtr a = parse_expr();
        if (!eat(')')) fail("expected ')'");
        return make(Op::Sin, std::move(a));
      }
      if (match_word("cos")) {
        if (!eat('(')) fail("expected '(' after cos");
        NodePtr a = parse_expr();
        if (!eat(')')) fail("expected ')'");
        return make(Op::Cos, std::move(a));
      }
      if (eat('(')) {
        NodePtr a = parse_expr();
        if (!eat(')')) fail("expected ')'");
        return a;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        size_t end = pos;
        while (end < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.' ||
                s[end] == 'e' || s[end] == 'E' ||
                ((s[end] == '+' || s[end] == '-') && end > pos &&
                 (s[end - 1] == 'e' || s[end - 1] == 'E'))))
          ++end;
        auto n = make(Op::Const);
        try {
          size_t used = 0;
          n->value = std::stod(s.substr(pos, end - pos), &used);
          if (used != end - pos) fail("malformed number");
        } catch (const std::exception&) {
          fail("malformed number");
        }
        pos = end;
        return n;
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  NodePtr root_;
  std::string text_;
};

}  // namespace tvbox
