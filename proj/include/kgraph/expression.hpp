#pragma once

// Small arithmetic expression language for boundary data, prescribed mean
// curvature and fiber functions in run configs.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names: x, y, r = sqrt(x^2 + y^2), pi, e.
// Functions: sin cos tan exp sqrt ln log abs.

#include "kgraph/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace kgraph {

class Expression {
public:
  Expression() : Expression(std::string("0")) {}

  explicit Expression(std::string source) : source_(std::move(source)) {
    Parser p{source_, 0};
    root_ = p.parse_expr();
    p.skip_ws();
    if (p.pos != source_.size())
      throw FormatError("expression '" + source_ + "': unexpected '" +
                        std::string(1, source_[p.pos]) + "' at column " +
                        std::to_string(p.pos + 1));
  }

  double operator()(double x, double y) const { return root_->eval(x, y); }

  const std::string& source() const { return source_; }

  // True if the expression references neither x, y nor r.
  bool is_constant() const { return !root_->depends_on_position(); }

private:
  struct Node {
    virtual ~Node() = default;
    virtual double eval(double x, double y) const = 0;
    virtual bool depends_on_position() const = 0;
  };
  using NodePtr = std::shared_ptr<const Node>;

  struct Number final : Node {
    double value;
    explicit Number(double v) : value(v) {}
    double eval(double, double) const override { return value; }
    bool depends_on_position() const override { return false; }
  };

  struct Variable final : Node {
    char which;
    explicit Variable(char w) : which(w) {}
    double eval(double x, double y) const override {
      switch (which) {
      case 'x': return x;
      case 'y': return y;
      default: return std::hypot(x, y);
      }
    }
    bool depends_on_position() const override { return true; }
  };

  struct Unary final : Node {
    std::function<double(double)> fn;
    NodePtr arg;
    Unary(std::function<double(double)> f, NodePtr a) : fn(std::move(f)), arg(std::move(a)) {}
    double eval(double x, double y) const override { return fn(arg->eval(x, y)); }
    bool depends_on_position() const override { return arg->depends_on_position(); }
  };

  struct Binary final : Node {
    char op;
    NodePtr lhs, rhs;
    Binary(char o, NodePtr l, NodePtr r) : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
    double eval(double x, double y) const override {
      const double a = lhs->eval(x, y);
      const double b = rhs->eval(x, y);
      switch (op) {
      case '+': return a + b;
      case '-': return a - b;
      case '*': return a * b;
      case '/': return a / b;
      default: return std::pow(a, b);
      }
    }
    bool depends_on_position() const override {
      return lhs->depends_on_position() || rhs->depends_on_position();
    }
  };

  struct Parser {
    std::string_view src;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw FormatError("expression '" + std::string(src) + "': " + what + " at column " +
                        std::to_string(pos + 1));
    }

    void skip_ws() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos])))
        ++pos;
    }

    bool accept(char c) {
      skip_ws();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    NodePtr parse_expr() {
      NodePtr lhs = parse_term();
      for (;;) {
        if (accept('+'))
          lhs = std::make_shared<Binary>('+', lhs, parse_term());
        else if (accept('-'))
          lhs = std::make_shared<Binary>('-', lhs, parse_term());
        else
          return lhs;
      }
    }

    NodePtr parse_term() {
      NodePtr lhs = parse_unary();
      for (;;) {
        if (accept('*'))
          lhs = std::make_shared<Binary>('*', lhs, parse_unary());
        else if (accept('/'))
          lhs = std::make_shared<Binary>('/', lhs, parse_unary());
        else
          return lhs;
      }
    }

    NodePtr parse_unary() {
      if (accept('-'))
        return std::make_shared<Unary>([](double v) { return -v; }, parse_unary());
      if (accept('+'))
        return parse_unary();
      return parse_power();
    }

    NodePtr parse_power() {
      NodePtr base = parse_primary();
      if (accept('^'))
        return std::make_shared<Binary>('^', base, parse_unary());
      return base;
    }

    NodePtr parse_primary() {
      skip_ws();
      if (pos >= src.size())
        fail("unexpected end of input");
      const char c = src[pos];
      if (accept('(')) {
        NodePtr inner = parse_expr();
        if (!accept(')'))
          fail("expected ')'");
        return inner;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        double value = 0.0;
        auto [end, ec] = std::from_chars(src.data() + pos, src.data() + src.size(), value);
        if (ec != std::errc())
          fail("bad number");
        pos = static_cast<std::size_t>(end - src.data());
        return std::make_shared<Number>(value);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
          ++pos;
        const std::string name(src.substr(start, pos - start));
        skip_ws();
        if (pos < src.size() && src[pos] == '(') {
          ++pos;
          NodePtr arg = parse_expr();
          if (!accept(')'))
            fail("expected ')' after argument of " + name);
          return std::make_shared<Unary>(function(name), arg);
        }
        if (name == "x" || name == "y" || name == "r")
          return std::make_shared<Variable>(name[0]);
        if (name == "pi")
          return std::make_shared<Number>(std::numbers::pi);
        if (name == "e")
          return std::make_shared<Number>(std::numbers::e);
        pos = start;
        fail("unknown name '" + name + "'");
      }
      fail(std::string("unexpected '") + c + "'");
    }

    std::function<double(double)> function(const std::string& name) const {
      if (name == "sin") return [](double v) { return std::sin(v); };
      if (name == "cos") return [](double v) { return std::cos(v); };
      if (name == "tan") return [](double v) { return std::tan(v); };
      if (name == "exp") return [](double v) { return std::exp(v); };
      if (name == "sqrt") return [](double v) { return std::sqrt(v); };
      if (name == "ln" || name == "log") return [](double v) { return std::log(v); };
      if (name == "abs") return [](double v) { return std::abs(v); };
      fail("unknown function '" + name + "'");
    }
  };

  std::string source_;
  NodePtr root_;
};

} // namespace kgraph
