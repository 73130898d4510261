#include "mscrn/expression.hpp"

#include "mscrn/format.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace mscrn {

using algebra::RationalFunction;

ExpressionPtr Expression::number(double v) { return std::make_shared<const Expression>(Number{v}); }
ExpressionPtr Expression::ref(const algebra::Symbol& s) { return std::make_shared<const Expression>(Ref{s}); }
ExpressionPtr Expression::negate(ExpressionPtr e) { return std::make_shared<const Expression>(Negate{std::move(e)}); }
ExpressionPtr Expression::binary(Op op, ExpressionPtr a, ExpressionPtr b) {
  return std::make_shared<const Expression>(Binary{op, std::move(a), std::move(b)});
}

double Expression::evaluate(const algebra::SymbolValues& values) const {
  struct Visitor {
    const algebra::SymbolValues& values;
    double operator()(const Number& n) const { return n.value; }
    double operator()(const Ref& r) const { return values(r.symbol); }
    double operator()(const Negate& n) const { return -n.operand->evaluate(values); }
    double operator()(const Binary& b) const {
      double x = b.lhs->evaluate(values);
      double y = b.rhs->evaluate(values);
      switch (b.op) {
        case Op::Add: return x + y;
        case Op::Sub: return x - y;
        case Op::Mul: return x * y;
        case Op::Div: return x / y;
        case Op::Pow: return std::pow(x, y);
      }
      return 0.0;
    }
  };
  return std::visit(Visitor{values}, node_);
}

std::optional<RationalFunction> Expression::to_rational() const {
  struct Visitor {
    std::optional<RationalFunction> operator()(const Number& n) const { return RationalFunction(n.value); }
    std::optional<RationalFunction> operator()(const Ref& r) const {
      return RationalFunction(algebra::Polynomial::variable(r.symbol));
    }
    std::optional<RationalFunction> operator()(const Negate& n) const {
      auto v = n.operand->to_rational();
      if (!v) return std::nullopt;
      return -*v;
    }
    std::optional<RationalFunction> operator()(const Binary& b) const {
      auto x = b.lhs->to_rational();
      auto y = b.rhs->to_rational();
      if (!x || !y) return std::nullopt;
      switch (b.op) {
        case Op::Add: return *x + *y;
        case Op::Sub: return *x - *y;
        case Op::Mul: return *x * *y;
        case Op::Div:
          if (y->is_zero()) return std::nullopt;
          return *x / *y;
        case Op::Pow: {
          if (!y->is_polynomial() || !y->numerator().is_constant()) return std::nullopt;
          double e = y->numerator().constant_term();
          if (e != std::round(e) || std::fabs(e) > 64) return std::nullopt;
          return x->pow(static_cast<int>(e));
        }
      }
      return std::nullopt;
    }
  };
  return std::visit(Visitor{}, node_);
}

namespace {

int precedence(const Expression& e) {
  if (std::holds_alternative<Expression::Binary>(e.node())) {
    switch (std::get<Expression::Binary>(e.node()).op) {
      case Expression::Op::Add:
      case Expression::Op::Sub: return 1;
      case Expression::Op::Mul:
      case Expression::Op::Div: return 2;
      case Expression::Op::Pow: return 4;
    }
  }
  if (std::holds_alternative<Expression::Negate>(e.node())) return 3;
  return 5;
}

}  // namespace

std::string Expression::to_string(const algebra::SymbolNamer& name) const {
  struct Visitor {
    const algebra::SymbolNamer& name;
    const Expression& self;
    std::string wrap(const Expression& e, int min_prec) const {
      std::string s = e.to_string(name);
      return precedence(e) < min_prec ? "(" + s + ")" : s;
    }
    std::string operator()(const Number& n) const {
      std::string s = format_number(n.value);
      return n.value < 0 ? "(" + s + ")" : s;
    }
    std::string operator()(const Ref& r) const { return name(r.symbol); }
    std::string operator()(const Negate& n) const { return "-" + wrap(*n.operand, 4); }
    std::string operator()(const Binary& b) const {
      switch (b.op) {
        case Op::Add: return wrap(*b.lhs, 1) + "+" + wrap(*b.rhs, 2);
        case Op::Sub: return wrap(*b.lhs, 1) + "-" + wrap(*b.rhs, 2);
        case Op::Mul: return wrap(*b.lhs, 2) + "*" + wrap(*b.rhs, 3);
        case Op::Div: return wrap(*b.lhs, 2) + "/" + wrap(*b.rhs, 3);
        case Op::Pow: return wrap(*b.lhs, 5) + "^" + wrap(*b.rhs, 4);
      }
      return {};
    }
  };
  return std::visit(Visitor{name, *this}, node_);
}

bool Expression::operator==(const Expression& o) const {
  if (node_.index() != o.node_.index()) return false;
  struct Visitor {
    const Node& other;
    bool operator()(const Number& n) const { return n.value == std::get<Number>(other).value; }
    bool operator()(const Ref& r) const { return r.symbol == std::get<Ref>(other).symbol; }
    bool operator()(const Negate& n) const { return *n.operand == *std::get<Negate>(other).operand; }
    bool operator()(const Binary& b) const {
      const auto& ob = std::get<Binary>(other);
      return b.op == ob.op && *b.lhs == *ob.lhs && *b.rhs == *ob.rhs;
    }
  };
  return std::visit(Visitor{o.node_}, node_);
}

namespace {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, const IdentifierResolver& resolve, SourceSpan origin)
      : text_(text), resolve_(resolve), origin_(origin) {}

  ExpressionPtr parse() {
    skip_ws();
    if (pos_ >= text_.size()) fail("empty expression", 1);
    auto e = parse_sum();
    skip_ws();
    if (pos_ < text_.size()) fail(std::string("unexpected '") + text_[pos_] + "'", 1);
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message, std::size_t length) const {
    throw ParseError(message, SourceSpan{origin_.line, origin_.column + pos_, length});
  }

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

  ExpressionPtr parse_sum() {
    auto lhs = parse_product();
    for (;;) {
      if (accept('+'))
        lhs = Expression::binary(Expression::Op::Add, lhs, parse_product());
      else if (accept('-'))
        lhs = Expression::binary(Expression::Op::Sub, lhs, parse_product());
      else
        return lhs;
    }
  }

  ExpressionPtr parse_product() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = Expression::binary(Expression::Op::Mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = Expression::binary(Expression::Op::Div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  ExpressionPtr parse_unary() {
    if (accept('-')) return Expression::negate(parse_unary());
    return parse_power();
  }

  ExpressionPtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return Expression::binary(Expression::Op::Pow, base, parse_unary());
    return base;
  }

  ExpressionPtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected operand", 1);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = parse_sum();
      if (!accept(')')) fail("expected ')'", 1);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                                     text_[pos_] == 'e' || text_[pos_] == 'E' ||
                                     ((text_[pos_] == '-' || text_[pos_] == '+') &&
                                      (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
        ++pos_;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
      if (ec != std::errc{} || ptr != text_.data() + pos_) {
        pos_ = start;
        fail("malformed number", 1);
      }
      return Expression::number(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                                     text_[pos_] == '\''))
        ++pos_;
      auto id = text_.substr(start, pos_ - start);
      auto sym = resolve_(id);
      if (!sym) {
        std::size_t end = pos_;
        pos_ = start;
        throw ParseError("unknown identifier '" + std::string(id) + "'",
                         SourceSpan{origin_.line, origin_.column + start, end - start});
      }
      return Expression::ref(*sym);
    }
    fail(std::string("unexpected '") + c + "'", 1);
  }

  std::string_view text_;
  const IdentifierResolver& resolve_;
  SourceSpan origin_;
  std::size_t pos_ = 0;
};

}  // namespace

ExpressionPtr map_symbols(const ExpressionPtr& e, const std::function<algebra::Symbol(const algebra::Symbol&)>& map) {
  const auto& node = e->node();
  if (const auto* r = std::get_if<Expression::Ref>(&node)) return Expression::ref(map(r->symbol));
  if (const auto* n = std::get_if<Expression::Negate>(&node)) return Expression::negate(map_symbols(n->operand, map));
  if (const auto* b = std::get_if<Expression::Binary>(&node))
    return Expression::binary(b->op, map_symbols(b->lhs, map), map_symbols(b->rhs, map));
  return e;
}

ExpressionPtr parse_expression(std::string_view text, const IdentifierResolver& resolve, SourceSpan origin) {
  return ExpressionParser(text, resolve, origin).parse();
}

}  // namespace mscrn
