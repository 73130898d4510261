#pragma once

#include "mscrn/algebra.hpp"
#include "mscrn/error.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace mscrn {

/// Minimal arithmetic AST for rate laws: numbers, references to parameters
/// or species, + - * / and powers. No user-defined functions.
class Expression {
 public:
  enum class Op { Add, Sub, Mul, Div, Pow };

  struct Number {
    double value;
  };
  struct Ref {
    algebra::Symbol symbol;
  };
  struct Negate {
    std::shared_ptr<const Expression> operand;
  };
  struct Binary {
    Op op;
    std::shared_ptr<const Expression> lhs;
    std::shared_ptr<const Expression> rhs;
  };
  using Node = std::variant<Number, Ref, Negate, Binary>;

  explicit Expression(Node node) : node_(std::move(node)) {}

  static std::shared_ptr<const Expression> number(double v);
  static std::shared_ptr<const Expression> ref(const algebra::Symbol& s);
  static std::shared_ptr<const Expression> negate(std::shared_ptr<const Expression> e);
  static std::shared_ptr<const Expression> binary(Op op, std::shared_ptr<const Expression> a,
                                                  std::shared_ptr<const Expression> b);

  const Node& node() const { return node_; }

  double evaluate(const algebra::SymbolValues& values) const;

  /// Exact conversion when the expression is rational (integer powers only).
  std::optional<algebra::RationalFunction> to_rational() const;

  /// Fully parenthesised where needed; re-parses to a structurally equal AST.
  std::string to_string(const algebra::SymbolNamer& name) const;

  bool operator==(const Expression& o) const;

 private:
  Node node_;
};

using ExpressionPtr = std::shared_ptr<const Expression>;

/// Rebuilds `e` with every symbol replaced by `map(symbol)`.
ExpressionPtr map_symbols(const ExpressionPtr& e, const std::function<algebra::Symbol(const algebra::Symbol&)>& map);

/// Resolves identifiers during parsing; returns nullopt for unknown names.
using IdentifierResolver = std::function<std::optional<algebra::Symbol>(std::string_view)>;

/// Parses `text` (a single expression). `origin` is the span of the first
/// character so that errors point into the surrounding source.
ExpressionPtr parse_expression(std::string_view text, const IdentifierResolver& resolve, SourceSpan origin = {1, 1, 0});

}  // namespace mscrn
