#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mscrn::algebra {

/// A variable appearing in symbolic rate functions.
///
/// Parameters sort before species, so printed monomials read `k1*k2*vA`.
/// `Local` is a per-compartment species amount v_{i,d}; `Total` is the
/// compartment-summed amount s_i; `Conserved` is the j-th conserved total.
struct Symbol {
  enum class Kind : std::uint8_t { Param, Species, Local, Total, Conserved };
  Kind kind = Kind::Species;
  int index = 0;
  int compartment = -1;

  static Symbol param(int i) { return {Kind::Param, i, -1}; }
  static Symbol species(int i) { return {Kind::Species, i, -1}; }
  static Symbol local(int i, int d) { return {Kind::Local, i, d}; }
  static Symbol total(int i) { return {Kind::Total, i, -1}; }
  static Symbol conserved(int j) { return {Kind::Conserved, j, -1}; }

  auto operator<=>(const Symbol&) const = default;
};

using SymbolNamer = std::function<std::string(const Symbol&)>;
using SymbolValues = std::function<double(const Symbol&)>;

/// Sorted list of (symbol, positive power).
using Monomial = std::vector<std::pair<Symbol, int>>;

int total_degree(const Monomial& m);

/// Graded order: lower total degree first, then lexicographic.
struct MonomialOrder {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

/// Sparse multivariate polynomial with real coefficients.
class Polynomial {
 public:
  using Terms = std::map<Monomial, double, MonomialOrder>;

  Polynomial() = default;
  Polynomial(double constant);  // NOLINT(google-explicit-constructor)
  static Polynomial variable(const Symbol& s, int power = 1);

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  double constant_term() const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(const Polynomial& o);
  Polynomial& operator*=(double c);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, const Polynomial& b) { return a *= b; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  Polynomial pow(int n) const;

  bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }

  int degree_in(const Symbol& s) const;
  bool depends_on(const Symbol& s) const { return degree_in(s) > 0; }
  std::set<Symbol> symbols() const;

  /// Coefficients c_j with p = sum_j c_j * s^j.
  std::vector<Polynomial> collect(const Symbol& s) const;

  double evaluate(const SymbolValues& values) const;
  std::string to_string(const SymbolNamer& name) const;

  void add_term(Monomial m, double c);

 private:
  Terms terms_;
};

/// Quotient of two polynomials; no cancellation beyond constant folding.
class RationalFunction {
 public:
  RationalFunction() : num_(0.0), den_(1.0) {}
  RationalFunction(double c) : num_(c), den_(1.0) {}  // NOLINT
  RationalFunction(Polynomial p) : num_(std::move(p)), den_(1.0) {}  // NOLINT
  RationalFunction(Polynomial num, Polynomial den);

  const Polynomial& numerator() const { return num_; }
  const Polynomial& denominator() const { return den_; }
  bool is_polynomial() const { return den_.is_constant(); }
  bool is_zero() const { return num_.is_zero(); }

  RationalFunction& operator+=(const RationalFunction& o);
  RationalFunction& operator-=(const RationalFunction& o);
  RationalFunction& operator*=(const RationalFunction& o);
  RationalFunction& operator/=(const RationalFunction& o);
  friend RationalFunction operator+(RationalFunction a, const RationalFunction& b) { return a += b; }
  friend RationalFunction operator-(RationalFunction a, const RationalFunction& b) { return a -= b; }
  friend RationalFunction operator*(RationalFunction a, const RationalFunction& b) { return a *= b; }
  friend RationalFunction operator/(RationalFunction a, const RationalFunction& b) { return a /= b; }
  friend RationalFunction operator-(RationalFunction a) { return a *= RationalFunction(-1.0); }
  RationalFunction pow(int n) const;

  bool operator==(const RationalFunction& o) const { return num_ == o.num_ && den_ == o.den_; }

  bool depends_on(const Symbol& s) const { return num_.depends_on(s) || den_.depends_on(s); }
  std::set<Symbol> symbols() const;

  /// Replaces every occurrence of `s` by `value`.
  RationalFunction substitute(const Symbol& s, const RationalFunction& value) const;
  /// Replaces symbols for which `value_of` returns a number.
  RationalFunction bind(const std::function<std::optional<double>(const Symbol&)>& value_of) const;

  double evaluate(const SymbolValues& values) const;
  std::string to_string(const SymbolNamer& name) const;

 private:
  void normalize();
  Polynomial num_;
  Polynomial den_;
};

/// Falling factorial x (x-1) ... (x-n+1) as a polynomial in `s`.
Polynomial falling_factorial(const Symbol& s, int n);

/// Stirling number of the second kind S(n, k).
double stirling2(int n, int k);

/// Expectation of a rational function whose denominator is free of the
/// averaged symbols, under independent per-symbol moment rules.
/// `factorial_moment(s, j)` must return E[(s)_j] for symbols in `averaged`.
std::optional<RationalFunction> expect_polynomial(
    const RationalFunction& f, const std::set<Symbol>& averaged,
    const std::function<RationalFunction(const Symbol&, int)>& factorial_moment);

/// Fast numeric evaluator: symbols are mapped to slots of a value array.
class CompiledFunction {
 public:
  CompiledFunction() = default;
  CompiledFunction(const RationalFunction& f, const std::function<int(const Symbol&)>& slot_of,
                   const SymbolValues& constants);

  double operator()(std::span<const double> slots) const;

 private:
  struct Term {
    double coef;
    std::vector<std::pair<int, int>> factors;  // (slot, power)
  };
  static double eval(const std::vector<Term>& terms, std::span<const double> slots);
  std::vector<Term> num_;
  std::vector<Term> den_;
};

}  // namespace mscrn::algebra
