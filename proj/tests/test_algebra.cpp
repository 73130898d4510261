#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscrn/algebra.hpp"
#include "mscrn/exponent.hpp"
#include "mscrn/expression.hpp"
#include "mscrn/format.hpp"

using namespace mscrn;
using namespace mscrn::algebra;

namespace {

std::string name_of(const Symbol& s) {
  if (s.kind == Symbol::Kind::Param) return "k" + std::to_string(s.index + 1);
  return std::string("v") + static_cast<char>('A' + s.index);
}

}  // namespace

TEST_CASE("exponents parse exactly") {
  CHECK(*parse_exponent("3/2") == Exponent(3, 2));
  CHECK(*parse_exponent("0.5") == Exponent(1, 2));
  CHECK(*parse_exponent("-0.25") == Exponent(-1, 4));
  CHECK(*parse_exponent("2") == Exponent(2));
  CHECK_FALSE(parse_exponent("1/0"));
  CHECK_FALSE(parse_exponent("abc"));
  CHECK(format_exponent(Exponent(6, 4)) == "3/2");
  // 0.1 + 0.2 compares exactly equal to 0.3 in rationals
  CHECK(*parse_exponent("0.1") + *parse_exponent("0.2") == *parse_exponent("0.3"));
}

TEST_CASE("numbers format as shortest round trip") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(0.1) == "0.1");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("rational function prints reduced rate") {
  auto k1 = Polynomial::variable(Symbol::param(0));
  auto k2 = Polynomial::variable(Symbol::param(1));
  auto k3 = Polynomial::variable(Symbol::param(2));
  auto vA = Polynomial::variable(Symbol::species(0));
  RationalFunction f(k1 * k2 * vA, k3 + k1 * vA);
  CHECK(f.to_string(name_of) == "k1*k2*vA/(k3+k1*vA)");
  CHECK(RationalFunction(k1 - k2 * vA).to_string(name_of) == "k1-k2*vA");
}

TEST_CASE("expectation of a polynomial under Poisson factorial moments") {
  // E[x^2] for x ~ Poi(m) is m + m^2
  Symbol x = Symbol::species(1);
  RationalFunction f(Polynomial::variable(x, 2));
  auto m = Polynomial::variable(Symbol::param(0));
  auto e = expect_polynomial(f, {x}, [&](const Symbol&, int j) { return RationalFunction(m.pow(j)); });
  REQUIRE(e);
  double mean = 1.7;
  CHECK(e->evaluate([&](const Symbol&) { return mean; }) == doctest::Approx(mean + mean * mean));
}

TEST_CASE("substitution and compilation agree with direct evaluation") {
  Symbol a = Symbol::species(0), b = Symbol::species(1);
  RationalFunction f(Polynomial::variable(a) * Polynomial::variable(b), Polynomial(1.0) + Polynomial::variable(a));
  auto g = f.substitute(b, RationalFunction(Polynomial::variable(a, 2)));
  auto values = [](const Symbol& s) { return s.index == 0 ? 3.0 : 0.0; };
  CHECK(g.evaluate(values) == doctest::Approx(27.0 / 4.0));
  CompiledFunction c(f, [](const Symbol& s) { return s.index; }, values);
  std::vector<double> slots{3.0, 2.0};
  CHECK(c(slots) == doctest::Approx(6.0 / 4.0));
}

TEST_CASE("expression parse, print and convert") {
  auto resolve = [](std::string_view id) -> std::optional<Symbol> {
    if (id == "k1") return Symbol::param(0);
    if (id == "A") return Symbol::species(0);
    return std::nullopt;
  };
  auto e = parse_expression("k1*A/(1+A)^2 - -A", resolve);
  auto text = e->to_string([](const Symbol& s) { return s.kind == Symbol::Kind::Param ? "k1" : "A"; });
  auto again = parse_expression(text, resolve);
  CHECK(*e == *again);
  auto values = [](const Symbol& s) { return s.kind == Symbol::Kind::Param ? 2.0 : 1.0; };
  CHECK(e->evaluate(values) == doctest::Approx(2.0 / 4.0 + 1.0));
  CHECK(e->to_rational()->evaluate(values) == doctest::Approx(1.5));
  CHECK_FALSE(parse_expression("A^0.5", resolve)->to_rational());
  CHECK_THROWS_AS(parse_expression("k1 * B", resolve), ParseError);
  try {
    parse_expression("k1 + * A", resolve);
  } catch (const ParseError& err) {
    CHECK(err.span().column == 6);
  }
}
