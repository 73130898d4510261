#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscrn/error.hpp"
#include "mscrn/parser.hpp"

#include <filesystem>

using namespace mscrn;

TEST_CASE("gene fixture") {
  auto m = load_model(MSCRN_FIXTURE_DIR "/gene.mscrn");
  REQUIRE(m.num_species() == 3);
  REQUIRE(m.num_reactions() == 4);
  CHECK(m.species[0].alpha == Exponent(0));
  CHECK(m.species[1].name == "G'");
  CHECK(m.species[2].alpha == Exponent(1));
  std::vector<Exponent> beta;
  for (const auto& r : m.reactions) beta.push_back(r.beta);
  CHECK(beta == std::vector<Exponent>{Exponent(0), Exponent(0), Exponent(1), Exponent(1)});
  CHECK(m.kappa(2, 0) == 2.0);
  CHECK_FALSE(m.spatial());
}

TEST_CASE("A+B fixture") {
  auto m = load_model(MSCRN_FIXTURE_DIR "/ab.mscrn");
  CHECK(m.num_species() == 2);
  CHECK(m.num_reactions() == 3);
  CHECK(m.reactions[1].reactants.empty());
  CHECK(m.reactions[0].products.empty());
}

TEST_CASE("every fixture round-trips") {
  for (const auto& entry : std::filesystem::directory_iterator(MSCRN_FIXTURE_DIR)) {
    if (entry.path().extension() != ".mscrn") continue;
    CAPTURE(entry.path().string());
    auto m = load_model(entry.path().string());
    auto text = serialize_model(m);
    auto again = parse_model(text);
    CHECK(again == m);
    CHECK(serialize_model(again) == text);
  }
}

TEST_CASE("rational exponents survive a round trip") {
  auto m = parse_model("species A alpha=3/2 eta=0.25\nreaction A -> @ mass_action(1) beta=3/2\n");
  CHECK(m.species[0].alpha == Exponent(3, 2));
  CHECK(*m.species[0].eta == Exponent(1, 4));
  auto again = parse_model(serialize_model(m));
  CHECK(again.reactions[0].beta == Exponent(3, 2));
  CHECK(again == m);
}

TEST_CASE("spatial syntax") {
  const char* text = R"(
param k1 = 1
species A alpha=1 eta=1/2
species B alpha=0 eta=1/2
compartments d1 d2
reaction bind: A + B -> @ mass_action(d1=k1, d2=0.5) beta=1
reaction make: -> B @ {d1: 2, d2: k1*A} beta=1
move A from d1 to d2 rate 1
move A from d2 to d1 rate 2
move B from d1 to d2 rate 1
move B from d2 to d1 rate 1
init A@d1 = 0.5
)";
  auto m = parse_model(text);
  CHECK(m.compartments.size() == 2);
  CHECK(m.movements.size() == 4);
  CHECK(m.kappa(0, 1) == 0.5);
  CHECK(m.kappa(0, 0) == 1.0);
  CHECK(m.initial_scaled() == std::vector<double>{0.5, 0, 0, 0});
  auto out = serialize_model(m);
  CHECK(out.find("move B from d2 to d1 rate 1") != std::string::npos);
  CHECK(parse_model(out) == m);
}

TEST_CASE("diagnostics") {
  CHECK_THROWS_AS(parse_model("param k = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_model("species A\nspecies A\n"), ValidationError);
  CHECK_THROWS_AS(parse_model("species A\nreaction A -> C @ mass_action(1)\n"), ValidationError);
  CHECK_THROWS_AS(parse_model("species A\nreaction A -> @ mass_action(-1)\n"), ValidationError);
  CHECK_THROWS_AS(parse_model("species A\nreaction A -> @ k*A\n"), ValidationError);
  CHECK_THROWS_AS(parse_model("species A\ncompartments x y\nmove A from x to y rate -1\n"), ValidationError);

  try {
    parse_model("species A\nreaction A => @ mass_action(1)\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.span().line == 2);
  }
  try {
    parse_model("species A alpha=x\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.span().line == 1);
    CHECK(e.span().column == 17);
  }
  try {
    parse_model("species A\nreaction A -> @ mass_action(1) + * 2\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.span().line == 2);
  }
  try {
    parse_model("species A\nfrobnicate\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.span().column == 1);
    CHECK(e.span().length == 10);
  }
}
