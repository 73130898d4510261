#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscrn/error.hpp"
#include "mscrn/model.hpp"
#include "mscrn/parser.hpp"

using namespace mscrn;

namespace {

Model two_species(Exponent alpha_a, Exponent alpha_b, Complex reactants) {
  Model m;
  m.params.push_back({"k", 2.0});
  m.species.push_back({"A", alpha_a, std::nullopt});
  m.species.push_back({"B", alpha_b, std::nullopt});
  m.reactions.push_back({"r", std::move(reactants), {}, Exponent(0), MassAction{{RateConstant::of_param(0)}}, false});
  validate(m);
  return m;
}

}  // namespace

TEST_CASE("mass action on raw counts is kappa times the number of combinations") {
  auto m = two_species(Exponent(0), Exponent(0), {{0, 1}, {1, 1}});
  CHECK(evaluate_rate(m, 0, State{{2, 3}, false}) == 12.0);

  auto dimer = two_species(Exponent(0), Exponent(0), {{0, 2}});
  CHECK(evaluate_rate(dimer, 0, State{{1, 0}, false}) == 0.0);
  // 2! * C(4, 2) = 12
  CHECK(evaluate_rate(dimer, 0, State{{4, 0}, false}) == 24.0);
}

TEST_CASE("scaled mass action mixes monomials and combinatorial factors") {
  auto m = two_species(Exponent(1), Exponent(0), {{0, 1}, {1, 1}});
  CHECK(evaluate_rate(m, 0, State{{0.5, 4}, true}) == 4.0);

  auto sq = two_species(Exponent(1), Exponent(0), {{0, 2}, {1, 2}});
  // 2 * 0.5^2 * (4*3)
  CHECK(evaluate_rate(sq, 0, State{{0.5, 4}, true}) == doctest::Approx(6.0));
}

TEST_CASE("rate evaluation errors") {
  auto m = two_species(Exponent(0), Exponent(0), {{0, 1}});
  CHECK_THROWS_AS(evaluate_rate(m, 0, State{{1.0}, false}), ModelError);
  CHECK_THROWS_AS(evaluate_rate(m, 0, State{{1.0, 1.0}, false}, 0), ModelError);

  Model neg = parse_model("species A alpha=1\nreaction A -> @ 1 - A beta=0\n");
  CHECK_THROWS_AS(evaluate_rate(neg, 0, State{{2.0}, true}), RateEvaluationError);
}

TEST_CASE("stoichiometric matrices of the fixtures") {
  auto gene = load_model(MSCRN_FIXTURE_DIR "/gene.mscrn");
  auto z = stoichiometric_matrix(gene);
  std::vector<std::vector<int>> expected{{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, 1, -1}};
  CHECK(z.zeta == expected);

  auto ab = load_model(MSCRN_FIXTURE_DIR "/ab.mscrn");
  std::vector<std::vector<int>> expected_ab{{-1, 0, 0}, {-1, 1, -1}};
  CHECK(stoichiometric_matrix(ab).zeta == expected_ab);

  auto cat = parse_model("species A\nreaction A -> A @ mass_action(1) catalytic\n");
  auto zc = stoichiometric_matrix(cat);
  CHECK(zc.zeta[0][0] == 0);
  CHECK(zc.catalytic_only[0]);
  CHECK_THROWS_AS(parse_model("species A\nreaction A -> A @ mass_action(1)\n"), ValidationError);
}

TEST_CASE("species reaction sets") {
  auto gene = load_model(MSCRN_FIXTURE_DIR "/gene.mscrn");
  auto K = species_reaction_sets(gene);
  CHECK(K[0] == std::vector<int>{0, 1});
  CHECK(K[1] == std::vector<int>{0, 1});
  CHECK(K[2] == std::vector<int>{2, 3});

  auto ab = load_model(MSCRN_FIXTURE_DIR "/ab.mscrn");
  auto Kab = species_reaction_sets(ab);
  CHECK(Kab[0] == std::vector<int>{0});
  CHECK(Kab[1] == std::vector<int>{0, 1, 2});

  auto cat = parse_model("species A\nspecies B\nspecies C\nreaction A + B -> A + C @ mass_action(1)\n");
  auto Kc = species_reaction_sets(cat);
  CHECK(Kc[0].empty());
  CHECK(Kc[1] == std::vector<int>{0});
}

TEST_CASE("raw and scaled states convert") {
  auto m = two_species(Exponent(1), Exponent(0), {{0, 1}});
  auto raw = to_raw(m, State{{0.25, 3}, true}, 100.0);
  CHECK(raw.values == std::vector<double>{25, 3});
  auto back = to_scaled(m, raw, 100.0);
  CHECK(back.values == std::vector<double>{0.25, 3});
}
