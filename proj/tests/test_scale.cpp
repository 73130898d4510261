#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscrn/error.hpp"
#include "mscrn/lattice.hpp"
#include "mscrn/parser.hpp"
#include "mscrn/scale.hpp"

#include <numeric>

using namespace mscrn;

namespace {

Model fixture(const std::string& name) { return load_model(std::string(MSCRN_FIXTURE_DIR) + "/" + name); }

std::int64_t content(const IntVector& v) {
  std::int64_t g = 0;
  for (auto x : v) g = std::gcd(g, x);
  return g;
}

void check_annihilates(const IntMatrix& a, const IntVector& theta) {
  for (std::size_t col = 0; col < (a.empty() ? 0 : a[0].size()); ++col) {
    std::int64_t s = 0;
    for (std::size_t r = 0; r < a.size(); ++r) s += theta[r] * a[r][col];
    CHECK(s == 0);
  }
}

}  // namespace

TEST_CASE("gene expression model is single scale") {
  auto c = classify(fixture("gene.mscrn"));
  CHECK(c.kind == ScaleKind::Single);
  CHECK(c.discrete == std::vector<int>{0, 1});
  CHECK(c.continuous == std::vector<int>{2});
  CHECK(c.k_star.all == std::vector<int>{0, 1, 2, 3});
  CHECK(c.k_star.discrete == std::vector<int>{0, 1});
  CHECK(c.k_star.continuous == std::vector<int>{2, 3});
  CHECK(c.zeta_star.rows == std::vector<int>{0, 1, 2});
  CHECK(c.zeta_star.values == IntMatrix{{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, 1, -1}});
  CHECK(c.dropped.empty());
}

TEST_CASE("binding model separates fast B from slow A") {
  auto c = classify(fixture("ab.mscrn"));
  CHECK(c.kind == ScaleKind::Two);
  CHECK(c.eps2 == Exponent(1));
  CHECK(c.fast == std::vector<int>{1});
  CHECK(c.slow == std::vector<int>{0});
  CHECK(c.k_fast.all == std::vector<int>{0, 1, 2});
  CHECK(c.k_slow.all == std::vector<int>{0});
  CHECK(c.zeta_fast.values == IntMatrix{{-1, 1, -1}});
  CHECK(c.zeta_slow.values == IntMatrix{{-1}});
  CHECK(conserved_basis(fixture("ab.mscrn"), c).empty());
}

TEST_CASE("three tiers are ordered by their gaps") {
  auto c = classify(fixture("three_tier.mscrn"));
  CHECK(c.kind == ScaleKind::Three);
  CHECK(c.eps1 == Exponent(1, 2));
  CHECK(c.eps2 == Exponent(1));
  CHECK(c.fast == std::vector<int>{0});
  CHECK(c.middle == std::vector<int>{1});
  CHECK(c.slow == std::vector<int>{2});
  CHECK(c.k_fast.all == std::vector<int>{0, 1});
  CHECK(c.k_middle.all == std::vector<int>{2, 3});
  CHECK(c.k_slow.all == std::vector<int>{4});
}

TEST_CASE("fast isomerization conserves the total") {
  auto m = fixture("isomer.mscrn");
  auto c = classify(m);
  REQUIRE(c.kind == ScaleKind::Two);
  CHECK(c.fast == std::vector<int>{0, 1});
  auto b = conserved_basis(m, c);
  REQUIRE(b.vectors.size() == 1);
  CHECK(b.vectors[0] == IntVector{1, 1});
  CHECK(b.alpha[0] == Exponent(1));
  CHECK(b.k_theta[0] == std::vector<int>{2, 3});
  CHECK(b.zeta_conserved.values == IntMatrix{{1, -1}});
  check_annihilates(c.zeta_fast.values, b.vectors[0]);
  CHECK(content(b.vectors[0]) == 1);
}

TEST_CASE("a slow reaction that moves a conserved total and a slow species is rejected") {
  auto m = parse_model(R"(
species A alpha=1
species B alpha=1
species C alpha=1
reaction A -> B @ mass_action(1) beta=2
reaction B -> A @ mass_action(1) beta=2
reaction B -> C @ mass_action(1) beta=1
)");
  CHECK_THROWS_AS(conserved_basis(m, classify(m)), OverlapError);
}

TEST_CASE("conserved quantities must not change faster than their own scale") {
  auto m = parse_model(R"(
species A alpha=1
species B alpha=1
species C alpha=1
reaction A -> B @ mass_action(1) beta=3
reaction B -> A @ mass_action(1) beta=3
reaction A -> @ mass_action(1) beta=2
reaction A -> A + C @ mass_action(1) beta=1
reaction C -> @ mass_action(1) beta=1
)");
  CHECK_THROWS_AS(conserved_basis(m, classify(m)), TimescaleViolation);
}

TEST_CASE("each conserved combination carries a single abundance exponent") {
  auto m = parse_model(R"(
species A alpha=1
species B alpha=1
species P alpha=2
species Q alpha=2
species C alpha=0
reaction A -> B @ mass_action(1) beta=2
reaction B -> A @ mass_action(1) beta=2
reaction P -> Q @ mass_action(1) beta=3
reaction Q -> P @ mass_action(1) beta=3
reaction -> C @ mass_action(1) beta=0
)");
  auto b = conserved_basis(m, classify(m));
  REQUIRE(b.vectors.size() == 2);
  CHECK(b.vectors[0] == IntVector{0, 0, 1, 1});
  CHECK(b.vectors[1] == IntVector{1, 1, 0, 0});
  CHECK(b.alpha[0] == Exponent(2));
  CHECK(b.alpha[1] == Exponent(1));
}

TEST_CASE("classification failures") {
  SUBCASE("negative gap") {
    auto m = parse_model("species A alpha=2\nreaction -> A @ mass_action(1) beta=1\n");
    CHECK_THROWS_AS(classify(m), UnclassifiableError);
  }
  SUBCASE("four scales") {
    auto m = parse_model(R"(
species A alpha=0
species B alpha=0
species C alpha=0
species D alpha=0
reaction -> A @ mass_action(1) beta=0
reaction -> B @ mass_action(1) beta=1
reaction -> C @ mass_action(1) beta=2
reaction -> D @ mass_action(1) beta=3
)");
    CHECK_THROWS_AS(classify(m), UnclassifiableError);
  }
  SUBCASE("species never changed is dropped with a warning") {
    auto m = parse_model("species A alpha=0\nspecies E alpha=0\nreaction E -> E + A @ mass_action(1) beta=0\n");
    auto c = classify(m);
    CHECK(c.dropped == std::vector<int>{1});
    CHECK(c.tier[1] == Tier::Dropped);
    CHECK(c.warnings.size() == 1);
  }
}

TEST_CASE("integer null space is primitive and deterministic") {
  IntMatrix a{{1, 2, 0}, {2, 4, 0}, {0, 0, 0}, {1, 0, 1}};
  auto basis = integer_left_null_space(a, 4);
  CHECK(basis.size() == 2);
  for (const auto& v : basis) {
    check_annihilates(a, v);
    CHECK(content(v) == 1);
  }
  CHECK(basis == integer_left_null_space(a, 4));
  CHECK(integer_left_null_space(IntMatrix{{-1, 1}, {1, -1}}, 2) == std::vector<IntVector>{{1, 1}});
  CHECK(integer_left_null_space(IntMatrix{{1, 0}, {0, 1}}, 2).empty());
}

TEST_CASE("spatial movement speed cases") {
  CHECK(spatial_case(Exponent(2), Exponent(3, 2)).tag == SpatialCaseTag::Case1);
  CHECK(spatial_case(Exponent(2), Exponent(1, 2)).tag == SpatialCaseTag::Case2);
  CHECK(spatial_case(Exponent(1, 2), Exponent(2)).tag == SpatialCaseTag::Case3);
  CHECK(spatial_case(Exponent(1, 3), Exponent(1, 2)).tag == SpatialCaseTag::Case4);
  CHECK_THROWS_AS(spatial_case(Exponent(1), Exponent(2)), DegenerateEtaError);

  CHECK(classify(fixture("spatial_case1.mscrn")).spatial_case->tag == SpatialCaseTag::Case1);
  CHECK(classify(fixture("spatial_case4.mscrn")).spatial_case->tag == SpatialCaseTag::Case4);
}

TEST_CASE("movement becomes unary reactions on the flat network") {
  auto m = fixture("spatial_case1.mscrn");
  auto flat = movement_as_reactions(m);
  CHECK(flat.species.size() == 4);
  CHECK(flat.species[0].name == "A@d1");
  CHECK(flat.species[3].name == "B@d2");
  CHECK(flat.reactions.size() == 6 + 4);
  const auto& mv = flat.reactions[6];
  CHECK(mv.beta == Exponent(3));
  CHECK(mv.reactants == Complex{{0, 1}});
  CHECK(mv.products == Complex{{1, 1}});
  CHECK(flat.kappa(1, 0) == 2.0);
}
