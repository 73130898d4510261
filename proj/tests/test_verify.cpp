#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscrn/error.hpp"
#include "mscrn/parser.hpp"
#include "mscrn/verify.hpp"

#include <json.hpp>

using namespace mscrn;

namespace {

Model fixture(const std::string& name) { return load_model(std::string(MSCRN_FIXTURE_DIR) + "/" + name); }

}  // namespace

TEST_CASE("trend verdict") {
  CHECK(error_trend({0.3}, {0.01}) == Trend::NotApplicable);
  CHECK(error_trend({0.3, 0.1, 0.01}, {0.01, 0.01, 0.01}) == Trend::Decreasing);
  // One small increase is tolerated, a second is not.
  CHECK(error_trend({0.3, 0.31, 0.01}, {0.01, 0.01, 0.01}) == Trend::Decreasing);
  CHECK(error_trend({0.3, 0.31, 0.32}, {0.01, 0.01, 0.01}) == Trend::NotDecreasing);
  CHECK(error_trend({0.1, 0.3}, {0.01, 0.01}) == Trend::NotDecreasing);
  // Errors indistinguishable from zero do not break the trend.
  CHECK(error_trend({0.3, 0.01, 0.015, 0.012}, {0.01, 0.01, 0.01, 0.01}) == Trend::Decreasing);
}

TEST_CASE("verify on the two-scale example") {
  VerifyOptions o;
  o.N = {10, 1000};
  o.replicas = 300;
  o.times = {0.5, 1.0};
  o.seed = 4;
  auto m = fixture("ab.mscrn");
  auto r = verify_convergence(m, o);
  CHECK(r.observables == std::vector<std::string>{"vA"});
  REQUIRE(r.error.size() == 2);
  CHECK(r.error[1] < r.error[0]);
  CHECK(r.error[1] < 0.05);
  for (double e : r.error) CHECK(e >= 0.0);
  CHECK(r.trend == Trend::Decreasing);

  auto again = verify_convergence(m, o);
  CHECK(again.error == r.error);
  CHECK(verify_json(again) == verify_json(r));

  auto j = nlohmann::json::parse(verify_json(r));
  CHECK(j["schema_version"] == VerifyReport::schema_version);
  CHECK(j["runs"].size() == 2);
  CHECK(j["trend"] == "decreasing");
  auto csv = verify_csv(r);
  CHECK(csv.rfind("N,observable,time,mean,variance,se,limit_mean,limit_se,normalized_error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);
}

TEST_CASE("single N has no trend") {
  VerifyOptions o;
  o.N = {50};
  o.replicas = 50;
  auto r = verify_convergence(fixture("ab.mscrn"), o);
  CHECK(r.trend == Trend::NotApplicable);
  CHECK_THROWS_AS(verify_convergence(fixture("ab.mscrn"), VerifyOptions{{}, 10}), ModelError);
}
