#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mscrn/error.hpp"
#include "mscrn/parser.hpp"
#include "mscrn/pdmp.hpp"
#include "mscrn/random.hpp"

#include <algorithm>
#include <cmath>

using namespace mscrn;

namespace {

Model fixture(const std::string& name) { return load_model(std::string(MSCRN_FIXTURE_DIR) + "/" + name); }

/// Kolmogorov-Smirnov distance between a sample and a continuous cdf.
double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  double d = 0.0, n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f = cdf(xs[i]);
    d = std::max({d, std::fabs(f - static_cast<double>(i) / n), std::fabs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

double time_average(const Trajectory& t, std::size_t coord, double from) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < t.times.size(); ++j) {
    double a = std::max(t.times[j], from), b = t.times[j + 1];
    if (b > a) acc += (b - a) * t.states[j][coord];
  }
  return acc / (t.times.back() - from);
}

}  // namespace

TEST_CASE("pure flow matches the closed form") {
  HybridSystem sys;
  sys.labels = {"P"};
  sys.flows.push_back({"make", [](const std::vector<double>&) { return 2.0; }, {{0, 1.0}}});
  sys.flows.push_back({"decay", [](const std::vector<double>& v) { return v[0]; }, {{0, -1.0}}});
  PdmpConfig cfg;
  cfg.t_end = 1.0;
  cfg.grid = {0.0, 0.5, 1.0};
  auto t = simulate_pdmp(sys, {0.0}, cfg);
  REQUIRE(t.times.size() == 3);
  CHECK(t.states[1][0] == doctest::Approx(2 * (1 - std::exp(-0.5))).epsilon(1e-7));
  CHECK(t.states[2][0] == doctest::Approx(2 * (1 - std::exp(-1.0))).epsilon(1e-7));
}

TEST_CASE("constant-rate jumps have exponential waiting times") {
  HybridSystem sys;
  sys.labels = {"X"};
  sys.jumps.push_back({"tick", [](const std::vector<double>&) { return 3.0; }, {{0, 1}}});
  PdmpConfig cfg;
  cfg.t_end = 1e4 / 3.0;
  cfg.seed = 17;
  cfg.event_log = true;
  auto t = simulate_pdmp(sys, {0.0}, cfg);
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < t.event_times.size(); ++i) gaps.push_back(t.event_times[i + 1] - t.event_times[i]);
  REQUIRE(gaps.size() > 9000);
  double d = ks_distance(gaps, [](double x) { return 1 - std::exp(-3 * x); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(gaps.size())));
}

TEST_CASE("jumps driven by a flowing hazard are located accurately") {
  // Clock c' = 1 and jump rate c: the first jump time has survival exp(-t^2/2).
  HybridSystem sys;
  sys.labels = {"clock", "count"};
  sys.flows.push_back({"clock", [](const std::vector<double>&) { return 1.0; }, {{0, 1.0}}});
  sys.jumps.push_back({"fire", [](const std::vector<double>& v) { return v[0]; }, {{1, 1}}});
  std::vector<double> first;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    PdmpConfig cfg;
    cfg.t_end = 10;
    cfg.seed = stream_seed(5, r);
    cfg.event_log = true;
    auto t = simulate_pdmp(sys, {0.0, 0.0}, cfg);
    REQUIRE(!t.event_times.empty());
    first.push_back(t.event_times[0]);
    CHECK(t.states.back()[0] == doctest::Approx(10.0));
  }
  double d = ks_distance(first, [](double x) { return 1 - std::exp(-x * x / 2); });
  CHECK(d < 1.63 / std::sqrt(2000.0));
}

TEST_CASE("negative coordinates are reported") {
  HybridSystem sys;
  sys.labels = {"X"};
  sys.flows.push_back({"drain", [](const std::vector<double>&) { return 1.0; }, {{0, -1.0}}});
  PdmpConfig cfg;
  cfg.t_end = 2;
  CHECK_THROWS_AS(simulate_pdmp(sys, {1.0}, cfg), NegativeRate);
}

TEST_CASE("fast binding subsystem has Poisson stationary mean") {
  auto m = fixture("ab.mscrn");
  auto c = classify(m);
  // With vA = 1, B is born at rate 1 and dies at rate 2.
  PdmpConfig cfg;
  cfg.t_end = 4000;
  cfg.seed = 2;
  auto t = simulate_conditional_fast(m, c, {1.0, 0.0}, {0.0}, cfg);
  CHECK(t.labels == std::vector<std::string>{"B"});
  CHECK(time_average(t, 0, 100) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("fast switching conserves the number of gene copies exactly") {
  auto m = fixture("switch.mscrn");
  auto c = classify(m);
  auto b = conserved_basis(m, c);
  REQUIRE(b.vectors.size() == 1);
  PdmpConfig cfg;
  cfg.t_end = 200;
  cfg.seed = 4;
  cfg.event_log = true;
  auto t = simulate_conditional_fast(m, c, {0.0, 0.0, 0.7}, {1.0, 0.0}, cfg);
  CHECK(t.events > 100);
  for (const auto& st : t.states) CHECK(b.project(0, c.fast, {st[0], st[1], 0.0}) == 1.0);
}

TEST_CASE("continuous fast isomerization keeps the total within tolerance") {
  auto m = fixture("isomer.mscrn");
  auto c = classify(m);
  auto sys = fast_subsystem(m, c, {0.0, 0.0, 0.3});
  CHECK(sys.jumps.empty());
  CHECK(sys.flows.size() == 2);
  PdmpConfig cfg;
  cfg.t_end = 5;
  cfg.grid = uniform_grid(5, 10);
  auto t = simulate_pdmp(sys, {2.0, 0.0}, cfg);
  for (const auto& st : t.states) CHECK(st[0] + st[1] == doctest::Approx(2.0).epsilon(1e-9));
  // Equilibrium of A <-> B with rates 1 and 3.
  CHECK(t.states.back()[0] == doctest::Approx(1.5).epsilon(1e-5));
}
