#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  std::string cmd = std::string(MSCRN_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string fx(const std::string& name) { return std::string(MSCRN_FIXTURE_DIR) + "/" + name; }

}  // namespace

TEST_CASE("analyze reports the classification") {
  auto r = run("analyze " + fx("gene.mscrn"));
  REQUIRE(r.status == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["scales"] == "single");
  CHECK(j["species"]["discrete"] == nlohmann::json::array({"G", "G'"}));
  CHECK(j["k_star"]["discrete"] == nlohmann::json::array({"r1", "r2"}));

  auto ab = nlohmann::json::parse(run("analyze " + fx("ab.mscrn")).out);
  CHECK(ab["fast"] == nlohmann::json::array({"B"}));
  CHECK(ab["zeta_fast"]["values"] == nlohmann::json::parse("[[-1,1,-1]]"));
  CHECK(ab["conserved"].empty());
}

TEST_CASE("exit codes") {
  CHECK(run("").status == 1);
  CHECK(run("frobnicate " + fx("ab.mscrn")).status == 1);
  CHECK(run("simulate " + fx("ab.mscrn") + " --engine nope").status == 1);
  CHECK(run("verify " + fx("ab.mscrn") + " --N 10,x").status == 1);
  CHECK(run("analyze /nonexistent/model.mscrn").status == 2);

  std::string bad = std::string(MSCRN_TMP_DIR) + "/bad.mscrn";
  std::ofstream(bad) << "species A alpha=1\nreaction r1: A -> B @ mass_action(1)\n";
  CHECK(run("analyze " + bad).status == 2);

  // A jump-free limit whose flow drives a coordinate negative.
  std::string neg = std::string(MSCRN_TMP_DIR) + "/neg.mscrn";
  std::ofstream(neg) << "species A alpha=1\nreaction r1: A -> @ 0 - A beta=1\ninit A = 1\n";
  CHECK(run("simulate " + neg + " --engine pdmp").status == 3);
}

TEST_CASE("reduce writes the averaged rate") {
  auto r = run("reduce " + fx("ab.mscrn"));
  REQUIRE(r.status == 0);
  CHECK(r.out.find("rate k1*k2*vA/(k3+k1*vA)") != std::string::npos);
}

TEST_CASE("simulate is reproducible") {
  auto a = run("simulate " + fx("gene.mscrn") + " --N 20 --seed 9 --grid 5 --format csv");
  auto b = run("simulate " + fx("gene.mscrn") + " --N 20 --seed 9 --grid 5 --format csv");
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("time,G,G',P\n", 0) == 0);
  auto e = run("simulate " + fx("gene.mscrn") + " --engine pdmp --replicas 20 --grid 2");
  REQUIRE(e.status == 0);
  CHECK(nlohmann::json::parse(e.out)["observables"]["vP"].contains("mean"));
}

TEST_CASE("avg-rates tables") {
  auto r = run("avg-rates " + fx("ab.mscrn") + " --state 1 --format csv");
  REQUIRE(r.status == 0);
  CHECK(r.out == "vA,reaction,kind,value,se\n1,r1,analytic,0.5,0\n");
  auto g = run("avg-rates " + fx("ab.mscrn") + " --range 0:1:3");
  CHECK(nlohmann::json::parse(g.out)["rates"].size() == 3);
}

TEST_CASE("verify writes JSON and CSV") {
  std::string prefix = std::string(MSCRN_TMP_DIR) + "/report";
  auto r = run("verify " + fx("ab.mscrn") + " --N 10,100 --replicas 100 --out " + prefix);
  REQUIRE(r.status == 0);
  std::ifstream js(prefix + ".json"), csv(prefix + ".csv");
  REQUIRE(js.good());
  REQUIRE(csv.good());
  auto j = nlohmann::json::parse(js);
  CHECK(j["N"].size() == 2);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "N,observable,time,mean,variance,se,limit_mean,limit_se,normalized_error");
  auto one = nlohmann::json::parse(run("verify " + fx("ab.mscrn") + " --N 50 --replicas 20").out);
  CHECK(one["trend"] == "not-applicable");
}
