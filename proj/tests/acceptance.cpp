// One line per acceptance criterion; exit status is nonzero if any fails.

#include "mscrn/averaging.hpp"
#include "mscrn/error.hpp"
#include "mscrn/parser.hpp"
#include "mscrn/pdmp.hpp"
#include "mscrn/random.hpp"
#include "mscrn/scale.hpp"
#include "mscrn/ssa.hpp"
#include "mscrn/verify.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace mscrn;

namespace {

Model fixture(const std::string& name) { return load_model(std::string(MSCRN_FIXTURE_DIR) + "/" + name); }

double param(const Model& m, const char* name) { return m.params[static_cast<std::size_t>(m.find_param(name))].value; }

void set_param(Model& m, const char* name, double v) {
  m.params[static_cast<std::size_t>(m.find_param(name))].value = v;
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

/// Collects failed checks of one criterion.
struct Check {
  std::vector<std::string> failures;
  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<int> names_to_idx(const Model& m, std::initializer_list<const char*> names, bool species) {
  std::vector<int> out;
  for (auto* n : names) out.push_back(species ? m.find_species(n) : static_cast<int>(std::find_if(m.reactions.begin(), m.reactions.end(), [&](const Reaction& r) { return r.name == n; }) - m.reactions.begin()));
  return out;
}

// ---------------------------------------------------------------------------

void classification_golden(Check& c) {
  auto gene = fixture("gene.mscrn");
  auto g = classify(gene);
  c.require(g.kind == ScaleKind::Single, "gene is single scale");
  c.require(g.discrete == names_to_idx(gene, {"G", "G'"}, true), "gene discrete species {G, G'}");
  c.require(g.continuous == names_to_idx(gene, {"P"}, true), "gene continuous species {P}");
  c.require(g.k_star.discrete == names_to_idx(gene, {"r1", "r2"}, false), "gene K*_circ = {1,2}");
  c.require(g.k_star.continuous == names_to_idx(gene, {"r3", "r4"}, false), "gene K*_bullet = {3,4}");
  IntMatrix zeta = {{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, 1, -1}};
  c.require(g.zeta_star.values == zeta, "gene zeta* equals zeta");

  auto ab = fixture("ab.mscrn");
  auto a = classify(ab);
  c.require(a.kind == ScaleKind::Two, "ab is two-scale");
  c.require(a.fast == names_to_idx(ab, {"B"}, true), "I^f = {B}");
  c.require(a.slow == names_to_idx(ab, {"A"}, true), "I^s = {A}");
  c.require(a.k_fast.all == names_to_idx(ab, {"r1", "r2", "r3"}, false), "K^f = {1,2,3}");
  c.require(a.k_slow.all == names_to_idx(ab, {"r1"}, false), "K^s = {1}");
  c.require(a.zeta_fast.values == IntMatrix{{-1, 1, -1}}, "zeta^f = (-1, 1, -1)");
  c.require(conserved_basis(ab, a).empty(), "empty conserved basis");
}

void averaged_rate_oracle(Check& c) {
  auto m = fixture("ab.mscrn");
  for (const char* k : {"k1", "k2", "k3"}) c.require(param(m, k) == 1.0, std::string(k) + " = 1");
  auto exact = Averager(m, {}).rate(0)({1.0});
  c.require(exact.value == 0.5, "analytic rate at vA=1 is exactly 0.5 (got " + fmt(exact.value) + ")");
  AveragingOptions o;
  o.mode = AveragingMode::MonteCarlo;
  o.mc.budget = 1'000'000;
  o.mc.seed = 2024;
  auto mc = Averager(m, o).rate(0)({1.0});
  c.require(mc.se > 0 && std::fabs(mc.value - 0.5) <= 3 * mc.se,
            "Monte Carlo " + fmt(mc.value) + " +- " + fmt(mc.se) + " within 3 SE of 0.5");
}

Model with_etas(Model m, Exponent eta_a, Exponent eta_b) {
  m.species[static_cast<std::size_t>(m.find_species("A"))].eta = eta_a;
  m.species[static_cast<std::size_t>(m.find_species("B"))].eta = eta_b;
  return m;
}

/// The four movement regimes of the two-compartment fixture, in case order.
std::vector<Model> four_cases(const Model& base) {
  const Exponent fast(2), slow(1, 2);
  return {with_etas(base, fast, fast), with_etas(base, slow, fast), with_etas(base, fast, slow),
          with_etas(base, slow, slow)};
}

void spatial_case_formulas(Check& c) {
  auto base = fixture("spatial_case1.mscrn");
  auto eq = movement_equilibria(base);
  c.require(std::fabs(eq.pi[0][0] - 2.0 / 3) < 1e-15 && std::fabs(eq.pi[1][0] - 0.5) < 1e-15,
            "pi_A = (2/3, 1/3), pi_B = (1/2, 1/2)");
  // Hand-composed formulas with the equilibria written out.
  const double pa[2] = {2.0 / 3, 1.0 / 3}, pb[2] = {0.5, 0.5};
  const char* k1[2] = {"k1a", "k1b"};
  const char* k2[2] = {"k2a", "k2b"};
  const char* k3[2] = {"k3a", "k3b"};
  auto fast_formula = [&](const Model& m, double s) {
    double kb1 = 0, kb2 = 0, kb3 = 0;
    for (int d = 0; d < 2; ++d) {
      kb1 += param(m, k1[d]) * pa[d] * pb[d];
      kb2 += param(m, k2[d]);
      kb3 += param(m, k3[d]) * pb[d];
    }
    return kb1 * kb2 * s / (kb3 + kb1 * s);
  };
  auto slow_formula = [&](const Model& m, double s) {
    double sum = 0;
    for (int d = 0; d < 2; ++d) {
      double a = param(m, k1[d]) * pa[d] * s;
      sum += param(m, k1[d]) * param(m, k2[d]) * pa[d] * s / (param(m, k3[d]) + a);
    }
    return sum;
  };
  const std::vector<double> grid = {0.1, 0.5, 1.0, 2.0, 5.0};
  auto cases = four_cases(base);
  std::vector<AveragedRate> rates;
  for (std::size_t q = 0; q < 4; ++q) {
    Averager avg(cases[q], {});
    auto tag = avg.classification().spatial_case;
    c.require(tag && static_cast<std::size_t>(tag->tag) == q, "fixture variant " + std::to_string(q + 1) + " is case " + std::to_string(q + 1));
    rates.push_back(avg.rate(0));
    c.require(rates.back().kind == AveragedRate::Kind::Analytic, "case " + std::to_string(q + 1) + " is analytic");
  }
  double worst = 0, worst_pair = 0;
  for (double s : grid) {
    for (std::size_t q = 0; q < 4; ++q) {
      double want = q < 2 ? fast_formula(base, s) : slow_formula(base, s);
      worst = std::max(worst, rel(rates[q]({s}).value, want));
    }
    worst_pair = std::max({worst_pair, rel(rates[1]({s}).value, rates[0]({s}).value),
                           rel(rates[3]({s}).value, rates[2]({s}).value)});
  }
  c.require(worst <= 1e-12, "case formulas match to 1e-12 (worst " + fmt(worst) + ")");
  c.require(worst_pair <= 1e-12, "case 1 = case 2 and case 3 = case 4 (worst " + fmt(worst_pair) + ")");

  // Uniform pi_A and homogeneous constants: every case is the one-compartment rate.
  auto hom = base;
  hom.movements.clear();
  hom.movements.push_back({0, 0, 1, 1.0});
  hom.movements.push_back({0, 1, 0, 1.0});
  hom.movements.push_back({1, 0, 1, 1.0});
  hom.movements.push_back({1, 1, 0, 3.0});
  auto heq = movement_equilibria(hom);
  const double K1 = 1.5, K2 = 0.8, K3 = 2.0, qa[2] = {0.5, 0.5}, qb[2] = {0.75, 0.25};
  c.require(std::fabs(heq.pi[0][0] - 0.5) < 1e-15 && std::fabs(heq.pi[1][0] - 0.75) < 1e-15,
            "homogeneous variant has pi_A = (1/2, 1/2), pi_B = (3/4, 1/4)");
  for (int d = 0; d < 2; ++d) {
    set_param(hom, k1[d], K1 / (2 * qa[d] * qb[d]));
    set_param(hom, k2[d], K2 / 2);
    set_param(hom, k3[d], K3 / (2 * qb[d]));
  }
  double worst_hom = 0;
  for (const auto& m : four_cases(hom)) {
    auto r = Averager(m, {}).rate(0);
    for (double s : grid) worst_hom = std::max(worst_hom, rel(r({s}).value, K1 * K2 * s / (K3 + K1 * s)));
  }
  c.require(worst_hom <= 1e-12, "homogeneous, uniform pi_A: four cases coincide (worst " + fmt(worst_hom) + ")");
}

void fast_movement_invariance(Check& c) {
  auto base = fixture("spatial_case1.mscrn");
  // Rescaled and re-weighted movement of the fast species B.
  auto moved = base;
  for (auto& mv : moved.movements)
    if (mv.species == 1) mv.rate *= 7.0;
  auto reweighted = base;
  for (auto& mv : reweighted.movements)
    if (mv.species == 1) mv.rate = mv.from == 0 ? 5.0 : 0.25;
  const std::vector<double> grid = {0.25, 1.0, 3.0};
  AveragingOptions mc;
  mc.mode = AveragingMode::MonteCarlo;
  mc.mc.budget = 100'000;
  mc.mc.seed = 77;
  for (auto eta_a : {Exponent(2), Exponent(1, 2)}) {
    auto label = std::string(eta_a == Exponent(2) ? "case 3" : "case 4");
    auto ref = Averager(with_etas(base, eta_a, Exponent(1, 2)), {}).rate(0);
    auto ref_mc = Averager(with_etas(base, eta_a, Exponent(1, 2)), mc).rate(0);
    for (const auto* variant : {&moved, &reweighted}) {
      auto m = with_etas(*variant, eta_a, Exponent(1, 2));
      auto r = Averager(m, {}).rate(0);
      auto r_mc = Averager(m, mc).rate(0);
      for (double s : grid) {
        c.require(r({s}).value == ref({s}).value, label + " analytic rate unchanged at s=" + fmt(s));
        auto a = r_mc({s}), b = ref_mc({s});
        c.require(std::fabs(a.value - b.value) <= 3 * std::hypot(a.se, b.se),
                  label + " Monte Carlo rate unchanged within 3 SE at s=" + fmt(s));
      }
    }
  }
}

void convergence_harness(Check& c) {
  for (const char* name : {"ab.mscrn", "gene.mscrn"}) {
    VerifyOptions o;
    o.N = {10, 100, 1000};
    o.replicas = 2000;
    o.times = {1.0};
    o.seed = 1;
    auto r = verify_convergence(fixture(name), o);
    std::ostringstream errs;
    for (std::size_t n = 0; n < r.error.size(); ++n) errs << (n ? ", " : "") << fmt(r.error[n]);
    c.require(r.error.back() <= 0.05, std::string(name) + " error(1000) <= 0.05 (errors " + errs.str() + ")");
    c.require(r.trend == Trend::Decreasing,
              std::string(name) + " trend " + to_string(r.trend) + " (errors " + errs.str() + ")");
  }
}

void movement_equilibrium_suite(Check& c) {
  auto m = fixture("movement_only.mscrn");
  const int D = m.num_compartments();
  auto eq = movement_equilibria(m);
  SimulationConfig cfg;
  cfg.t_end = 2500;
  cfg.seed = 99;
  auto tr = simulate(m, cfg, State{m.initial_scaled(), true});
  c.require(tr.events >= 100'000, "at least 1e5 movement events (" + std::to_string(tr.events) + ")");
  const int batches = 20;
  const double span = tr.times.back() / batches;
  for (int i = 0; i < m.num_species(); ++i)
    for (int d = 0; d < D; ++d) {
      std::vector<double> acc(batches, 0.0), len(batches, 0.0);
      for (std::size_t j = 0; j + 1 < tr.times.size(); ++j) {
        double dt = tr.times[j + 1] - tr.times[j];
        auto b = std::min(static_cast<int>(tr.times[j] / span), batches - 1);
        double total = tr.totals[j][static_cast<std::size_t>(i)];
        acc[static_cast<std::size_t>(b)] += dt * tr.states[j][static_cast<std::size_t>(m.slot(i, d))] / total;
        len[static_cast<std::size_t>(b)] += dt;
      }
      double mean = 0, ss = 0;
      for (int b = 0; b < batches; ++b) mean += acc[static_cast<std::size_t>(b)] / len[static_cast<std::size_t>(b)] / batches;
      for (int b = 0; b < batches; ++b) {
        double x = acc[static_cast<std::size_t>(b)] / len[static_cast<std::size_t>(b)] - mean;
        ss += x * x;
      }
      double se = std::sqrt(ss / (batches - 1) / batches);
      double pi = eq.pi[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
      c.require(std::fabs(mean - pi) <= 3 * se || (se == 0 && mean == pi),
                m.species[static_cast<std::size_t>(i)].name + "@" + m.compartments[static_cast<std::size_t>(d)] +
                    " occupancy " + fmt(mean) + " +- " + fmt(se) + " vs pi " + fmt(pi));
    }

  // Multinomial marginals of the product measure against exact binomial pmfs.
  const int n = 12, draws = 50'000;
  ProductMeasure pm(m, eq, {0}, {double(n)});
  Rng rng(5);
  std::vector<double> locals(static_cast<std::size_t>(m.num_species() * D), 0.0);
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(D), std::vector<double>(n + 1, 0.0));
  for (int r = 0; r < draws; ++r) {
    pm.sample(locals, rng);
    for (int d = 0; d < D; ++d) counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(locals[static_cast<std::size_t>(d)])] += 1;
  }
  for (int d = 0; d < D; ++d) {
    double p = eq.pi[0][static_cast<std::size_t>(d)], chi2 = 0, tail_obs = 0, tail_exp = 0;
    int cells = 0;
    for (int x = 0; x <= n; ++x) {
      double pmf = std::exp(std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) + x * std::log(p) +
                            (n - x) * std::log1p(-p));
      double e = draws * pmf, o = counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(x)];
      if (e < 5) {
        tail_obs += o;
        tail_exp += e;
        continue;
      }
      chi2 += (o - e) * (o - e) / e;
      ++cells;
    }
    if (tail_exp > 0) {
      chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / tail_exp;
      ++cells;
    }
    boost::math::chi_squared dist(cells - 1);
    double crit = boost::math::quantile(boost::math::complement(dist, 0.01));
    c.require(chi2 <= crit, "compartment " + std::to_string(d + 1) + " chi-square " + fmt(chi2) + " <= " + fmt(crit));
  }
}

double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  double d = 0.0, n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f = cdf(xs[i]);
    d = std::max({d, std::fabs(f - static_cast<double>(i) / n), std::fabs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

void pdmp_correctness(Check& c) {
  // Protein flow with the bound gene copy frozen at 1: k3 = 2, k4 = 1, P(0) = 0.
  auto gene = fixture("gene.mscrn");
  int P = gene.find_species("P");
  std::vector<double> frozen(gene.species.size(), 0.0);
  frozen[static_cast<std::size_t>(gene.find_species("G'"))] = 1.0;
  auto coord = [P](int i) { return i == P ? 0 : -1; };
  HybridSystem sys;
  sys.labels = {"P"};
  sys.flows.push_back({"r3", make_rate_function(gene, 2, coord, frozen), {{0, 1.0}}});
  sys.flows.push_back({"r4", make_rate_function(gene, 3, coord, frozen), {{0, -1.0}}});
  PdmpConfig cfg;
  cfg.t_end = 1.0;
  cfg.grid = {1.0};
  auto tr = simulate_pdmp(sys, {0.0}, cfg);
  double k3 = param(gene, "k3"), k4 = param(gene, "k4");
  double want = k3 / k4 * (1 - std::exp(-k4));
  double err = rel(tr.states.back()[0], want);
  c.require(tr.events == 0, "no jumps in the flow fixture");
  c.require(err <= 10 * cfg.ode.rtol, "flow error " + fmt(err) + " <= 10 x rtol");

  HybridSystem jumps;
  jumps.labels = {"X"};
  jumps.jumps.push_back({"tick", [](const std::vector<double>&) { return 3.0; }, {{0, 1}}});
  PdmpConfig jc;
  jc.t_end = 10'050 / 3.0;
  jc.seed = 31;
  jc.event_log = true;
  auto jt = simulate_pdmp(jumps, {0.0}, jc);
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < jt.event_times.size() && gaps.size() < 10'000; ++i)
    gaps.push_back(jt.event_times[i + 1] - jt.event_times[i]);
  c.require(gaps.size() == 10'000, "10^4 inter-jump times");
  double d = ks_distance(gaps, [](double x) { return 1 - std::exp(-3 * x); });
  double crit = 1.6276 / std::sqrt(static_cast<double>(gaps.size()));
  c.require(d <= crit, "KS distance " + fmt(d) + " <= " + fmt(crit));
}

void conservation_suite(Check& c) {
  auto sw = fixture("switch.mscrn");
  auto cls = classify(sw);
  auto basis = conserved_basis(sw, cls);
  c.require(basis.vectors.size() == 1, "switch has one conserved quantity");
  PdmpConfig cfg;
  cfg.t_end = 2000;
  cfg.seed = 8;
  cfg.event_log = true;
  std::vector<double> frozen(sw.species.size(), 0.0);
  frozen[static_cast<std::size_t>(sw.find_species("P"))] = 0.4;
  auto tr = simulate_conditional_fast(sw, cls, frozen, {1.0, 0.0}, cfg);
  c.require(tr.events > 1000, "fast switching produced events");
  bool exact = true;
  for (const auto& st : tr.states) {
    std::vector<double> full(sw.species.size(), 0.0);
    for (std::size_t r = 0; r < cls.fast.size(); ++r) full[static_cast<std::size_t>(cls.fast[r])] = st[r];
    for (std::size_t j = 0; j < basis.vectors.size(); ++j) exact = exact && basis.project(j, cls.fast, full) == 1.0;
  }
  c.require(exact, "conserved functional constant at every event (" + std::to_string(tr.states.size()) + " states)");

  auto mv = fixture("movement_only.mscrn");
  SimulationConfig sc;
  sc.t_end = 200;
  sc.seed = 12;
  sc.event_log = true;
  auto mt = simulate(mv, sc, State{mv.initial_scaled(), true});
  bool sums = mt.events > 1000;
  for (const auto& t : mt.totals) sums = sums && t == mt.totals.front();
  c.require(sums, "movement-only compartment sums constant at every event (" + std::to_string(mt.events) + " events)");
}

}  // namespace

int main() {
  struct Criterion {
    const char* title;
    double limit_seconds;
    void (*run)(Check&);
  };
  const Criterion criteria[] = {
      {"classification golden tests", 1, classification_golden},
      {"averaged-rate oracle", 30, averaged_rate_oracle},
      {"spatial case formulas", 10, spatial_case_formulas},
      {"fast-movement invariance", 60, fast_movement_invariance},
      {"convergence harness", 300, convergence_harness},
      {"movement equilibrium suite", 60, movement_equilibrium_suite},
      {"PDMP correctness", 60, pdmp_correctness},
      {"conservation suite", 60, conservation_suite},
  };
  int failed = 0, index = 0;
  for (const auto& cr : criteria) {
    ++index;
    Check check;
    auto start = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > cr.limit_seconds) check.failures.push_back("runtime " + fmt(secs) + " s over " + fmt(cr.limit_seconds) + " s");
    bool ok = check.failures.empty();
    failed += !ok;
    std::printf("criterion %d [%s]: %s (%.2f s)\n", index, cr.title, ok ? "PASS" : "FAIL", secs);
    for (const auto& f : check.failures) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
