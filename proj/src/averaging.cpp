#include "mscrn/averaging.hpp"

#include "mscrn/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numeric>
#include <set>

namespace mscrn {

using algebra::CompiledFunction;
using algebra::Monomial;
using algebra::Polynomial;
using algebra::RationalFunction;
using algebra::Symbol;
using algebra::SymbolValues;

// ---------------------------------------------------------------------------
// Movement equilibria and product measures

std::vector<double> movement_equilibrium(const Model& m, int species) {
  const auto D = static_cast<std::size_t>(m.num_compartments());
  if (D == 1) return {1.0};
  std::vector<std::vector<double>> q(D, std::vector<double>(D, 0.0));
  for (const auto& mv : m.movements)
    if (mv.species == species) q[static_cast<std::size_t>(mv.from)][static_cast<std::size_t>(mv.to)] += mv.rate;

  std::vector<std::vector<bool>> reach(D, std::vector<bool>(D, false));
  bool any = false;
  for (std::size_t a = 0; a < D; ++a) {
    reach[a][a] = true;
    for (std::size_t b = 0; b < D; ++b)
      if (q[a][b] > 0) reach[a][b] = any = true;
  }
  const auto& name = m.species[static_cast<std::size_t>(species)].name;
  if (!any) throw IsolatedSpeciesError("species '" + name + "' never moves between compartments");
  for (std::size_t k = 0; k < D; ++k)
    for (std::size_t a = 0; a < D; ++a)
      if (reach[a][k])
        for (std::size_t b = 0; b < D; ++b)
          if (reach[k][b]) reach[a][b] = true;

  // A state is recurrent iff everything it reaches reaches it back.
  // Compartments the species never enters nor leaves carry no mass.
  std::vector<bool> recurrent(D, true);
  for (std::size_t a = 0; a < D; ++a) {
    bool linked = false;
    for (std::size_t b = 0; b < D; ++b) linked = linked || q[a][b] > 0 || q[b][a] > 0;
    if (!linked) recurrent[a] = false;
  }
  for (std::size_t a = 0; a < D; ++a)
    for (std::size_t b = 0; b < D; ++b)
      if (reach[a][b] && !reach[b][a]) recurrent[a] = false;
  std::size_t first = D;
  for (std::size_t a = 0; a < D; ++a) {
    if (!recurrent[a]) continue;
    if (first == D) first = a;
    if (!reach[first][a])
      throw ReducibleChainError("movement of species '" + name + "' has more than one closed class");
  }

  // Global balance on the closed class with one equation replaced by sum = 1.
  std::vector<std::size_t> cls;
  for (std::size_t a = 0; a < D; ++a)
    if (recurrent[a]) cls.push_back(a);
  const std::size_t n = cls.size();
  std::vector<std::vector<long double>> a(n, std::vector<long double>(n + 1, 0.0L));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      // Row r: sum_c pi_c q(c, r) - pi_r sum_b q(r, b) = 0
      if (c == r) {
        long double out = 0;
        for (std::size_t b = 0; b < D; ++b)
          if (b != cls[r]) out += q[cls[r]][b];
        a[r][c] = -out;
      } else {
        a[r][c] = q[cls[c]][cls[r]];
      }
    }
  for (std::size_t c = 0; c < n; ++c) a[n - 1][c] = 1.0L;
  a[n - 1][n] = 1.0L;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    if (a[col][col] == 0) throw ReducibleChainError("singular movement generator for species '" + name + "'");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0) continue;
      long double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> pi(D, 0.0);
  for (std::size_t r = 0; r < n; ++r) pi[cls[r]] = static_cast<double>(std::max(0.0L, a[r][n] / a[r][r]));
  return pi;
}

MovementEquilibrium movement_equilibria(const Model& m) {
  MovementEquilibrium eq;
  for (int i = 0; i < m.num_species(); ++i) eq.pi.push_back(movement_equilibrium(m, i));
  return eq;
}

namespace {

double integral_total(const Model& m, int i, double s) {
  double r = std::round(s);
  if (std::fabs(s - r) > 1e-9 * std::max(1.0, std::fabs(s)) || r < 0)
    throw ValidationError("total of discrete species '" + m.species[static_cast<std::size_t>(i)].name +
                          "' must be a nonnegative integer");
  return r;
}

double log_binomial(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

}  // namespace

ProductMeasure::ProductMeasure(const Model& m, const MovementEquilibrium& eq, std::vector<int> species,
                               std::vector<double> totals)
    : D_(m.num_compartments()), species_(std::move(species)), totals_(std::move(totals)) {
  if (species_.size() != totals_.size()) throw ModelError("one total per species is required");
  for (std::size_t j = 0; j < species_.size(); ++j) {
    int i = species_[j];
    bool disc = m.species[static_cast<std::size_t>(i)].discrete();
    if (totals_[j] < 0) throw ValidationError("species totals must be nonnegative");
    if (disc) totals_[j] = integral_total(m, i, totals_[j]);
    discrete_.push_back(disc);
    pi_.push_back(eq.pi[static_cast<std::size_t>(i)]);
  }
}

double ProductMeasure::support_size() const {
  double n = 1.0;
  for (std::size_t j = 0; j < species_.size(); ++j)
    if (discrete_[j]) n *= std::exp(log_binomial(totals_[j] + D_ - 1, D_ - 1));
  return std::round(n);
}

void ProductMeasure::for_each(std::vector<double>& locals, const std::function<void(double)>& visit) const {
  for (std::size_t j = 0; j < species_.size(); ++j)
    if (!discrete_[j])
      for (int d = 0; d < D_; ++d)
        locals[static_cast<std::size_t>(species_[j] * D_ + d)] = totals_[j] * pi_[j][static_cast<std::size_t>(d)];

  // Depth-first over species, then compartments, distributing the remainder.
  std::function<void(std::size_t, int, double, double)> rec = [&](std::size_t j, int d, double left, double p) {
    while (j < species_.size() && !discrete_[j]) ++j;
    if (j == species_.size()) {
      visit(p);
      return;
    }
    auto slot = static_cast<std::size_t>(species_[j] * D_ + d);
    const auto& pi = pi_[j];
    if (d == D_ - 1) {
      locals[slot] = left;
      if (left > 0 && pi[static_cast<std::size_t>(d)] <= 0) return;
      std::size_t next = j + 1;
      while (next < species_.size() && !discrete_[next]) ++next;
      rec(next, 0, next < species_.size() ? totals_[next] : 0.0, p);
      return;
    }
    // Probability mass of the remaining compartments, for the conditional binomial.
    double rest = 0.0;
    for (int e = d; e < D_; ++e) rest += pi[static_cast<std::size_t>(e)];
    double f = rest > 0 ? pi[static_cast<std::size_t>(d)] / rest : 0.0;
    for (double x = 0; x <= left; ++x) {
      double q;
      if (f <= 0)
        q = x == 0 ? 1.0 : 0.0;
      else if (f >= 1)
        q = x == left ? 1.0 : 0.0;
      else
        q = std::exp(log_binomial(left, x) + x * std::log(f) + (left - x) * std::log1p(-f));
      if (q <= 0) continue;
      locals[slot] = x;
      rec(j, d + 1, left - x, p * q);
    }
  };
  std::size_t j0 = 0;
  while (j0 < species_.size() && !discrete_[j0]) ++j0;
  rec(j0, 0, j0 < species_.size() ? totals_[j0] : 0.0, 1.0);
}

void ProductMeasure::sample(std::vector<double>& locals, Rng& rng) const {
  for (std::size_t j = 0; j < species_.size(); ++j) {
    const auto& pi = pi_[j];
    if (!discrete_[j]) {
      for (int d = 0; d < D_; ++d)
        locals[static_cast<std::size_t>(species_[j] * D_ + d)] = totals_[j] * pi[static_cast<std::size_t>(d)];
      continue;
    }
    auto left = static_cast<long long>(totals_[j]);
    double rest = 1.0;
    for (int d = 0; d < D_; ++d) {
      auto slot = static_cast<std::size_t>(species_[j] * D_ + d);
      double p = pi[static_cast<std::size_t>(d)];
      long long x;
      if (d == D_ - 1 || rest <= 0) {
        x = d == D_ - 1 ? left : 0;
      } else {
        double f = std::clamp(p / rest, 0.0, 1.0);
        std::binomial_distribution<long long> bin(left, f);
        x = bin(rng);
      }
      locals[slot] = static_cast<double>(x);
      left -= x;
      rest -= p;
    }
  }
}

double ProductMeasure::marginal_pmf(int species, int compartment, int x) const {
  for (std::size_t j = 0; j < species_.size(); ++j) {
    if (species_[j] != species) continue;
    double n = totals_[j], p = pi_[j][static_cast<std::size_t>(compartment)];
    if (x < 0 || x > n) return 0.0;
    if (p <= 0) return x == 0 ? 1.0 : 0.0;
    if (p >= 1) return x == n ? 1.0 : 0.0;
    return std::exp(log_binomial(n, x) + x * std::log(p) + (n - x) * std::log1p(-p));
  }
  throw ModelError("species is not part of the product measure");
}

double mass_action_avg_kappa(const Model& m, const MovementEquilibrium& eq, int k) {
  if (!m.is_mass_action(k))
    throw NotMassAction("reaction '" + m.reactions[static_cast<std::size_t>(k)].name + "' is not mass action");
  double sum = 0.0;
  for (int d = 0; d < m.num_compartments(); ++d) {
    double term = m.kappa(k, d);
    for (const auto& [i, nu] : m.reactions[static_cast<std::size_t>(k)].reactants)
      term *= std::pow(eq.pi[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)], nu);
    sum += term;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Stationary measures

namespace {

double weighted_mean(const std::vector<double>& f, const std::vector<double>& w) {
  double a = 0.0, b = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    a += f[p] * w[p];
    b += w[p];
  }
  return b > 0 ? a / b : 0.0;
}

/// Poisson pmf table up to a generous truncation.
std::vector<double> poisson_table(double mean) {
  std::vector<double> pmf;
  auto top = static_cast<int>(std::ceil(mean + 12 * std::sqrt(mean) + 12));
  for (int x = 0; x <= top; ++x) pmf.push_back(std::exp(x * std::log(std::max(mean, 1e-300)) - mean - std::lgamma(x + 1.0)));
  if (mean == 0) pmf.assign(1, 1.0);
  return pmf;
}

}  // namespace

RateValue StationaryMeasure::expect(const std::function<double(const std::vector<double>&)>& f) const {
  switch (kind) {
    case Kind::PointMass: return {f(values), 0.0};
    case Kind::ProductPoisson: {
      std::vector<std::vector<double>> tables;
      double size = 1.0;
      for (double m : values) {
        tables.push_back(poisson_table(m));
        size *= static_cast<double>(tables.back().size());
      }
      if (size > 1e7) throw NumericalFailure("Poisson expectation support too large");
      std::vector<double> x(values.size(), 0.0);
      double acc = 0.0;
      std::function<void(std::size_t, double)> rec = [&](std::size_t r, double p) {
        if (r == values.size()) {
          acc += p * f(x);
          return;
        }
        for (std::size_t v = 0; v < tables[r].size(); ++v) {
          x[r] = static_cast<double>(v);
          rec(r + 1, p * tables[r][v]);
        }
      };
      rec(0, 1.0);
      return {acc, 0.0};
    }
    case Kind::Empirical: break;
  }
  std::vector<double> fv(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) fv[p] = f(points[p]);
  const std::size_t B = batch_weights.empty() ? 0 : batch_weights[0].size();
  std::vector<double> total(points.size(), 0.0);
  for (std::size_t p = 0; p < points.size(); ++p)
    for (double w : batch_weights[p]) total[p] += w;
  double mean = weighted_mean(fv, total);
  std::vector<double> means;
  for (std::size_t b = 0; b < B; ++b) {
    double a = 0.0, w = 0.0;
    for (std::size_t p = 0; p < points.size(); ++p) {
      a += fv[p] * batch_weights[p][b];
      w += batch_weights[p][b];
    }
    if (w > 0) means.push_back(a / w);
  }
  double se = 0.0;
  if (means.size() > 1) {
    double mb = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
    double ss = 0.0;
    for (double v : means) ss += (v - mb) * (v - mb);
    se = std::sqrt(ss / static_cast<double>(means.size() - 1) / static_cast<double>(means.size()));
  }
  return {mean, se};
}

namespace {

StationaryMeasure point_mass(const HybridSystem& sys, std::vector<double> x) {
  StationaryMeasure s;
  s.kind = StationaryMeasure::Kind::PointMass;
  s.labels = sys.labels;
  s.values = std::move(x);
  return s;
}

void finish_empirical(StationaryMeasure& s, const MonteCarloOptions& opt) {
  // Effective sample size of each coordinate from its batch-means error.
  s.ess = INFINITY;
  for (std::size_t r = 0; r < s.labels.size(); ++r) {
    auto coord = [r](const std::vector<double>& x) { return x[r]; };
    auto e = s.expect(coord);
    double var = 0.0, w = 0.0;
    for (std::size_t p = 0; p < s.points.size(); ++p) {
      double wp = std::accumulate(s.batch_weights[p].begin(), s.batch_weights[p].end(), 0.0);
      var += wp * (s.points[p][r] - e.value) * (s.points[p][r] - e.value);
      w += wp;
    }
    var = w > 0 ? var / w : 0.0;
    if (var > 1e-300) s.ess = std::min(s.ess, e.se > 0 ? var / (e.se * e.se) : INFINITY);
  }
  if (s.ess < opt.min_ess)
    throw NonErgodicSuspected("effective sample size " + std::to_string(s.ess) + " of the fast stationary estimate is below " +
                              std::to_string(opt.min_ess));
}

}  // namespace

StationaryMeasure empirical_stationary(const HybridSystem& sys, const std::vector<double>& x0,
                                       const MonteCarloOptions& opt, std::uint64_t seed) {
  const std::size_t n = sys.dimension();
  if (x0.size() != n) throw ModelError("initial fast state has the wrong dimension");
  if (sys.jumps.empty() && sys.flows.empty()) return point_mass(sys, x0);
  if (opt.batches < 2) throw ModelError("batch means need at least two batches");

  if (sys.jumps.empty()) {
    // Deterministic relaxation to the fixed point.
    std::vector<double> x = x0;
    double T = 1.0;
    for (int it = 0; it < 200; ++it) {
      PdmpConfig cfg;
      cfg.t_end = T;
      cfg.grid = {T};
      cfg.ode.rtol = 1e-10;
      cfg.ode.atol = 1e-12;
      auto tr = simulate_pdmp(sys, x, cfg);
      const auto& y = tr.states.back();
      double change = 0.0;
      for (std::size_t r = 0; r < n; ++r) change = std::max(change, std::fabs(y[r] - x[r]) / (1.0 + std::fabs(y[r])));
      x = y;
      if (change < 1e-11) return point_mass(sys, x);
      T = std::min(T * 2, 1e4);
    }
    throw NonErgodicSuspected("fast flow does not settle to a fixed point");
  }

  StationaryMeasure s;
  s.kind = StationaryMeasure::Kind::Empirical;
  s.labels = sys.labels;
  const auto B = static_cast<std::size_t>(opt.batches);
  std::map<std::vector<double>, std::vector<double>> occupation;
  const auto burn = static_cast<std::uint64_t>(opt.burn_in * static_cast<double>(opt.budget));
  const std::uint64_t kept = std::max<std::uint64_t>(opt.budget - std::min(burn, opt.budget), B);
  const std::uint64_t per_batch = (kept + B - 1) / B;

  if (sys.flows.empty()) {
    Rng rng(seed);
    std::vector<double> x = x0, rates(sys.jumps.size());
    for (std::uint64_t ev = 0; ev < burn + kept; ++ev) {
      double total = 0.0;
      for (std::size_t k = 0; k < rates.size(); ++k) {
        double r = sys.jumps[k].rate(x);
        if (!std::isfinite(r) || r < -1e-9) throw NegativeRate("fast rate of '" + sys.jumps[k].name + "' is invalid");
        total += rates[k] = std::max(r, 0.0);
      }
      if (total <= 0) return point_mass(sys, x);  // absorbed
      double dt = rng.exponential(total);
      if (ev >= burn) {
        auto& w = occupation[x];
        if (w.empty()) w.assign(B, 0.0);
        w[std::min<std::size_t>((ev - burn) / per_batch, B - 1)] += dt;
      }
      double target = rng.uniform() * total, acc = rates[0];
      std::size_t k = 0;
      while (acc <= target && k + 1 < rates.size()) acc += rates[++k];
      while (rates[k] == 0.0 && k > 0) --k;
      for (const auto& [i, z] : sys.jumps[k].change) {
        x[static_cast<std::size_t>(i)] += z;
        if (x[static_cast<std::size_t>(i)] < 0) throw NegativeRate("fast jump '" + sys.jumps[k].name + "' went negative");
      }
    }
    s.events = burn + kept;
  } else {
    // Hybrid fast system: sample on a regular time grid sized from a pilot run.
    PdmpConfig pilot;
    pilot.t_end = 1.0;
    pilot.grid = {1.0};
    pilot.seed = mix64(seed);
    auto p = simulate_pdmp(sys, x0, pilot);
    double rate = std::max<double>(static_cast<double>(p.events), 1.0);
    double T = static_cast<double>(opt.budget) / rate;
    std::size_t points = std::min<std::uint64_t>(opt.budget, 200'000);
    PdmpConfig cfg;
    cfg.t_end = T;
    cfg.seed = seed;
    cfg.grid = uniform_grid(T, static_cast<int>(points));
    auto tr = simulate_pdmp(sys, x0, cfg);
    const double t_burn = opt.burn_in * T, span = (T - t_burn) / static_cast<double>(B);
    for (std::size_t j = 0; j < tr.times.size(); ++j) {
      if (tr.times[j] < t_burn) continue;
      auto& w = occupation[tr.states[j]];
      if (w.empty()) w.assign(B, 0.0);
      w[std::min<std::size_t>(static_cast<std::size_t>((tr.times[j] - t_burn) / span), B - 1)] += 1.0;
    }
    s.events = tr.events;
  }
  for (auto& [x, w] : occupation) {
    s.points.push_back(x);
    s.batch_weights.push_back(std::move(w));
  }
  finish_empirical(s, opt);
  return s;
}

// ---------------------------------------------------------------------------
// Symbolic averaging

namespace {

/// Distribution of one coordinate under the analytic fast stationary measure.
struct Law {
  bool poisson = true;  // else point mass
  RationalFunction mean;
};

using LawMap = std::map<Symbol, Law>;

RationalFunction rename(const RationalFunction& f, const std::function<std::optional<Symbol>(const Symbol&)>& map) {
  RationalFunction out = f;
  for (const auto& s : f.symbols())
    if (auto t = map(s); t && *t != s) out = out.substitute(s, RationalFunction(Polynomial::variable(*t)));
  return out;
}

RationalFunction at_compartment(const RationalFunction& f, int d) {
  return rename(f, [d](const Symbol& s) -> std::optional<Symbol> {
    if (s.kind == Symbol::Kind::Species) return Symbol::local(s.index, d);
    return std::nullopt;
  });
}

std::optional<RationalFunction> expect_laws(const RationalFunction& f, const LawMap& laws) {
  RationalFunction g = f;
  std::set<Symbol> poisson;
  for (const auto& [s, law] : laws) {
    if (!g.depends_on(s)) continue;
    if (law.poisson)
      poisson.insert(s);
    else
      g = g.substitute(s, law.mean);
  }
  if (poisson.empty()) return g;
  return algebra::expect_polynomial(g, poisson, [&](const Symbol& s, int j) { return laws.at(s).mean.pow(j); });
}

/// Expectation over the movement equilibrium of `species` given their totals:
/// locals of continuous species become pi_i(d) s_i, polynomial moments of
/// discrete locals use multinomial factorial moments
/// E[prod_d (V_d)_{l_d}] = (s)_{sum l} prod_d pi(d)^{l_d}.
std::optional<RationalFunction> expect_movement(const RationalFunction& f, const std::vector<int>& species,
                                                const Model& m, const MovementEquilibrium& eq) {
  const int D = m.num_compartments();
  RationalFunction g = f;
  std::set<int> discrete;
  for (int i : species) {
    const auto& pi = eq.pi[static_cast<std::size_t>(i)];
    if (m.species[static_cast<std::size_t>(i)].discrete()) {
      discrete.insert(i);
      continue;
    }
    for (int d = 0; d < D; ++d) {
      Symbol loc = Symbol::local(i, d);
      if (g.depends_on(loc))
        g = g.substitute(loc, RationalFunction(Polynomial(pi[static_cast<std::size_t>(d)]) * Polynomial::variable(Symbol::total(i))));
    }
  }
  if (discrete.empty()) return g;
  for (int i : discrete)
    for (int d = 0; d < D; ++d)
      if (g.denominator().depends_on(Symbol::local(i, d))) return std::nullopt;

  RationalFunction num(0.0);
  for (const auto& [mono, coef] : g.numerator().terms()) {
    std::map<int, std::vector<std::pair<int, int>>> groups;  // species -> (compartment, power)
    Monomial rest;
    for (const auto& [sym, pw] : mono) {
      if (sym.kind == Symbol::Kind::Local && discrete.count(sym.index))
        groups[sym.index].emplace_back(sym.compartment, pw);
      else
        rest.emplace_back(sym, pw);
    }
    Polynomial term;
    term.add_term(rest, coef);
    for (const auto& [i, parts] : groups) {
      const auto& pi = eq.pi[static_cast<std::size_t>(i)];
      Polynomial moment;
      std::vector<int> l(parts.size(), 1);
      // Enumerate 1 <= l_j <= a_j.
      for (;;) {
        double c = 1.0;
        int sum = 0;
        for (std::size_t j = 0; j < parts.size(); ++j) {
          c *= algebra::stirling2(parts[j].second, l[j]) *
               std::pow(pi[static_cast<std::size_t>(parts[j].first)], l[j]);
          sum += l[j];
        }
        if (c != 0) moment += Polynomial(c) * algebra::falling_factorial(Symbol::total(i), sum);
        std::size_t j = 0;
        while (j < parts.size() && ++l[j] > parts[j].second) l[j++] = 1;
        if (j == parts.size()) break;
      }
      term *= moment;
    }
    num += RationalFunction(term);
  }
  return num / RationalFunction(g.denominator());
}

/// One reaction channel of a fast problem.
struct Channel {
  std::string name;
  int reaction = -1;
  int compartment = -1;
  std::vector<std::pair<int, int>> change;  // (coordinate, integer change)
  bool jump = true;
};

/// Rate on a level: closed form when available, else a numeric field.
struct Rate {
  std::optional<RationalFunction> rf;
  std::function<RateValue(const std::map<Symbol, double>&)> field;
};

/// Independent linear birth-death structure: every channel moves one
/// coordinate; births do not depend on the fast coordinates, deaths are
/// c * x_r with c free of them.
std::optional<LawMap> birth_death_laws(const std::vector<Symbol>& coords, const std::vector<bool>& discrete,
                                       const std::vector<Channel>& channels, const std::vector<Rate>& rates,
                                       std::string* why) {
  std::vector<RationalFunction> birth(coords.size(), RationalFunction(0.0)), death(coords.size(), RationalFunction(0.0));
  std::set<Symbol> fast(coords.begin(), coords.end());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const auto& ch = channels[c];
    if (ch.change.empty()) continue;
    if (ch.change.size() != 1) {
      *why = "fast reaction '" + ch.name + "' changes several fast coordinates";
      return std::nullopt;
    }
    if (!rates[c].rf) {
      *why = "rate of fast reaction '" + ch.name + "' is not rational";
      return std::nullopt;
    }
    const auto& f = *rates[c].rf;
    auto [r, z] = ch.change[0];
    const Symbol x = coords[static_cast<std::size_t>(r)];
    for (const auto& s : f.symbols())
      if (fast.count(s) && s != x) {
        *why = "rate of fast reaction '" + ch.name + "' couples fast coordinates";
        return std::nullopt;
      }
    if (discrete[static_cast<std::size_t>(r)] && std::abs(z) != 1) {
      *why = "fast reaction '" + ch.name + "' changes a count by more than one";
      return std::nullopt;
    }
    if (z > 0) {
      if (f.depends_on(x)) {
        *why = "birth rate of fast reaction '" + ch.name + "' depends on its own species";
        return std::nullopt;
      }
      birth[static_cast<std::size_t>(r)] += RationalFunction(static_cast<double>(z)) * f;
      continue;
    }
    auto parts = f.numerator().collect(x);
    if (f.denominator().depends_on(x) || parts.size() != 2 || !parts[0].is_zero()) {
      *why = "death rate of fast reaction '" + ch.name + "' is not linear in its species";
      return std::nullopt;
    }
    death[static_cast<std::size_t>(r)] +=
        RationalFunction(static_cast<double>(-z)) * RationalFunction(parts[1], f.denominator());
  }
  LawMap laws;
  for (std::size_t r = 0; r < coords.size(); ++r) {
    if (death[r].is_zero()) {
      *why = "fast coordinate has no linear death";
      return std::nullopt;
    }
    laws[coords[r]] = Law{discrete[r], birth[r] / death[r]};
  }
  return laws;
}

std::uint64_t hash_state(const std::map<Symbol, double>& ctx, std::uint64_t salt) {
  std::uint64_t h = mix64(salt);
  for (const auto& [s, v] : ctx) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ (static_cast<std::uint64_t>(s.kind) << 56) ^ (static_cast<std::uint64_t>(s.index) << 24) ^
              static_cast<std::uint64_t>(s.compartment + 1));
    h = mix64(h ^ bits);
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// The averaging engine

struct Averager::Impl {
  enum class Scenario { SingleNonspatial, SingleSpatial, Two, Three, Spatial };

  /// Fast (or middle) tier: a Markov problem over `coords` given a context.
  struct Level {
    std::string name;
    std::vector<Symbol> coords;
    std::vector<bool> discrete;
    std::vector<std::string> labels;
    std::vector<Channel> channels;
    std::vector<Rate> rates;       // per channel
    std::optional<LawMap> laws;    // analytic stationary measure
    std::string why_not_analytic;
    Level* child = nullptr;        // rates/targets are averages over the child level
    std::map<std::vector<std::pair<Symbol, double>>, std::shared_ptr<StationaryMeasure>> cache;
    std::mutex mutex;
    std::uint64_t salt = 0;
  };

  Model model;
  AveragingOptions options;
  ScaleClassification c;
  ConservedBasis conserved;
  std::optional<MovementEquilibrium> eq;
  std::vector<Symbol> symbols;
  std::vector<std::string> warnings;
  Scenario scenario = Scenario::SingleNonspatial;
  SpatialCaseTag tag = SpatialCaseTag::Case1;
  std::unique_ptr<Level> fast, middle;
  /// Species averaged over the movement equilibrium after the fast measure.
  std::vector<int> outer;
  /// Per-compartment conserved amounts (Cases 3/4 with conserved quantities).
  bool conserved_movement = false;

  explicit Impl(const Model& m, const AveragingOptions& o);

  double param(int p) const { return model.params[static_cast<std::size_t>(p)].value; }

  SymbolValues values_of(const std::map<Symbol, double>& ctx) const {
    return [this, &ctx](const Symbol& s) {
      if (s.kind == Symbol::Kind::Param) return param(s.index);
      auto it = ctx.find(s);
      if (it == ctx.end()) throw ModelError("averaging context lacks a value for a symbol");
      return it->second;
    };
  }

  // -- base rates -----------------------------------------------------------

  /// Numeric lambda_kd with species read through `local(i)`.
  double raw_rate(int k, int d, const std::function<double(int)>& local) const {
    if (auto f = symbolic_rate(model, k, std::max(d, 0)))
      return f->evaluate([&](const Symbol& s) { return s.kind == Symbol::Kind::Param ? param(s.index) : local(s.index); });
    double v = model.expression(k, std::max(d, 0))->evaluate([&](const Symbol& s) {
      return s.kind == Symbol::Kind::Param ? param(s.index) : local(s.index);
    });
    if (!std::isfinite(v) || v < 0)
      throw RateEvaluationError("reaction '" + model.reactions[static_cast<std::size_t>(k)].name + "' evaluated to " +
                                std::to_string(v));
    return v;
  }

  /// sum over `comps` of E[lambda_kd] with `avg` species drawn from the
  /// movement equilibrium given their totals; other species are read as
  /// locals (or as totals/species for nonspatial rates).
  Rate spatial_rate(int k, std::vector<int> comps, std::vector<int> avg) const {
    Rate out;
    std::optional<RationalFunction> sum = RationalFunction(0.0);
    for (int d : comps) {
      auto f = symbolic_rate(model, k, d);
      if (!f) {
        sum.reset();
        break;
      }
      auto e = expect_movement(at_compartment(*f, d), avg, model, *eq);
      if (!e) {
        sum.reset();
        break;
      }
      *sum += *e;
    }
    out.rf = sum;
    const int D = model.num_compartments();
    out.field = [this, k, comps, avg, D](const std::map<Symbol, double>& ctx) {
      std::vector<double> locals(static_cast<std::size_t>(model.num_species() * D), 0.0);
      for (const auto& [s, v] : ctx)
        if (s.kind == Symbol::Kind::Local) locals[static_cast<std::size_t>(s.index * D + s.compartment)] = v;
      std::vector<double> totals;
      for (int i : avg) totals.push_back(ctx.at(Symbol::total(i)));
      ProductMeasure pm(model, *eq, avg, totals);
      auto eval = [&] {
        double acc = 0.0;
        for (int d : comps)
          acc += raw_rate(k, d, [&](int i) { return locals[static_cast<std::size_t>(i * D + d)]; });
        return acc;
      };
      if (pm.support_size() <= static_cast<double>(options.mc.exact_limit)) {
        double acc = 0.0;
        pm.for_each(locals, [&](double p) { acc += p * eval(); });
        return RateValue{acc, 0.0};
      }
      Rng rng(hash_state(ctx, 0x5eed + static_cast<std::uint64_t>(k)));
      const std::size_t n = options.mc.outer_samples;
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        pm.sample(locals, rng);
        double v = eval();
        s1 += v;
        s2 += v * v;
      }
      double mean = s1 / static_cast<double>(n);
      double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean);
      return RateValue{mean, std::sqrt(var / static_cast<double>(n))};
    };
    return out;
  }

  /// Nonspatial rate of k in species symbols.
  Rate species_rate(int k) const {
    Rate out;
    out.rf = symbolic_rate(model, k);
    out.field = [this, k](const std::map<Symbol, double>& ctx) {
      return RateValue{raw_rate(k, -1, [&](int i) { return ctx.at(Symbol::species(i)); }), 0.0};
    };
    return out;
  }

  /// Rate of reaction k before the fast measure (the lambda-tilde of the case).
  Rate base_rate(int k) const {
    const int D = model.num_compartments();
    std::vector<int> all(static_cast<std::size_t>(D));
    std::iota(all.begin(), all.end(), 0);
    switch (scenario) {
      case Scenario::SingleNonspatial:
      case Scenario::Two:
      case Scenario::Three: return species_rate(k);
      case Scenario::SingleSpatial: return spatial_rate(k, all, retained());
      case Scenario::Spatial: break;
    }
    switch (tag) {
      case SpatialCaseTag::Case1: return spatial_rate(k, all, retained());
      case SpatialCaseTag::Case2: return spatial_rate(k, all, c.fast);
      case SpatialCaseTag::Case3: return spatial_rate(k, all, c.slow);
      case SpatialCaseTag::Case4: return spatial_rate(k, all, {});
    }
    return {};
  }

  std::vector<int> retained() const {
    std::vector<int> r = c.discrete;
    r.insert(r.end(), c.continuous.begin(), c.continuous.end());
    std::sort(r.begin(), r.end());
    return r;
  }

  // -- levels ---------------------------------------------------------------

  std::unique_ptr<Level> make_level(const std::string& name, const std::vector<int>& species,
                                    const ReactionSet& ks, const LabeledMatrix& zeta, bool per_compartment) {
    auto L = std::make_unique<Level>();
    L->name = name;
    L->salt = mix64(std::hash<std::string>{}(name));
    const int D = model.num_compartments();
    std::map<int, int> row_of;
    for (std::size_t r = 0; r < zeta.rows.size(); ++r) row_of[zeta.rows[r]] = static_cast<int>(r);
    const bool spatial = scenario == Scenario::Spatial;
    auto coord_symbol = [&](int i, int d) {
      if (!spatial) return Symbol::species(i);
      return per_compartment ? Symbol::local(i, d) : Symbol::total(i);
    };
    for (int d = 0; d < (per_compartment ? D : 1); ++d)
      for (int i : species) {
        L->coords.push_back(coord_symbol(i, d));
        L->discrete.push_back(model.species[static_cast<std::size_t>(i)].discrete());
        L->labels.push_back(symbol_name(model, L->coords.back()));
      }
    std::map<Symbol, int> index;
    for (std::size_t r = 0; r < L->coords.size(); ++r) index[L->coords[r]] = static_cast<int>(r);
    for (std::size_t col = 0; col < zeta.cols.size(); ++col) {
      int k = zeta.cols[col];
      bool jump = std::binary_search(ks.discrete.begin(), ks.discrete.end(), k);
      for (int d = 0; d < (per_compartment ? D : 1); ++d) {
        Channel ch;
        ch.reaction = k;
        ch.compartment = per_compartment ? d : -1;
        ch.name = model.reactions[static_cast<std::size_t>(k)].name;
        if (per_compartment && spatial) ch.name += "@" + model.compartments[static_cast<std::size_t>(d)];
        ch.jump = jump;
        for (int i : species)
          if (int z = zeta.values[static_cast<std::size_t>(row_of.at(i))][col]; z != 0)
            ch.change.emplace_back(index.at(coord_symbol(i, d)), z);
        if (per_compartment && spatial) {
          const auto& kappa_zero = model.is_mass_action(k) && model.kappa(k, d) == 0.0;
          if (kappa_zero) continue;
        }
        L->channels.push_back(std::move(ch));
      }
    }
    return L;
  }

  Rate channel_rate(const Level& L, const Channel& ch) {
    if (L.child) return averaged_over(*L.child, ch.reaction);
    if (scenario == Scenario::Spatial && ch.compartment >= 0) {
      if (tag == SpatialCaseTag::Case3) return spatial_rate(ch.reaction, {ch.compartment}, c.slow);
      return spatial_rate(ch.reaction, {ch.compartment}, {});
    }
    return base_rate(ch.reaction);
  }

  /// Rate of k averaged over the stationary measure of `L` (given its context).
  Rate averaged_over(Level& L, int k) {
    Rate target = L.child ? averaged_over(*L.child, k) : base_rate(k);
    Rate out;
    if (L.laws && target.rf) out.rf = expect_laws(*target.rf, *L.laws);
    Level* lp = &L;
    out.field = [this, lp, target](const std::map<Symbol, double>& ctx) { return expect_numeric(*lp, target, ctx); };
    return out;
  }

  void finish_level(Level& L) {
    for (const auto& ch : L.channels) L.rates.push_back(channel_rate(L, ch));
    if (!conserved.empty() && &L == fast.get())
      L.why_not_analytic = "fast conserved quantities couple the fast species";
    else
      L.laws = birth_death_laws(L.coords, L.discrete, L.channels, L.rates, &L.why_not_analytic);
  }

  // -- numeric evaluation ----------------------------------------------------

  HybridSystem system_of(const Level& L, const std::map<Symbol, double>& ctx) const {
    HybridSystem sys;
    sys.labels = L.labels;
    std::map<Symbol, int> index;
    for (std::size_t r = 0; r < L.coords.size(); ++r) index[L.coords[r]] = static_cast<int>(r);
    for (std::size_t c2 = 0; c2 < L.channels.size(); ++c2) {
      const auto& ch = L.channels[c2];
      const auto& rate = L.rates[c2];
      RateFunction fn;
      if (rate.rf && !L.child) {
        auto bound = rate.rf->bind([&](const Symbol& s) -> std::optional<double> {
          if (s.kind == Symbol::Kind::Param) return param(s.index);
          if (index.count(s)) return std::nullopt;
          auto it = ctx.find(s);
          if (it == ctx.end()) throw ModelError("averaging context lacks a value for a symbol");
          return it->second;
        });
        auto compiled = std::make_shared<CompiledFunction>(
            bound, [&](const Symbol& s) { return index.count(s) ? index.at(s) : -1; },
            [](const Symbol&) -> double { throw ModelError("unbound symbol in a fast rate"); });
        fn = [compiled](const std::vector<double>& y) { return (*compiled)(y); };
      } else {
        auto field = rate.field;
        auto coords = L.coords;
        auto base = ctx;
        fn = [field, coords, base](const std::vector<double>& y) {
          auto full = base;
          for (std::size_t r = 0; r < coords.size(); ++r) full[coords[r]] = y[r];
          return field(full).value;
        };
      }
      if (ch.jump) {
        sys.jumps.push_back({ch.name, fn, ch.change});
      } else {
        FlowReaction f{ch.name, fn, {}};
        for (const auto& [r, z] : ch.change) f.drift.emplace_back(r, static_cast<double>(z));
        sys.flows.push_back(std::move(f));
      }
    }
    return sys;
  }

  /// Start of the fast chain: zero, or on the conservation surface.
  std::vector<double> start_of(const Level& L, const std::map<Symbol, double>& ctx) const {
    std::vector<double> x(L.coords.size(), 0.0);
    if (&L != fast.get() || conserved.empty()) return x;
    const std::size_t nf = c.fast.size();
    const std::size_t blocks = L.coords.size() / nf;
    for (std::size_t blk = 0; blk < blocks; ++blk)
      for (std::size_t j = 0; j < conserved.vectors.size(); ++j) {
        double total = conserved_movement ? ctx.at(Symbol{Symbol::Kind::Conserved, static_cast<int>(j),
                                                          static_cast<int>(blk)})
                                          : ctx.at(Symbol::conserved(static_cast<int>(j)));
        const auto& th = conserved.vectors[j];
        std::size_t pick = nf;
        for (std::size_t r = 0; r < nf && pick == nf; ++r) {
          if (th[r] <= 0) continue;
          bool own = true;
          for (std::size_t o = 0; o < conserved.vectors.size(); ++o)
            if (o != j && conserved.vectors[o][r] != 0) own = false;
          if (own) pick = r;
        }
        if (pick == nf)
          throw CaseUnavailable("cannot place the fast state on the conservation surface of quantity " +
                                std::to_string(j + 1));
        double v = total / static_cast<double>(th[pick]);
        if (L.discrete[blk * nf + pick] && std::fabs(v - std::round(v)) > 1e-9)
          throw ValidationError("conserved total " + std::to_string(j + 1) + " is not reachable with integer counts");
        x[blk * nf + pick] = L.discrete[blk * nf + pick] ? std::round(v) : v;
      }
    return x;
  }

  std::shared_ptr<StationaryMeasure> stationary(Level& L, const std::map<Symbol, double>& ctx) {
    std::vector<std::pair<Symbol, double>> key(ctx.begin(), ctx.end());
    {
      std::lock_guard lock(L.mutex);
      if (auto it = L.cache.find(key); it != L.cache.end()) return it->second;
    }
    auto sys = system_of(L, ctx);
    auto m = std::make_shared<StationaryMeasure>(
        empirical_stationary(sys, start_of(L, ctx), options.mc, hash_state(ctx, options.mc.seed ^ L.salt)));
    std::lock_guard lock(L.mutex);
    L.cache.emplace(std::move(key), m);
    return m;
  }

  bool use_closed_form(const Level& L) const { return options.mode == AveragingMode::Analytic && L.laws.has_value(); }

  RateValue expect_numeric(Level& L, const Rate& target, const std::map<Symbol, double>& ctx) {
    if (use_closed_form(L) && target.rf) {
      if (auto e = expect_laws(*target.rf, *L.laws)) return {e->evaluate(values_of(ctx)), 0.0};
    }
    auto mu = stationary(L, ctx);
    auto coords = L.coords;
    auto value = mu->expect([&](const std::vector<double>& y) {
      auto full = ctx;
      for (std::size_t r = 0; r < coords.size(); ++r) full[coords[r]] = y[r];
      return target.field(full).value;
    });
    if (L.child) {
      // Inner standard errors, averaged over this level and added in quadrature.
      auto se2 = mu->expect([&](const std::vector<double>& y) {
        auto full = ctx;
        for (std::size_t r = 0; r < coords.size(); ++r) full[coords[r]] = y[r];
        auto v = target.field(full);
        return v.se * v.se;
      });
      value.se = std::sqrt(value.se * value.se + se2.value);
    }
    return value;
  }

  // -- conserved movement (Cases 3/4) -----------------------------------------

  /// Per-compartment conserved amounts by the mean-field fixed point of the
  /// conserved-movement balance.
  std::map<Symbol, double> conserved_split(const std::map<Symbol, double>& ctx) {
    const int D = model.num_compartments();
    const std::size_t nf = c.fast.size(), J = conserved.vectors.size();
    std::vector<std::vector<double>> vc(J, std::vector<double>(static_cast<std::size_t>(D)));
    for (std::size_t j = 0; j < J; ++j)
      for (int d = 0; d < D; ++d) vc[j][static_cast<std::size_t>(d)] = ctx.at(Symbol::conserved(static_cast<int>(j))) / D;
    auto with = [&](const std::vector<std::vector<double>>& split) {
      auto full = ctx;
      for (std::size_t j = 0; j < J; ++j)
        for (int d = 0; d < D; ++d)
          full[Symbol{Symbol::Kind::Conserved, static_cast<int>(j), d}] = split[j][static_cast<std::size_t>(d)];
      return full;
    };
    for (int it = 0; it < 500; ++it) {
      auto full = with(vc);
      auto mu = stationary(*fast, full);
      std::vector<std::vector<double>> next(J, std::vector<double>(static_cast<std::size_t>(D), 0.0));
      for (std::size_t j = 0; j < J; ++j) {
        // Flux of quantity j from d to e: sum_i theta_i lambda^M_{i,d,e} E[v_id].
        std::vector<std::vector<double>> q(static_cast<std::size_t>(D), std::vector<double>(static_cast<std::size_t>(D), 0.0));
        for (const auto& mv : model.movements) {
          auto pos = std::find(c.fast.begin(), c.fast.end(), mv.species);
          if (pos == c.fast.end()) continue;
          auto r = static_cast<std::size_t>(pos - c.fast.begin());
          double th = static_cast<double>(conserved.vectors[j][r]);
          if (th == 0) continue;
          std::size_t coord = static_cast<std::size_t>(mv.from) * nf + r;
          double mean = mu->expect([coord](const std::vector<double>& y) { return y[coord]; }).value;
          double amount = vc[j][static_cast<std::size_t>(mv.from)];
          if (amount > 0)
            q[static_cast<std::size_t>(mv.from)][static_cast<std::size_t>(mv.to)] += th * mv.rate * mean / amount;
        }
        Model chain;
        chain.compartments = model.compartments;
        chain.species.push_back({"c", Exponent(0), Exponent(1)});
        for (int a = 0; a < D; ++a)
          for (int b = 0; b < D; ++b)
            if (q[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] > 0)
              chain.movements.push_back({0, a, b, q[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]});
        auto pi = chain.movements.empty() ? std::vector<double>(static_cast<std::size_t>(D), 1.0 / D)
                                          : movement_equilibrium(chain, 0);
        double total = ctx.at(Symbol::conserved(static_cast<int>(j)));
        for (int d = 0; d < D; ++d) next[j][static_cast<std::size_t>(d)] = total * pi[static_cast<std::size_t>(d)];
      }
      double change = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < J; ++j)
        for (int d = 0; d < D; ++d) {
          change = std::max(change, std::fabs(next[j][static_cast<std::size_t>(d)] - vc[j][static_cast<std::size_t>(d)]));
          scale = std::max(scale, std::fabs(next[j][static_cast<std::size_t>(d)]));
        }
      vc = next;
      if (change <= 1e-8 * std::max(scale, 1e-300)) return with(vc);
    }
    throw CaseUnavailable("conserved-movement fixed point did not converge in 500 iterations");
  }

  // -- public evaluation -----------------------------------------------------

  std::map<Symbol, double> context_of(const std::vector<double>& x) const {
    if (x.size() != symbols.size()) throw ModelError("reduced state has the wrong dimension");
    std::map<Symbol, double> ctx;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!(x[j] >= -1e-9) || !std::isfinite(x[j])) throw NegativeRate("reduced state must be finite and nonnegative");
      ctx[symbols[j]] = std::max(x[j], 0.0);
    }
    return ctx;
  }

  RateValue evaluate(int k, const Rate& rate, const std::vector<double>& x) {
    auto ctx = context_of(x);
    if (conserved_movement) ctx = conserved_split(ctx);
    if (outer.empty()) return rate.field(ctx);
    // Outer movement measure of the slow species (Cases 2 and 4).
    const int D = model.num_compartments();
    std::vector<double> totals;
    for (int i : outer) totals.push_back(ctx.at(Symbol::total(i)));
    ProductMeasure pm(model, *eq, outer, totals);
    std::vector<double> locals(static_cast<std::size_t>(model.num_species() * D), 0.0);
    auto at = [&] {
      auto full = ctx;
      for (int i : outer)
        for (int d = 0; d < D; ++d) full[Symbol::local(i, d)] = locals[static_cast<std::size_t>(i * D + d)];
      return rate.field(full);
    };
    if (pm.support_size() <= static_cast<double>(options.mc.exact_limit)) {
      RateValue acc;
      double var = 0.0;
      pm.for_each(locals, [&](double p) {
        auto v = at();
        acc.value += p * v.value;
        var += p * p * v.se * v.se;
      });
      acc.se = std::sqrt(var);
      return acc;
    }
    Rng rng(hash_state(ctx, options.mc.seed ^ 0x0ca7 ^ static_cast<std::uint64_t>(k)));
    const std::size_t n = options.mc.outer_samples;
    double s1 = 0.0, s2 = 0.0, inner = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      pm.sample(locals, rng);
      auto v = at();
      s1 += v.value;
      s2 += v.value * v.value;
      inner += v.se * v.se;
    }
    double mean = s1 / static_cast<double>(n);
    double var = std::max(0.0, s2 / static_cast<double>(n) - mean * mean) / static_cast<double>(n);
    return {mean, std::sqrt(var + inner / static_cast<double>(n) / static_cast<double>(n))};
  }

  Rate top_rate(int k) {
    if (scenario == Scenario::SingleNonspatial || scenario == Scenario::SingleSpatial) return base_rate(k);
    Level& L = scenario == Scenario::Three ? *middle : *fast;
    Rate r = averaged_over(L, k);
    if (r.rf && !outer.empty()) {
      r.rf = expect_movement(*r.rf, outer, model, *eq);
    }
    if (r.rf && conserved_movement) r.rf.reset();
    return r;
  }
};

Averager::Impl::Impl(const Model& m, const AveragingOptions& o) : model(m), options(o), c(classify(m)) {
  if (model.spatial()) eq = movement_equilibria(model);
  if (c.kind != ScaleKind::Single) conserved = conserved_basis(model, c);
  symbols = reduced_symbols(model, c, conserved);
  warnings = c.warnings;

  if (c.kind == ScaleKind::Single) {
    scenario = model.spatial() ? Scenario::SingleSpatial : Scenario::SingleNonspatial;
    return;
  }
  if (c.kind == ScaleKind::Three) {
    if (!conserved.empty())
      throw CaseUnavailable("three-scale reduction with fast conserved quantities is not supported");
    scenario = Scenario::Three;
    fast = make_level("fast", c.fast, c.k_fast, c.zeta_fast, false);
    finish_level(*fast);
    middle = make_level("middle", c.middle, c.k_middle, c.zeta_middle, false);
    middle->child = fast.get();
    finish_level(*middle);
    return;
  }
  if (!model.spatial()) {
    scenario = Scenario::Two;
    fast = make_level("fast", c.fast, c.k_fast, c.zeta_fast, false);
    finish_level(*fast);
    return;
  }
  scenario = Scenario::Spatial;
  tag = c.spatial_case->tag;
  bool per_compartment = tag == SpatialCaseTag::Case3 || tag == SpatialCaseTag::Case4;
  fast = make_level("fast", c.fast, c.k_fast, c.zeta_fast, per_compartment);
  finish_level(*fast);
  if (tag == SpatialCaseTag::Case2 || tag == SpatialCaseTag::Case4) outer = c.slow;
  conserved_movement = per_compartment && !conserved.empty();
}

std::vector<Symbol> reduced_symbols(const Model& m, const ScaleClassification& c, const ConservedBasis& conserved) {
  std::vector<int> coords;
  if (c.kind == ScaleKind::Single) {
    coords = c.discrete;
    coords.insert(coords.end(), c.continuous.begin(), c.continuous.end());
    std::sort(coords.begin(), coords.end());
  } else {
    coords = c.slow;
  }
  std::vector<Symbol> out;
  for (int i : coords) out.push_back(m.spatial() ? Symbol::total(i) : Symbol::species(i));
  for (std::size_t j = 0; j < conserved.vectors.size(); ++j) out.push_back(Symbol::conserved(static_cast<int>(j)));
  return out;
}

Averager::Averager(const Model& model, const AveragingOptions& options)
    : impl_(std::make_shared<Impl>(model, options)) {}
Averager::~Averager() = default;

const Model& Averager::model() const { return impl_->model; }
const ScaleClassification& Averager::classification() const { return impl_->c; }
const ConservedBasis& Averager::conserved() const { return impl_->conserved; }
const std::optional<MovementEquilibrium>& Averager::movement() const { return impl_->eq; }
const std::vector<Symbol>& Averager::symbols() const { return impl_->symbols; }
const std::vector<std::string>& Averager::warnings() const { return impl_->warnings; }

AveragedRate Averager::rate(int k) {
  auto impl = impl_;
  const auto& mdl = impl->model;
  if (k < 0 || k >= mdl.num_reactions()) throw ModelError("reaction index out of range");
  AveragedRate out;
  out.reaction = k;
  Rate r = impl->top_rate(k);
  const bool identity = impl->scenario == Impl::Scenario::SingleNonspatial;
  const bool mc_forced = impl->options.mode == AveragingMode::MonteCarlo && !identity &&
                         impl->scenario != Impl::Scenario::SingleSpatial;
  if (identity) {
    out.kind = AveragedRate::Kind::Exact;
    out.closed_form = r.rf;
  } else if (r.rf && !mc_forced) {
    out.kind = AveragedRate::Kind::Analytic;
    out.closed_form = r.rf;
  } else {
    out.kind = AveragedRate::Kind::MonteCarlo;
    if (impl->options.mode == AveragingMode::Analytic && impl->scenario != Impl::Scenario::SingleSpatial) {
      std::string why = impl->fast && !impl->fast->why_not_analytic.empty() ? impl->fast->why_not_analytic
                        : impl->middle && !impl->middle->why_not_analytic.empty()
                            ? impl->middle->why_not_analytic
                            : "the averaged rate has no closed form";
      impl->warnings.push_back("reaction '" + mdl.reactions[static_cast<std::size_t>(k)].name +
                               "': no analytic average (" + why + "); using Monte Carlo");
    }
  }
  if (out.closed_form) {
    auto f = *out.closed_form;
    out.evaluate = [impl, f](const std::vector<double>& x) {
      auto ctx = impl->context_of(x);
      double v = f.evaluate(impl->values_of(ctx));
      if (!std::isfinite(v) || v < -1e-12) throw NegativeRate("averaged rate evaluated to " + std::to_string(v));
      return RateValue{std::max(v, 0.0), 0.0};
    };
  } else {
    out.evaluate = [impl, k, r](const std::vector<double>& x) { return impl->evaluate(k, r, x); };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-function front ends

StationaryMeasure stationary_fast(const Model& m, const ScaleClassification& c, const std::vector<double>& frozen,
                                  AveragingMode mode, const MonteCarloOptions& options, const ConservedBasis* conserved,
                                  const std::vector<double>& conserved_totals) {
  if (m.spatial()) throw ModelError("stationary_fast expects a nonspatial model");
  if (frozen.size() != m.species.size()) throw ModelError("frozen state must list every species");
  bool has_conserved = conserved && !conserved->empty();
  auto sys = fast_subsystem(m, c, frozen);
  std::vector<double> x0(c.fast.size(), 0.0);
  if (has_conserved) {
    if (conserved_totals.size() != conserved->vectors.size()) throw ModelError("one total per conserved quantity");
    for (std::size_t j = 0; j < conserved->vectors.size(); ++j) {
      const auto& th = conserved->vectors[j];
      std::size_t pick = th.size();
      for (std::size_t r = 0; r < th.size() && pick == th.size(); ++r)
        if (th[r] > 0) pick = r;
      if (pick == th.size()) throw CaseUnavailable("conserved quantity has no positive component");
      x0[pick] = conserved_totals[j] / static_cast<double>(th[pick]);
    }
  }
  if (mode == AveragingMode::Analytic) {
    if (has_conserved) throw AnalyticUnavailable("fast conserved quantities couple the fast species");
    std::vector<Symbol> coords;
    std::vector<bool> discrete;
    std::map<int, int> row_of;
    for (std::size_t r = 0; r < c.fast.size(); ++r) {
      coords.push_back(Symbol::species(c.fast[r]));
      discrete.push_back(m.species[static_cast<std::size_t>(c.fast[r])].discrete());
      row_of[c.fast[r]] = static_cast<int>(r);
    }
    std::vector<Channel> channels;
    std::vector<Rate> rates;
    for (std::size_t col = 0; col < c.zeta_fast.cols.size(); ++col) {
      Channel ch;
      ch.reaction = c.zeta_fast.cols[col];
      ch.name = m.reactions[static_cast<std::size_t>(ch.reaction)].name;
      for (std::size_t r = 0; r < c.fast.size(); ++r)
        if (int z = c.zeta_fast.values[r][col]; z != 0) ch.change.emplace_back(static_cast<int>(r), z);
      channels.push_back(ch);
      rates.push_back(Rate{symbolic_rate(m, ch.reaction), {}});
    }
    std::string why;
    auto laws = birth_death_laws(coords, discrete, channels, rates, &why);
    if (!laws) throw AnalyticUnavailable(why);
    StationaryMeasure s;
    s.labels = sys.labels;
    bool all_poisson = true;
    SymbolValues vals = [&](const Symbol& sym) {
      return sym.kind == Symbol::Kind::Param ? m.params[static_cast<std::size_t>(sym.index)].value
                                             : frozen[static_cast<std::size_t>(sym.index)];
    };
    for (const auto& sym : coords) {
      const auto& law = laws->at(sym);
      all_poisson = all_poisson && law.poisson;
      s.values.push_back(law.mean.evaluate(vals));
    }
    bool none_poisson = true;
    for (const auto& sym : coords) none_poisson = none_poisson && !laws->at(sym).poisson;
    if (!all_poisson && !none_poisson) throw AnalyticUnavailable("fast tier mixes discrete and continuous species");
    s.kind = all_poisson ? StationaryMeasure::Kind::ProductPoisson : StationaryMeasure::Kind::PointMass;
    return s;
  }
  std::uint64_t h = mix64(options.seed);
  for (double v : frozen) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return empirical_stationary(sys, x0, options, h);
}

namespace {

AveragedRate checked_rate(const Model& m, int k, const AveragingOptions& o, ScaleKind want, bool spatial) {
  if (m.spatial() != spatial) throw ModelError(spatial ? "model is not spatial" : "model is spatial");
  Averager avg(m, o);
  if (avg.classification().kind != want) throw ModelError("model has a different number of time scales");
  const auto& slow = avg.classification().slow_reactions().all;
  if (!std::binary_search(slow.begin(), slow.end(), k))
    throw ModelError("reaction '" + m.reactions[static_cast<std::size_t>(k)].name + "' is not a slow reaction");
  return avg.rate(k);
}

}  // namespace

AveragedRate averaged_rate_single_scale(const Model& m, const MovementEquilibrium& eq, int k,
                                        const AveragingOptions& o) {
  (void)eq;
  return checked_rate(m, k, o, ScaleKind::Single, true);
}

AveragedRate averaged_rate_two_scale(const Model& m, const ScaleClassification&, int k, const AveragingOptions& o) {
  return checked_rate(m, k, o, ScaleKind::Two, false);
}

AveragedRate averaged_rate_three_scale(const Model& m, const ScaleClassification&, int k, const AveragingOptions& o) {
  return checked_rate(m, k, o, ScaleKind::Three, false);
}

AveragedRate averaged_rate_spatial(const Model& m, const ScaleClassification&, const MovementEquilibrium&, int k,
                                   const AveragingOptions& o) {
  return checked_rate(m, k, o, ScaleKind::Two, true);
}

}  // namespace mscrn
