#include "mscrn/ssa.hpp"

#include "mscrn/error.hpp"
#include "mscrn/random.hpp"
#include "mscrn/scale.hpp"

#include <cmath>

namespace mscrn {

namespace {

using algebra::Symbol;

/// Propensities of a nonspatial model at fixed N, evaluated on raw counts.
class Propensities {
 public:
  Propensities(const Model& m, double N) : model_(m) {
    scale_.resize(m.species.size());
    for (std::size_t i = 0; i < m.species.size(); ++i) scale_[i] = std::pow(N, -to_double(m.species[i].alpha));
    for (int k = 0; k < m.num_reactions(); ++k) {
      const auto& r = m.reactions[static_cast<std::size_t>(k)];
      Entry e;
      e.factor = std::pow(N, to_double(r.beta + m.gamma));
      if (m.is_mass_action(k)) {
        e.mass_action = true;
        e.factor *= m.kappa(k, 0);
        for (const auto& [i, nu] : r.reactants)
          e.terms.push_back({i, nu, std::pow(scale_[static_cast<std::size_t>(i)], nu)});
      } else {
        e.expression = m.expression(k, 0);
        if (auto f = e.expression->to_rational()) {
          e.compiled = algebra::CompiledFunction(
              *f, [](const Symbol& s) { return s.kind == Symbol::Kind::Species ? s.index : -1; },
              [&](const Symbol& s) { return m.params[static_cast<std::size_t>(s.index)].value; });
          e.has_compiled = true;
        }
      }
      for (int i = 0; i < m.num_species(); ++i)
        if (int z = r.net_change(i); z != 0) e.change.emplace_back(i, z);
      entries_.push_back(std::move(e));
    }
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<int, int>>& change(std::size_t k) const { return entries_[k].change; }
  double scale(int i) const { return scale_[static_cast<std::size_t>(i)]; }

  double operator()(std::size_t k, const std::vector<double>& x, const std::vector<double>& v) const {
    const auto& e = entries_[k];
    double a = e.factor;
    if (e.mass_action) {
      for (const auto& t : e.terms) {
        double xi = x[static_cast<std::size_t>(t.slot)];
        double ff = 1.0;
        for (int j = 0; j < t.nu; ++j) ff *= xi - j;
        a *= (xi < t.nu ? 0.0 : ff) * t.inv_scale;
      }
      return a;
    }
    double lambda = e.has_compiled ? e.compiled(v) : e.expression->evaluate([&](const Symbol& s) {
      return s.kind == Symbol::Kind::Param ? model_.params[static_cast<std::size_t>(s.index)].value
                                           : v[static_cast<std::size_t>(s.index)];
    });
    if (!std::isfinite(lambda) || lambda < 0)
      throw RateEvaluationError("reaction '" + model_.reactions[k].name + "' evaluated to " + std::to_string(lambda));
    return a * lambda;
  }

 private:
  struct Term {
    int slot;
    int nu;
    double inv_scale;
  };
  struct Entry {
    double factor = 1.0;
    bool mass_action = false;
    std::vector<Term> terms;
    ExpressionPtr expression;
    algebra::CompiledFunction compiled;
    bool has_compiled = false;
    std::vector<std::pair<int, int>> change;
  };
  const Model& model_;
  std::vector<double> scale_;
  std::vector<Entry> entries_;
};

}  // namespace

Trajectory simulate(const Model& model, const SimulationConfig& cfg, const State& x0) {
  if (model.spatial()) return simulate_spatial(model, cfg, x0);
  if (!(cfg.N >= 1.0)) throw ModelError("N must be at least 1");
  if (!std::isfinite(cfg.t_end) || cfg.t_end < 0) throw ModelError("t_end must be finite and nonnegative");
  if (x0.values.size() != model.species.size()) throw ModelError("initial state dimension does not match the model");

  Propensities prop(model, cfg.N);
  std::vector<double> x = to_raw(model, x0, cfg.N).values;
  for (double xi : x)
    if (xi < 0 || xi != std::floor(xi)) throw ModelError("initial raw counts must be nonnegative integers");
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v[i] = x[i] * prop.scale(static_cast<int>(i));

  Trajectory tr;
  for (const auto& s : model.species) tr.labels.push_back(s.name);
  tr.event_counts.assign(prop.size(), 0);
  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.states.push_back(v);
  };

  Rng rng(cfg.seed);
  std::vector<double> a(prop.size());
  std::size_t next_grid = 0;
  const bool full = cfg.grid.empty();
  if (full) record(0.0);
  double t = 0.0;
  for (;;) {
    double total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) total += a[k] = prop(k, x, v);
    double dt = total > 0 ? rng.exponential(total) : INFINITY;
    double t_next = t + dt;
    while (!full && next_grid < cfg.grid.size() && cfg.grid[next_grid] < t_next && cfg.grid[next_grid] <= cfg.t_end)
      record(cfg.grid[next_grid++]);
    if (t_next > cfg.t_end) break;
    if (tr.events >= cfg.max_events) throw EventCapExceeded("more than " + std::to_string(cfg.max_events) + " events");

    double target = rng.uniform() * total;
    std::size_t k = 0;
    double acc = a[0];
    while (acc <= target && k + 1 < a.size()) acc += a[++k];
    while (a[k] == 0.0 && k > 0) --k;  // guard against rounding at the upper end

    for (const auto& [i, z] : prop.change(k)) {
      auto si = static_cast<std::size_t>(i);
      x[si] += z;
      if (x[si] < 0)
        throw RateEvaluationError("reaction '" + model.reactions[k].name + "' drove '" + model.species[si].name +
                                  "' negative");
      v[si] = x[si] * prop.scale(i);
    }
    t = t_next;
    ++tr.events;
    ++tr.event_counts[k];
    if (cfg.event_log) {
      tr.event_reactions.push_back(static_cast<int>(k));
      tr.event_times.push_back(t);
    }
    if (full) record(t);
  }
  return tr;
}

Trajectory simulate_spatial(const Model& model, const SimulationConfig& cfg, const State& x0) {
  Model flat = movement_as_reactions(model);
  Trajectory tr = simulate(flat, cfg, x0);
  const int D = model.num_compartments();
  for (const auto& s : model.species) tr.total_labels.push_back("S_" + s.name);
  for (const auto& st : tr.states) {
    std::vector<double> sums(model.species.size(), 0.0);
    for (int i = 0; i < model.num_species(); ++i)
      for (int d = 0; d < D; ++d) sums[static_cast<std::size_t>(i)] += st[static_cast<std::size_t>(model.slot(i, d))];
    tr.totals.push_back(std::move(sums));
  }
  return tr;
}

std::vector<Observable> default_observables(const Model& model) {
  std::vector<Observable> out;
  const int D = model.num_compartments();
  for (int i = 0; i < model.num_species(); ++i) {
    const auto& name = model.species[static_cast<std::size_t>(i)].name;
    if (!model.spatial()) {
      out.push_back({name, {{i, 1.0}}});
      continue;
    }
    for (int d = 0; d < D; ++d)
      out.push_back({name + "@" + model.compartments[static_cast<std::size_t>(d)], {{model.slot(i, d), 1.0}}});
  }
  if (model.spatial())
    for (int i = 0; i < model.num_species(); ++i) {
      Observable s{"S_" + model.species[static_cast<std::size_t>(i)].name, {}};
      for (int d = 0; d < D; ++d) s.weights.emplace_back(model.slot(i, d), 1.0);
      out.push_back(std::move(s));
    }
  return out;
}

EnsembleStats ssa_ensemble(const Model& model, const SimulationConfig& config, const State& x0, std::size_t replicas,
                           const std::vector<Observable>& observables, unsigned threads) {
  if (config.grid.empty()) throw ModelError("ensembles need a sample grid");
  return run_ensemble(
      [&](std::uint64_t r) {
        SimulationConfig c = config;
        c.seed = stream_seed(config.seed, r);
        c.event_log = false;
        return simulate(model, c, x0);
      },
      replicas, observables, threads);
}

}  // namespace mscrn
