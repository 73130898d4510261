#include "mscrn/pdmp.hpp"

#include "mscrn/error.hpp"
#include "mscrn/random.hpp"

#include <algorithm>
#include <array>
#include <memory>

namespace mscrn {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84;
constexpr double E1 = B1 - 5179.0 / 57600, E3 = B3 - 7571.0 / 16695, E4 = B4 - 393.0 / 640,
                 E5 = B5 - -92097.0 / 339200, E6 = B6 - 187.0 / 2100, E7 = -1.0 / 40;

double checked_rate(const std::string& name, double r) {
  if (!std::isfinite(r)) throw NegativeRate("rate of '" + name + "' is not finite");
  if (r < 0) {
    if (r > -1e-9) return 0.0;
    throw NegativeRate("rate of '" + name + "' is negative (" + std::to_string(r) + ")");
  }
  return r;
}

/// The flow augmented by the integrated hazard as its last coordinate.
class AugmentedFlow {
 public:
  explicit AugmentedFlow(const HybridSystem& s) : sys_(s), n_(s.dimension()) {}

  void operator()(const std::vector<double>& y, std::vector<double>& dy) const {
    std::fill(dy.begin(), dy.end(), 0.0);
    state_.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n_));
    for (const auto& f : sys_.flows) {
      double r = checked_rate(f.name, f.rate(state_));
      for (const auto& [i, d] : f.drift) dy[static_cast<std::size_t>(i)] += d * r;
    }
    double h = 0.0;
    for (const auto& j : sys_.jumps) h += checked_rate(j.name, j.rate(state_));
    dy[n_] = h;
  }

  std::size_t size() const { return n_ + 1; }

 private:
  const HybridSystem& sys_;
  std::size_t n_;
  mutable std::vector<double> state_;
};

struct Stepper {
  const AugmentedFlow& f;
  std::array<std::vector<double>, 7> k;
  std::vector<double> tmp;

  explicit Stepper(const AugmentedFlow& flow) : f(flow) {
    for (auto& v : k) v.resize(flow.size());
    tmp.resize(flow.size());
  }

  /// One step of size h from y; returns the weighted RMS error estimate.
  double step(const std::vector<double>& y, double h, std::vector<double>& out, const OdeConfig& cfg) {
    const std::size_t n = y.size();
    auto stage = [&](std::vector<double>& dst, std::initializer_list<std::pair<int, double>> terms) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = y[i];
        for (const auto& [j, a] : terms) s += h * a * k[static_cast<std::size_t>(j)][i];
        tmp[i] = s;
      }
      f(tmp, dst);
    };
    f(y, k[0]);
    stage(k[1], {{0, A21}});
    stage(k[2], {{0, A31}, {1, A32}});
    stage(k[3], {{0, A41}, {1, A42}, {2, A43}});
    stage(k[4], {{0, A51}, {1, A52}, {2, A53}, {3, A54}});
    stage(k[5], {{0, A61}, {1, A62}, {2, A63}, {3, A64}, {4, A65}});
    for (std::size_t i = 0; i < n; ++i)
      out[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    f(out, k[6]);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
      double sc = cfg.atol + cfg.rtol * std::max(std::fabs(y[i]), std::fabs(out[i]));
      err += (e / sc) * (e / sc);
    }
    return std::sqrt(err / static_cast<double>(n));
  }
};

std::size_t choose(const std::vector<double>& rates, double total, Rng& rng) {
  double target = rng.uniform() * total;
  std::size_t k = 0;
  double acc = rates[0];
  while (acc <= target && k + 1 < rates.size()) acc += rates[++k];
  while (rates[k] == 0.0 && k > 0) --k;
  return k;
}

}  // namespace

Trajectory simulate_pdmp(const HybridSystem& sys, const std::vector<double>& v0, const PdmpConfig& cfg) {
  const std::size_t n = sys.dimension();
  if (v0.size() != n) throw ModelError("initial state dimension does not match the hybrid system");
  for (double x : v0)
    if (x < 0) throw ModelError("initial state must be nonnegative");
  const auto& ode = cfg.ode;
  if (!(ode.rtol > 0 && ode.atol > 0 && ode.hazard_tol > 0)) throw ModelError("ODE tolerances must be positive");

  Trajectory tr;
  tr.labels = sys.labels;
  tr.event_counts.assign(sys.jumps.size(), 0);
  Rng rng(cfg.seed);

  std::vector<double> y(v0);
  y.push_back(0.0);  // integrated hazard
  std::vector<double> state(v0);
  auto current = [&]() -> const std::vector<double>& {
    std::copy_n(y.begin(), n, state.begin());
    return state;
  };
  const bool full = cfg.grid.empty();
  std::size_t next_grid = 0;
  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.states.emplace_back(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  };
  auto record_grid_upto = [&](double t) {
    while (!full && next_grid < cfg.grid.size() && cfg.grid[next_grid] <= t && cfg.grid[next_grid] <= cfg.t_end)
      record(cfg.grid[next_grid++]);
  };
  auto check_state = [&](double t) {
    for (std::size_t i = 0; i < n; ++i)
      if (y[i] < -ode.atol)
        throw NegativeRate("coordinate '" + sys.labels[i] + "' became negative (" + std::to_string(y[i]) +
                           ") at t=" + std::to_string(t));
  };
  std::vector<double> rates(sys.jumps.size());
  auto jump = [&](double t) {
    if (tr.events >= cfg.max_events) throw EventCapExceeded("more than " + std::to_string(cfg.max_events) + " jumps");
    double total = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) total += rates[k] = checked_rate(sys.jumps[k].name, sys.jumps[k].rate(current()));
    if (total <= 0) return;
    std::size_t k = choose(rates, total, rng);
    for (const auto& [i, z] : sys.jumps[k].change) {
      y[static_cast<std::size_t>(i)] += z;
      if (y[static_cast<std::size_t>(i)] < -ode.atol)
        throw NegativeRate("jump '" + sys.jumps[k].name + "' drove '" + sys.labels[static_cast<std::size_t>(i)] +
                           "' negative");
    }
    ++tr.events;
    ++tr.event_counts[k];
    if (cfg.event_log) {
      tr.event_reactions.push_back(static_cast<int>(k));
      tr.event_times.push_back(t);
    }
    if (full) record(t);
  };

  double t = 0.0;
  if (full) record(0.0);
  record_grid_upto(0.0);

  if (sys.flows.empty()) {
    // Rates are constant between jumps.
    for (;;) {
      double total = 0.0;
      for (const auto& j : sys.jumps) total += checked_rate(j.name, j.rate(current()));
      double t_next = total > 0 ? t + rng.exponential(total) : INFINITY;
      if (t_next > cfg.t_end) break;
      record_grid_upto(std::nextafter(t_next, 0.0));
      t = t_next;
      jump(t);
    }
    record_grid_upto(cfg.t_end);
    if (full && tr.times.back() < cfg.t_end) record(cfg.t_end);
    return tr;
  }

  AugmentedFlow flow(sys);
  Stepper stepper(flow);
  std::vector<double> y1(y.size()), probe(y.size());
  double threshold = rng.exponential(1.0);
  double h = std::min(ode.max_step, cfg.t_end > 0 ? cfg.t_end / 100 : 1.0);
  while (t < cfg.t_end) {
    double stop = cfg.t_end;
    if (!full && next_grid < cfg.grid.size()) stop = std::min(stop, cfg.grid[next_grid]);
    bool hits_stop = false;
    double step = h;
    if (t + step >= stop) {
      step = stop - t;
      hits_stop = true;
    }
    step = std::min(step, ode.max_step);
    double err = stepper.step(y, step, y1, ode);
    if (!(err <= 1.0)) {
      h = step * std::max(0.1, 0.9 * std::pow(std::isfinite(err) ? err : 1e10, -0.2));
      if (h < 1e-14 * std::max(1.0, t))
        throw OdeStepFailure("step size underflow at t=" + std::to_string(t));
      continue;
    }
    double grow = err > 0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;

    if (!sys.jumps.empty() && y1[n] >= threshold) {
      // Bisect on the step length for the hazard crossing.
      double lo = 0.0, hi = step;
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        stepper.step(y, mid, probe, ode);
        if (probe[n] < threshold) {
          lo = mid;
        } else {
          hi = mid;
          y1 = probe;
        }
        if (std::fabs(probe[n] - threshold) < ode.hazard_tol || hi - lo < 1e-15 * std::max(1.0, t)) break;
      }
      if (hi < step) stepper.step(y, hi, y1, ode);
      t += hi;
      y = y1;
      check_state(t);
      jump(t);
      y[n] = 0.0;
      threshold = rng.exponential(1.0);
      h = std::max(hi, step * 0.5);
      continue;
    }

    t = hits_stop ? stop : t + step;
    y = y1;
    check_state(t);
    record_grid_upto(t);
    if (!hits_stop || step >= h) h = step * grow;
  }
  record_grid_upto(cfg.t_end);
  if (full && tr.times.back() < cfg.t_end) record(cfg.t_end);
  return tr;
}

EnsembleStats pdmp_ensemble(const HybridSystem& system, const std::vector<double>& v0, const PdmpConfig& config,
                            std::size_t replicas, const std::vector<Observable>& observables, unsigned threads) {
  if (config.grid.empty()) throw ModelError("ensembles need a sample grid");
  return run_ensemble(
      [&](std::uint64_t r) {
        PdmpConfig c = config;
        c.seed = stream_seed(config.seed, r);
        c.event_log = false;
        return simulate_pdmp(system, v0, c);
      },
      replicas, observables, threads);
}

RateFunction make_rate_function(const Model& m, int k, const std::function<int(int)>& coordinate_of,
                                const std::vector<double>& frozen) {
  using algebra::Symbol;
  if (auto f = symbolic_rate(m, k)) {
    auto bound = f->bind([&](const Symbol& s) -> std::optional<double> {
      if (s.kind == Symbol::Kind::Param) return m.params[static_cast<std::size_t>(s.index)].value;
      if (coordinate_of(s.index) < 0) return frozen[static_cast<std::size_t>(s.index)];
      return std::nullopt;
    });
    auto compiled = std::make_shared<algebra::CompiledFunction>(
        bound, [&](const Symbol& s) { return coordinate_of(s.index); }, [](const Symbol&) { return 0.0; });
    return [compiled](const std::vector<double>& y) { return (*compiled)(y); };
  }
  std::vector<int> coords(m.species.size());
  for (int i = 0; i < m.num_species(); ++i) coords[static_cast<std::size_t>(i)] = coordinate_of(i);
  auto expr = m.expression(k, 0);
  auto params = m.params;
  return [expr, params, coords, frozen](const std::vector<double>& y) {
    return expr->evaluate([&](const Symbol& s) {
      if (s.kind == Symbol::Kind::Param) return params[static_cast<std::size_t>(s.index)].value;
      int c = coords[static_cast<std::size_t>(s.index)];
      return c < 0 ? frozen[static_cast<std::size_t>(s.index)] : y[static_cast<std::size_t>(c)];
    });
  };
}

HybridSystem fast_subsystem(const Model& m, const ScaleClassification& c, const std::vector<double>& frozen) {
  if (c.kind == ScaleKind::Single) throw ModelError("a single-scale model has no fast subsystem");
  std::vector<int> coord(m.species.size(), -1);
  HybridSystem sys;
  for (std::size_t r = 0; r < c.fast.size(); ++r) {
    coord[static_cast<std::size_t>(c.fast[r])] = static_cast<int>(r);
    sys.labels.push_back(m.species[static_cast<std::size_t>(c.fast[r])].name);
  }
  auto coordinate_of = [&](int i) { return coord[static_cast<std::size_t>(i)]; };
  for (std::size_t col = 0; col < c.zeta_fast.cols.size(); ++col) {
    int k = c.zeta_fast.cols[col];
    const auto& name = m.reactions[static_cast<std::size_t>(k)].name;
    auto rate = make_rate_function(m, k, coordinate_of, frozen);
    bool discrete = std::binary_search(c.k_fast.discrete.begin(), c.k_fast.discrete.end(), k);
    if (discrete) {
      JumpReaction j{name, rate, {}};
      for (std::size_t r = 0; r < c.fast.size(); ++r)
        if (int z = c.zeta_fast.values[r][col]; z != 0) j.change.emplace_back(static_cast<int>(r), z);
      sys.jumps.push_back(std::move(j));
    } else {
      FlowReaction f{name, rate, {}};
      for (std::size_t r = 0; r < c.fast.size(); ++r)
        if (int z = c.zeta_fast.values[r][col]; z != 0) f.drift.emplace_back(static_cast<int>(r), z);
      sys.flows.push_back(std::move(f));
    }
  }
  return sys;
}

Trajectory simulate_conditional_fast(const Model& m, const ScaleClassification& c, const std::vector<double>& frozen,
                                     const std::vector<double>& fast0, const PdmpConfig& config) {
  return simulate_pdmp(fast_subsystem(m, c, frozen), fast0, config);
}

}  // namespace mscrn
