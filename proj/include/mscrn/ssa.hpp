#pragma once

#include "mscrn/model.hpp"
#include "mscrn/trajectory.hpp"

#include <cstdint>
#include <vector>

namespace mscrn {

struct SimulationConfig {
  double N = 1.0;
  double t_end = 1.0;
  std::uint64_t seed = 0;
  /// Sample times; when empty every event is recorded.
  std::vector<double> grid;
  std::uint64_t max_events = 1'000'000'000;
  /// Keep the (time, reaction) log of every event.
  bool event_log = false;
};

/// Exact direct-method simulation of the finite-N chain: reaction k fires
/// at rate N^(beta_k+gamma) * lambda_k(N^-alpha X) and moves X by zeta_k.
/// Mass-action propensities use falling factorials of the raw counts, so
/// counts never become negative. Spatial models are dispatched to
/// simulate_spatial. `x0` may be raw or scaled; states are reported scaled.
Trajectory simulate(const Model& model, const SimulationConfig& config, const State& x0);

/// Simulation of the compartment model through movement_as_reactions; the
/// trajectory also carries the compartment sums S_i.
Trajectory simulate_spatial(const Model& model, const SimulationConfig& config, const State& x0);

/// Species (nonspatial) or species-in-compartment plus compartment sums.
std::vector<Observable> default_observables(const Model& model);

/// Replica r is simulated with seed stream_seed(config.seed, r).
EnsembleStats ssa_ensemble(const Model& model, const SimulationConfig& config, const State& x0, std::size_t replicas,
                           const std::vector<Observable>& observables, unsigned threads = 0);

}  // namespace mscrn
