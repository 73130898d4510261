#pragma once

#include "mscrn/model.hpp"
#include "mscrn/scale.hpp"
#include "mscrn/trajectory.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mscrn {

/// Rate as a function of the full coordinate vector of a hybrid system.
using RateFunction = std::function<double(const std::vector<double>&)>;

struct JumpReaction {
  std::string name;
  RateFunction rate;
  std::vector<std::pair<int, int>> change;  // (coordinate, integer jump)
};

struct FlowReaction {
  std::string name;
  RateFunction rate;
  std::vector<std::pair<int, double>> drift;  // (coordinate, velocity per unit rate)
};

/// Piecewise-deterministic process: the flow reactions drive an ODE, the
/// jump reactions fire as a time-inhomogeneous Poisson process.
struct HybridSystem {
  std::vector<std::string> labels;
  std::vector<JumpReaction> jumps;
  std::vector<FlowReaction> flows;

  std::size_t dimension() const { return labels.size(); }
};

struct OdeConfig {
  double rtol = 1e-6;
  double atol = 1e-9;
  double max_step = INFINITY;
  /// Accuracy of the integrated hazard when locating a jump.
  double hazard_tol = 1e-10;
};

struct PdmpConfig {
  double t_end = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> grid;  // empty: record every jump
  OdeConfig ode;
  std::uint64_t max_events = 100'000'000;
  bool event_log = false;
};

/// Simulates the hybrid system from v0. Between jumps the flow and the
/// integrated jump hazard H are advanced together with an adaptive
/// Dormand-Prince 5(4) pair; a jump happens when H reaches an Exp(1)
/// threshold, located by bisection. Systems without flows use exact
/// exponential waiting times.
Trajectory simulate_pdmp(const HybridSystem& system, const std::vector<double>& v0, const PdmpConfig& config);

/// Replica r uses seed stream_seed(config.seed, r).
EnsembleStats pdmp_ensemble(const HybridSystem& system, const std::vector<double>& v0, const PdmpConfig& config,
                            std::size_t replicas, const std::vector<Observable>& observables, unsigned threads = 0);

/// Rate of reaction k (scaled form) as a function of a coordinate vector:
/// species i is read from coordinate `coordinate_of(i)`, or from `frozen[i]`
/// when that is negative. Thread-safe; rational rates are compiled.
RateFunction make_rate_function(const Model& model, int reaction, const std::function<int(int)>& coordinate_of,
                                const std::vector<double>& frozen);

/// Fast subsystem of a multi-scale model with every non-fast species frozen
/// at `frozen` (scaled, species-indexed). Coordinates of the returned system
/// are the fast species in classification order; rates are evaluated with the
/// frozen values substituted.
HybridSystem fast_subsystem(const Model& model, const ScaleClassification& c, const std::vector<double>& frozen);

/// Simulates the fast species given frozen slower species, on the fast time scale.
Trajectory simulate_conditional_fast(const Model& model, const ScaleClassification& c,
                                     const std::vector<double>& frozen, const std::vector<double>& fast0,
                                     const PdmpConfig& config);

}  // namespace mscrn
