#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mscrn {

/// Sampled path of a simulation in scaled coordinates.
struct Trajectory {
  std::vector<std::string> labels;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  /// Compartment sums S_i per snapshot (spatial simulations only).
  std::vector<std::string> total_labels;
  std::vector<std::vector<double>> totals;

  std::vector<std::uint64_t> event_counts;  // per reaction
  std::vector<int> event_reactions;         // optional full event log
  std::vector<double> event_times;
  std::uint64_t events = 0;
};

/// Linear functional of a state vector, e.g. a species, a compartment sum
/// or a conserved combination.
struct Observable {
  std::string label;
  std::vector<std::pair<int, double>> weights;

  double operator()(const std::vector<double>& state) const {
    double s = 0.0;
    for (const auto& [i, w] : weights) s += w * state[static_cast<std::size_t>(i)];
    return s;
  }
};

/// One observable per state coordinate.
std::vector<Observable> coordinate_observables(const std::vector<std::string>& labels);

struct EnsembleStats {
  std::vector<std::string> labels;
  std::vector<double> times;
  std::size_t replicas = 0;
  // [observable][time]
  std::vector<std::vector<double>> mean, variance, q05, median, q95;

  double standard_error(std::size_t obs, std::size_t t) const;
};

/// Runs `replicas` independent simulations (replica r gets stream r) on
/// worker threads and reduces in replica order, so results do not depend on
/// scheduling. Every trajectory must be sampled on the same grid.
EnsembleStats run_ensemble(const std::function<Trajectory(std::uint64_t replica)>& simulate, std::size_t replicas,
                           const std::vector<Observable>& observables, unsigned threads = 0);

std::string trajectory_csv(const Trajectory& t);
std::string ensemble_csv(const EnsembleStats& s);
std::string trajectory_json(const Trajectory& t);
std::string ensemble_json(const EnsembleStats& s);

/// Evenly spaced grid 0, t_end/n, ..., t_end.
std::vector<double> uniform_grid(double t_end, int intervals);

}  // namespace mscrn
