#pragma once

#include "mscrn/averaging.hpp"
#include "mscrn/pdmp.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mscrn {

struct ReducedCoordinate {
  std::string label;  // vA, sA or c1
  algebra::Symbol symbol;
  bool discrete = false;
  Exponent alpha{0};
  /// Species name, or the conserved combination such as `G + G'`.
  std::string definition;
};

struct ReducedChannel {
  int reaction = -1;
  std::vector<std::pair<int, int>> change;  // (coordinate, integer change)
  bool jump = false;
  AveragedRate rate;
};

/// Limit dynamics of the slow (and conserved) coordinates.
struct ReducedModel {
  Model model;
  ScaleClassification classification;
  ConservedBasis conserved;
  std::vector<ReducedCoordinate> coordinates;
  std::vector<ReducedChannel> channels;
  std::vector<std::string> warnings;
  std::shared_ptr<Averager> averager;

  /// Reduced coordinates of the model's initial condition.
  std::vector<double> initial_state() const;
  std::vector<std::string> labels() const;
};

/// Single-scale nonspatial models keep their rates; everything else gets
/// averaged rates for K^s and the conserved reactions.
ReducedModel build_reduced_model(const Model& model, const AveragingOptions& options = {});

/// Throws MissingRates when a channel has no rate evaluator.
HybridSystem build_limit_system(const ReducedModel& reduced);

}  // namespace mscrn
