#pragma once

#include "mscrn/model.hpp"

#include <string>
#include <string_view>

namespace mscrn {

struct ReducedModel;

/// Parses the line-oriented `.mscrn` format:
///
///   param k1 = 2.5
///   species P alpha=1 eta=2
///   compartments d1 d2
///   scaling gamma=0
///   reaction r1: G + P -> G' + P @ mass_action(k1) beta=0
///   reaction A -> @ {d1: k2*A, d2: 0.5*A} beta=1/2
///   move B from d1 to d2 rate 1.5
///   init A@d1 = 3
///
/// Throws ParseError for syntax problems and ValidationError for semantic ones.
Model parse_model(std::string_view text);

Model load_model(const std::string& path);

/// Canonical text; parse_model(serialize_model(m)) == m.
std::string serialize_model(const Model& model);

/// Text form of a reduced model: coordinates, their changes per reaction,
/// and each rate as a closed form over vX / sX / cJ, or `montecarlo`.
std::string serialize_reduced(const ReducedModel& reduced);

}  // namespace mscrn
