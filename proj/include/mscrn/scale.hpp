#pragma once

#include "mscrn/exponent.hpp"
#include "mscrn/lattice.hpp"
#include "mscrn/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mscrn {

enum class ScaleKind { Single, Two, Three };
enum class Tier { Slow, Middle, Fast, Dropped };
enum class SpatialCaseTag { Case1, Case2, Case3, Case4 };

const char* to_string(ScaleKind k);
const char* to_string(Tier t);
const char* to_string(SpatialCaseTag c);

/// Integer matrix with explicit row (species or conserved quantity) and
/// column (reaction) labels.
struct LabeledMatrix {
  std::vector<int> rows;
  std::vector<int> cols;
  IntMatrix values;

  /// Entry for (row label, column label); zero when either is absent.
  int at(int row, int col) const;
  bool operator==(const LabeledMatrix&) const = default;
};

/// Reaction set split by whether it changes discrete or continuous species.
struct ReactionSet {
  std::vector<int> all;
  std::vector<int> discrete;
  std::vector<int> continuous;
};

struct SpatialCase {
  SpatialCaseTag tag = SpatialCaseTag::Case1;
  Exponent eta_fast{0};
  Exponent eta_slow{0};
};

struct ScaleClassification {
  ScaleKind kind = ScaleKind::Single;
  /// Two: eps2 is the gap of the fast tier. Three: eps1 < eps2.
  Exponent eps1{0};
  Exponent eps2{0};
  /// beta_k + gamma.
  std::vector<Exponent> beta;
  std::vector<Tier> tier;  // per model species

  std::vector<int> dropped;
  std::vector<int> discrete;    // retained species with alpha = 0
  std::vector<int> continuous;  // retained species with alpha > 0
  std::vector<int> slow, middle, fast;

  /// Single-scale: K* and zeta* (all retained species as rows).
  ReactionSet k_star;
  LabeledMatrix zeta_star;

  ReactionSet k_fast, k_middle, k_slow;
  LabeledMatrix zeta_fast, zeta_middle, zeta_slow;

  std::optional<SpatialCase> spatial_case;
  std::vector<std::string> warnings;

  /// Reactions and matrix driving the slowest tier (K* / zeta* for single-scale).
  const ReactionSet& slow_reactions() const { return kind == ScaleKind::Single ? k_star : k_slow; }
  const LabeledMatrix& slow_matrix() const { return kind == ScaleKind::Single ? zeta_star : zeta_slow; }
};

/// Time-scale classification of the chemical network (compartments are
/// summed out; movement enters only through the spatial case).
ScaleClassification classify(const Model& model);

struct ConservedBasis {
  std::vector<IntVector> vectors;  // over classification.fast, in that order
  std::vector<Exponent> alpha;     // alpha_c per vector
  std::vector<std::vector<int>> k_theta;
  ReactionSet k_conserved;
  LabeledMatrix zeta_conserved;  // rows are basis indices

  bool empty() const { return vectors.empty(); }
  /// <theta_j, v> for a full species-indexed vector v.
  double project(std::size_t j, const std::vector<int>& fast_species, const std::vector<double>& v) const;
};

ConservedBasis conserved_basis(const Model& model, const ScaleClassification& c);

SpatialCase spatial_case(const Exponent& eta_fast, const Exponent& eta_slow);

/// Flat network over (species, compartment) pairs: species i in d becomes
/// `name@d`, reaction k in d becomes `name@d` with beta_k, and each positive
/// movement rate becomes a unary reaction with beta = alpha_i + eta_i.
Model movement_as_reactions(const Model& spatial);

}  // namespace mscrn
