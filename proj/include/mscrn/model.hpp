#pragma once

#include "mscrn/algebra.hpp"
#include "mscrn/exponent.hpp"
#include "mscrn/expression.hpp"

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mscrn {

struct Species {
  std::string name;
  Exponent alpha{0};
  std::optional<Exponent> eta;

  bool discrete() const { return alpha == Exponent(0); }
  bool operator==(const Species&) const = default;
};

struct Parameter {
  std::string name;
  double value = 0.0;
  bool operator==(const Parameter&) const = default;
};

/// A rate constant is either a literal or a reference to a named parameter.
struct RateConstant {
  int param = -1;
  double literal = 0.0;

  static RateConstant of_param(int p) { return {p, 0.0}; }
  static RateConstant of_literal(double v) { return {-1, v}; }
  bool operator==(const RateConstant&) const = default;
};

/// Mass-action kinetics; `kappa` holds one entry shared by every
/// compartment or one entry per compartment.
struct MassAction {
  std::vector<RateConstant> kappa;
  bool operator==(const MassAction&) const = default;
};

/// Arbitrary expression over scaled amounts, one shared or one per compartment.
struct ExpressionLaw {
  std::vector<ExpressionPtr> per_compartment;
  bool operator==(const ExpressionLaw& o) const;
};

using RateLaw = std::variant<MassAction, ExpressionLaw>;

/// (species index, multiplicity) pairs sorted by species, multiplicity > 0.
using Complex = std::vector<std::pair<int, int>>;

struct Reaction {
  std::string name;
  Complex reactants;
  Complex products;
  Exponent beta{0};
  RateLaw rate;
  bool catalytic = false;

  int reactant_count(int species) const;
  int product_count(int species) const;
  int net_change(int species) const { return product_count(species) - reactant_count(species); }
  bool operator==(const Reaction&) const = default;
};

struct Movement {
  int species = 0;
  int from = 0;
  int to = 0;
  double rate = 0.0;
  bool operator==(const Movement&) const = default;
};

/// Initial scaled amount for a species, optionally in one compartment.
struct InitialValue {
  int species = 0;
  int compartment = -1;
  double value = 0.0;
  bool operator==(const InitialValue&) const = default;
};

/// A reaction network with scaling exponents; spatial when `compartments`
/// is nonempty. Immutable once validated.
struct Model {
  std::vector<Parameter> params;
  std::vector<Species> species;
  std::vector<std::string> compartments;
  std::vector<Reaction> reactions;
  std::vector<Movement> movements;
  Exponent gamma{0};
  std::vector<InitialValue> init;

  bool spatial() const { return !compartments.empty(); }
  int num_compartments() const { return compartments.empty() ? 1 : static_cast<int>(compartments.size()); }
  int num_species() const { return static_cast<int>(species.size()); }
  int num_reactions() const { return static_cast<int>(reactions.size()); }
  /// Index into per-compartment state vectors.
  int slot(int species_index, int compartment) const { return species_index * num_compartments() + compartment; }

  int find_species(std::string_view name) const;
  int find_param(std::string_view name) const;
  int find_compartment(std::string_view name) const;

  double constant_value(const RateConstant& c) const;
  /// Rate constant of a mass-action reaction in compartment d.
  double kappa(int reaction, int compartment) const;
  ExpressionPtr expression(int reaction, int compartment) const;
  bool is_mass_action(int reaction) const { return std::holds_alternative<MassAction>(reactions[reaction].rate); }

  /// Initial scaled state indexed by slot(); unspecified entries are zero.
  std::vector<double> initial_scaled() const;

  bool operator==(const Model&) const = default;
};

/// Checks the structural invariants; throws ValidationError.
void validate(const Model& model);

struct State {
  std::vector<double> values;
  bool scaled = true;
};

/// Raw counts X = N^alpha * V, rounded to integers.
State to_raw(const Model& model, const State& s, double N);
State to_scaled(const Model& model, const State& s, double N);

/// Rate of `reaction` in `compartment` (nullopt for nonspatial models).
/// Raw states use the combinatorial mass-action form for every species;
/// scaled states use it only for discrete species and monomials otherwise.
double evaluate_rate(const Model& model, int reaction, const State& state, std::optional<int> compartment = {});

/// Same rate as a symbolic function of Symbol::species(i) (scaled amounts)
/// and Symbol::param(j); nullopt for non-rational expressions.
std::optional<algebra::RationalFunction> symbolic_rate(const Model& model, int reaction, int compartment = 0);

/// Default printing of symbols: parameter and species names.
std::string symbol_name(const Model& model, const algebra::Symbol& s);
/// Resolves parameter names, species names, and `v<species>` aliases.
std::optional<algebra::Symbol> resolve_identifier(const Model& model, std::string_view id);

struct StoichiometricMatrix {
  std::vector<std::vector<int>> zeta;  // zeta[i][k]
  std::vector<bool> catalytic_only;    // per reaction: all-zero column
};

StoichiometricMatrix stoichiometric_matrix(const Model& model);

/// K_i = {k : zeta_ik != 0} for every species.
std::vector<std::vector<int>> species_reaction_sets(const Model& model);

}  // namespace mscrn
