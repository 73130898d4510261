#include "mscrn/model.hpp"

#include "mscrn/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mscrn {

using algebra::Polynomial;
using algebra::RationalFunction;
using algebra::Symbol;

bool ExpressionLaw::operator==(const ExpressionLaw& o) const {
  if (per_compartment.size() != o.per_compartment.size()) return false;
  for (std::size_t i = 0; i < per_compartment.size(); ++i)
    if (!(*per_compartment[i] == *o.per_compartment[i])) return false;
  return true;
}

namespace {

int count_in(const Complex& c, int species) {
  for (const auto& [s, n] : c)
    if (s == species) return n;
  return 0;
}

template <class T>
int find_named(const std::vector<T>& v, std::string_view name) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i].name == name) return static_cast<int>(i);
  return -1;
}

double falling(double x, int n) {
  double out = 1.0;
  for (int j = 0; j < n; ++j) out *= x - j;
  return out;
}

}  // namespace

int Reaction::reactant_count(int species) const { return count_in(reactants, species); }
int Reaction::product_count(int species) const { return count_in(products, species); }

int Model::find_species(std::string_view name) const { return find_named(species, name); }
int Model::find_param(std::string_view name) const { return find_named(params, name); }
int Model::find_compartment(std::string_view name) const {
  for (std::size_t i = 0; i < compartments.size(); ++i)
    if (compartments[i] == name) return static_cast<int>(i);
  return -1;
}

double Model::constant_value(const RateConstant& c) const {
  return c.param >= 0 ? params[static_cast<std::size_t>(c.param)].value : c.literal;
}

double Model::kappa(int reaction, int compartment) const {
  const auto& law = std::get<MassAction>(reactions[static_cast<std::size_t>(reaction)].rate);
  return constant_value(law.kappa.size() == 1 ? law.kappa[0] : law.kappa[static_cast<std::size_t>(compartment)]);
}

ExpressionPtr Model::expression(int reaction, int compartment) const {
  const auto& law = std::get<ExpressionLaw>(reactions[static_cast<std::size_t>(reaction)].rate);
  return law.per_compartment.size() == 1 ? law.per_compartment[0]
                                         : law.per_compartment[static_cast<std::size_t>(compartment)];
}

std::vector<double> Model::initial_scaled() const {
  std::vector<double> out(species.size() * static_cast<std::size_t>(num_compartments()), 0.0);
  for (const auto& iv : init) {
    if (iv.compartment >= 0)
      out[static_cast<std::size_t>(slot(iv.species, iv.compartment))] = iv.value;
    else
      for (int d = 0; d < num_compartments(); ++d) out[static_cast<std::size_t>(slot(iv.species, d))] = iv.value;
  }
  return out;
}

void validate(const Model& m) {
  if (m.species.empty()) throw ValidationError("model declares no species");
  std::set<std::string> names;
  for (const auto& p : m.params)
    if (!names.insert(p.name).second) throw ValidationError("duplicate name '" + p.name + "'");
  for (const auto& s : m.species) {
    if (!names.insert(s.name).second) throw ValidationError("duplicate name '" + s.name + "'");
    if (s.alpha < Exponent(0)) throw ValidationError("species '" + s.name + "' has negative alpha");
    if (s.eta && *s.eta <= Exponent(0)) throw ValidationError("species '" + s.name + "' has non-positive eta");
  }
  std::set<std::string> cnames(m.compartments.begin(), m.compartments.end());
  if (cnames.size() != m.compartments.size()) throw ValidationError("duplicate compartment name");
  std::set<std::string> rnames;
  const int D = m.num_compartments();
  for (int k = 0; k < m.num_reactions(); ++k) {
    const auto& r = m.reactions[static_cast<std::size_t>(k)];
    if (!rnames.insert(r.name).second) throw ValidationError("duplicate reaction name '" + r.name + "'");
    if (r.reactants.empty() && r.products.empty()) throw ValidationError("reaction '" + r.name + "' is empty");
    bool changes = false;
    for (int i = 0; i < m.num_species(); ++i) changes |= r.net_change(i) != 0;
    if (!changes && !r.catalytic)
      throw ValidationError("reaction '" + r.name + "' changes nothing; mark it catalytic");
    if (const auto* ma = std::get_if<MassAction>(&r.rate)) {
      if (ma->kappa.size() != 1 && static_cast<int>(ma->kappa.size()) != D)
        throw ValidationError("reaction '" + r.name + "' needs one rate constant per compartment");
      bool any = false;
      for (const auto& c : ma->kappa) {
        double v = m.constant_value(c);
        if (!(v >= 0) || !std::isfinite(v)) throw ValidationError("reaction '" + r.name + "' has a negative rate");
        any |= v > 0;
      }
      if (m.spatial() && !any) throw ValidationError("reaction '" + r.name + "' is zero in every compartment");
    } else {
      const auto& ex = std::get<ExpressionLaw>(r.rate);
      if (ex.per_compartment.size() != 1 && static_cast<int>(ex.per_compartment.size()) != D)
        throw ValidationError("reaction '" + r.name + "' needs one rate expression per compartment");
    }
  }
  for (const auto& p : m.params)
    if (!std::isfinite(p.value)) throw ValidationError("parameter '" + p.name + "' is not finite");
  for (const auto& mv : m.movements) {
    if (!m.spatial()) throw ValidationError("movement requires compartments");
    if (mv.from == mv.to) throw ValidationError("movement within one compartment");
    if (!(mv.rate >= 0) || !std::isfinite(mv.rate)) throw ValidationError("movement has a negative rate");
  }
  for (const auto& iv : m.init)
    if (!(iv.value >= 0)) throw ValidationError("negative initial value for '" + m.species[iv.species].name + "'");
}

State to_raw(const Model& m, const State& s, double N) {
  if (!s.scaled) return s;
  State out{s.values, false};
  const int D = m.num_compartments();
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    const auto& sp = m.species[j / static_cast<std::size_t>(D)];
    out.values[j] = std::round(s.values[j] * std::pow(N, to_double(sp.alpha)));
  }
  return out;
}

State to_scaled(const Model& m, const State& s, double N) {
  if (s.scaled) return s;
  State out{s.values, true};
  const int D = m.num_compartments();
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    const auto& sp = m.species[j / static_cast<std::size_t>(D)];
    out.values[j] = s.values[j] * std::pow(N, -to_double(sp.alpha));
  }
  return out;
}

double evaluate_rate(const Model& m, int reaction, const State& state, std::optional<int> compartment) {
  if (m.spatial() != compartment.has_value())
    throw ModelError("compartment must be given exactly for spatial models");
  const int D = m.num_compartments();
  const int d = compartment.value_or(0);
  if (state.values.size() != m.species.size() * static_cast<std::size_t>(D))
    throw ModelError("state dimension does not match the model");
  if (d < 0 || d >= D) throw ModelError("compartment out of range");
  const auto& r = m.reactions[static_cast<std::size_t>(reaction)];
  auto value = [&](int i) { return state.values[static_cast<std::size_t>(m.slot(i, d))]; };

  double rate = 0.0;
  if (m.is_mass_action(reaction)) {
    rate = m.kappa(reaction, d);
    for (const auto& [i, nu] : r.reactants) {
      double v = value(i);
      if (!state.scaled || m.species[static_cast<std::size_t>(i)].discrete())
        rate *= falling(v, nu) * (v < nu ? 0.0 : 1.0);
      else
        rate *= std::pow(v, nu);
    }
  } else {
    rate = m.expression(reaction, d)->evaluate([&](const Symbol& s) {
      return s.kind == Symbol::Kind::Param ? m.params[static_cast<std::size_t>(s.index)].value : value(s.index);
    });
  }
  if (!std::isfinite(rate) || rate < 0)
    throw RateEvaluationError("reaction '" + r.name + "' evaluated to " + std::to_string(rate));
  return rate;
}

std::optional<RationalFunction> symbolic_rate(const Model& m, int reaction, int compartment) {
  const auto& r = m.reactions[static_cast<std::size_t>(reaction)];
  if (m.is_mass_action(reaction)) {
    const auto& law = std::get<MassAction>(r.rate);
    const auto& c = law.kappa.size() == 1 ? law.kappa[0] : law.kappa[static_cast<std::size_t>(compartment)];
    Polynomial p = c.param >= 0 ? Polynomial::variable(Symbol::param(c.param)) : Polynomial(c.literal);
    for (const auto& [i, nu] : r.reactants) {
      auto sym = Symbol::species(i);
      p *= m.species[static_cast<std::size_t>(i)].discrete() ? algebra::falling_factorial(sym, nu)
                                                              : Polynomial::variable(sym, nu);
    }
    return RationalFunction(p);
  }
  return m.expression(reaction, compartment)->to_rational();
}

std::string symbol_name(const Model& m, const Symbol& s) {
  switch (s.kind) {
    case Symbol::Kind::Param: return m.params[static_cast<std::size_t>(s.index)].name;
    case Symbol::Kind::Species: return m.species[static_cast<std::size_t>(s.index)].name;
    case Symbol::Kind::Local:
      return m.species[static_cast<std::size_t>(s.index)].name + "@" +
             m.compartments[static_cast<std::size_t>(s.compartment)];
    case Symbol::Kind::Total: return "s" + m.species[static_cast<std::size_t>(s.index)].name;
    case Symbol::Kind::Conserved: return "c" + std::to_string(s.index + 1);
  }
  return {};
}

std::optional<Symbol> resolve_identifier(const Model& m, std::string_view id) {
  if (int p = m.find_param(id); p >= 0) return Symbol::param(p);
  if (int s = m.find_species(id); s >= 0) return Symbol::species(s);
  if (id.size() > 1 && id[0] == 'v')
    if (int s = m.find_species(id.substr(1)); s >= 0) return Symbol::species(s);
  return std::nullopt;
}

StoichiometricMatrix stoichiometric_matrix(const Model& m) {
  StoichiometricMatrix out;
  out.zeta.assign(m.species.size(), std::vector<int>(m.reactions.size(), 0));
  out.catalytic_only.assign(m.reactions.size(), true);
  for (int k = 0; k < m.num_reactions(); ++k)
    for (int i = 0; i < m.num_species(); ++i) {
      int z = m.reactions[static_cast<std::size_t>(k)].net_change(i);
      out.zeta[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = z;
      if (z != 0) out.catalytic_only[static_cast<std::size_t>(k)] = false;
    }
  return out;
}

std::vector<std::vector<int>> species_reaction_sets(const Model& m) {
  std::vector<std::vector<int>> out(m.species.size());
  for (int i = 0; i < m.num_species(); ++i)
    for (int k = 0; k < m.num_reactions(); ++k)
      if (m.reactions[static_cast<std::size_t>(k)].net_change(i) != 0) out[static_cast<std::size_t>(i)].push_back(k);
  return out;
}

}  // namespace mscrn
