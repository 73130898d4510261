#include "mscrn/scale.hpp"

#include "mscrn/error.hpp"

#include <algorithm>
#include <set>

namespace mscrn {

const char* to_string(ScaleKind k) {
  switch (k) {
    case ScaleKind::Single: return "single";
    case ScaleKind::Two: return "two";
    case ScaleKind::Three: return "three";
  }
  return "";
}

const char* to_string(Tier t) {
  switch (t) {
    case Tier::Slow: return "slow";
    case Tier::Middle: return "middle";
    case Tier::Fast: return "fast";
    case Tier::Dropped: return "dropped";
  }
  return "";
}

const char* to_string(SpatialCaseTag c) {
  switch (c) {
    case SpatialCaseTag::Case1: return "case1";
    case SpatialCaseTag::Case2: return "case2";
    case SpatialCaseTag::Case3: return "case3";
    case SpatialCaseTag::Case4: return "case4";
  }
  return "";
}

int LabeledMatrix::at(int row, int col) const {
  auto r = std::find(rows.begin(), rows.end(), row);
  auto c = std::find(cols.begin(), cols.end(), col);
  if (r == rows.end() || c == cols.end()) return 0;
  return values[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - cols.begin())];
}

namespace {

const Exponent kZero(0);

std::vector<int> sorted_unique(std::set<int> s) { return {s.begin(), s.end()}; }

/// Reactions and effective matrix for one tier whose species all have
/// max_k beta_k = alpha_i + gap.
void build_tier(const Model& m, const std::vector<std::vector<int>>& K, const StoichiometricMatrix& z,
                const std::vector<Exponent>& beta, const std::vector<int>& species, const Exponent& gap,
                ReactionSet& set, LabeledMatrix& matrix) {
  std::set<int> all, disc, cont;
  std::vector<std::set<int>> per_species(species.size());
  for (std::size_t r = 0; r < species.size(); ++r) {
    int i = species[r];
    const auto& sp = m.species[static_cast<std::size_t>(i)];
    for (int k : K[static_cast<std::size_t>(i)]) {
      if (beta[static_cast<std::size_t>(k)] != sp.alpha + gap) continue;
      per_species[r].insert(k);
      all.insert(k);
      (sp.discrete() ? disc : cont).insert(k);
    }
  }
  set.all = sorted_unique(all);
  set.discrete = sorted_unique(disc);
  set.continuous = sorted_unique(cont);
  matrix.rows = species;
  matrix.cols = set.all;
  matrix.values.assign(species.size(), std::vector<int>(set.all.size(), 0));
  for (std::size_t r = 0; r < species.size(); ++r)
    for (std::size_t c = 0; c < set.all.size(); ++c)
      if (per_species[r].count(set.all[c]))
        matrix.values[r][c] = z.zeta[static_cast<std::size_t>(species[r])][static_cast<std::size_t>(set.all[c])];
}

}  // namespace

ScaleClassification classify(const Model& m) {
  ScaleClassification out;
  for (const auto& r : m.reactions) out.beta.push_back(r.beta + m.gamma);
  const auto K = species_reaction_sets(m);
  const auto z = stoichiometric_matrix(m);

  std::vector<std::optional<Exponent>> gap(m.species.size());
  std::set<Exponent> gaps;
  for (int i = 0; i < m.num_species(); ++i) {
    const auto& sp = m.species[static_cast<std::size_t>(i)];
    if (K[static_cast<std::size_t>(i)].empty()) {
      out.dropped.push_back(i);
      out.warnings.push_back("species '" + sp.name + "' is changed by no reaction; treated as constant and dropped");
      continue;
    }
    Exponent top = out.beta[static_cast<std::size_t>(K[static_cast<std::size_t>(i)][0])];
    for (int k : K[static_cast<std::size_t>(i)]) top = std::max(top, out.beta[static_cast<std::size_t>(k)]);
    Exponent g = top - sp.alpha;
    if (g < kZero)
      throw UnclassifiableError("species '" + sp.name + "' has negative gap " + format_exponent(g) +
                                " (changes slower than its own time scale)");
    gap[static_cast<std::size_t>(i)] = g;
    gaps.insert(g);
  }
  if (gaps.empty()) throw UnclassifiableError("no species is changed by any reaction");
  if (!gaps.count(kZero)) throw UnclassifiableError("no species changes on the slowest time scale");
  if (gaps.size() > 3) throw UnclassifiableError("more than three time scales");

  std::vector<Exponent> sorted(gaps.begin(), gaps.end());
  out.kind = sorted.size() == 1 ? ScaleKind::Single : sorted.size() == 2 ? ScaleKind::Two : ScaleKind::Three;
  if (out.kind == ScaleKind::Two) out.eps1 = out.eps2 = sorted[1];
  if (out.kind == ScaleKind::Three) {
    out.eps1 = sorted[1];
    out.eps2 = sorted[2];
  }

  out.tier.assign(m.species.size(), Tier::Dropped);
  for (int i = 0; i < m.num_species(); ++i) {
    if (!gap[static_cast<std::size_t>(i)]) continue;
    const Exponent& g = *gap[static_cast<std::size_t>(i)];
    Tier t = g == kZero ? Tier::Slow : g == out.eps2 ? Tier::Fast : Tier::Middle;
    out.tier[static_cast<std::size_t>(i)] = t;
    (t == Tier::Slow ? out.slow : t == Tier::Fast ? out.fast : out.middle).push_back(i);
    (m.species[static_cast<std::size_t>(i)].discrete() ? out.discrete : out.continuous).push_back(i);
  }

  if (out.kind == ScaleKind::Single) {
    build_tier(m, K, z, out.beta, out.slow, kZero, out.k_star, out.zeta_star);
  } else {
    build_tier(m, K, z, out.beta, out.fast, out.eps2, out.k_fast, out.zeta_fast);
    build_tier(m, K, z, out.beta, out.slow, kZero, out.k_slow, out.zeta_slow);
    if (out.kind == ScaleKind::Three)
      build_tier(m, K, z, out.beta, out.middle, out.eps1, out.k_middle, out.zeta_middle);
  }

  if (m.spatial() && out.kind != ScaleKind::Single) {
    if (out.kind == ScaleKind::Three) throw UnclassifiableError("spatial models support at most two time scales");
    auto tier_eta = [&](const std::vector<int>& species, const char* label) {
      std::optional<Exponent> eta;
      for (int i : species) {
        const auto& sp = m.species[static_cast<std::size_t>(i)];
        if (!sp.eta) throw ValidationError("species '" + sp.name + "' needs an eta in a spatial model");
        if (eta && *eta != *sp.eta)
          throw HeterogeneousEtaError(std::string(label) + " species do not share one movement exponent");
        eta = sp.eta;
      }
      return *eta;
    };
    // Exponents are rescaled so that the fast reactions run at rate N.
    out.spatial_case = spatial_case(tier_eta(out.fast, "fast") / out.eps2, tier_eta(out.slow, "slow") / out.eps2);
  }
  return out;
}

double ConservedBasis::project(std::size_t j, const std::vector<int>& fast_species,
                               const std::vector<double>& v) const {
  double s = 0.0;
  for (std::size_t r = 0; r < fast_species.size(); ++r)
    s += static_cast<double>(vectors[j][r]) * v[static_cast<std::size_t>(fast_species[r])];
  return s;
}

ConservedBasis conserved_basis(const Model& m, const ScaleClassification& c) {
  if (c.kind == ScaleKind::Single) throw ModelError("conserved quantities need a multi-scale classification");
  ConservedBasis out;
  out.vectors = integer_left_null_space(c.zeta_fast.values, c.fast.size());
  const auto z = stoichiometric_matrix(m);
  std::set<int> all, disc, cont;
  for (std::size_t j = 0; j < out.vectors.size(); ++j) {
    const auto& theta = out.vectors[j];
    std::optional<Exponent> alpha;
    for (std::size_t r = 0; r < c.fast.size(); ++r) {
      if (theta[r] == 0) continue;
      const auto& a = m.species[static_cast<std::size_t>(c.fast[r])].alpha;
      if (alpha && *alpha != a)
        throw MixedAlphaError("a conserved combination of fast species mixes different abundance exponents");
      alpha = a;
    }
    out.alpha.push_back(*alpha);
    std::vector<int> kt;
    for (int k = 0; k < m.num_reactions(); ++k) {
      std::int64_t change = 0;
      for (std::size_t r = 0; r < c.fast.size(); ++r)
        change += theta[r] * z.zeta[static_cast<std::size_t>(c.fast[r])][static_cast<std::size_t>(k)];
      if (change == 0) continue;
      const auto& b = c.beta[static_cast<std::size_t>(k)];
      if (b > *alpha)
        throw TimescaleViolation("conserved quantity " + std::to_string(j + 1) + " is changed faster than the slow time scale by reaction '" +
                                 m.reactions[static_cast<std::size_t>(k)].name + "'");
      if (b == *alpha) kt.push_back(k);
    }
    for (int k : kt) {
      all.insert(k);
      (*alpha == kZero ? disc : cont).insert(k);
    }
    out.k_theta.push_back(std::move(kt));
  }
  out.k_conserved = {sorted_unique(all), sorted_unique(disc), sorted_unique(cont)};
  for (int k : out.k_conserved.all)
    if (std::find(c.k_slow.all.begin(), c.k_slow.all.end(), k) != c.k_slow.all.end())
      throw OverlapError("reaction '" + m.reactions[static_cast<std::size_t>(k)].name +
                         "' changes both a conserved quantity and a slow species");

  auto& zc = out.zeta_conserved;
  for (std::size_t j = 0; j < out.vectors.size(); ++j) zc.rows.push_back(static_cast<int>(j));
  zc.cols = out.k_conserved.all;
  zc.values.assign(out.vectors.size(), std::vector<int>(zc.cols.size(), 0));
  for (std::size_t j = 0; j < out.vectors.size(); ++j)
    for (std::size_t col = 0; col < zc.cols.size(); ++col) {
      int k = zc.cols[col];
      if (std::find(out.k_theta[j].begin(), out.k_theta[j].end(), k) == out.k_theta[j].end()) continue;
      std::int64_t change = 0;
      for (std::size_t r = 0; r < c.fast.size(); ++r)
        change += out.vectors[j][r] * z.zeta[static_cast<std::size_t>(c.fast[r])][static_cast<std::size_t>(k)];
      zc.values[j][col] = static_cast<int>(change);
    }
  return out;
}

SpatialCase spatial_case(const Exponent& eta_fast, const Exponent& eta_slow) {
  const Exponent one(1);
  if (eta_fast <= kZero || eta_slow <= kZero) throw ValidationError("movement exponents must be positive");
  if (eta_fast == one || eta_slow == one)
    throw DegenerateEtaError("movement on exactly the fast reaction time scale (eta = 1) is not supported");
  SpatialCase out{SpatialCaseTag::Case1, eta_fast, eta_slow};
  bool fast_above = eta_fast > one, slow_above = eta_slow > one;
  if (fast_above && slow_above)
    out.tag = SpatialCaseTag::Case1;
  else if (fast_above)
    out.tag = SpatialCaseTag::Case2;
  else if (slow_above)
    out.tag = SpatialCaseTag::Case3;
  else
    out.tag = SpatialCaseTag::Case4;
  return out;
}

Model movement_as_reactions(const Model& s) {
  Model flat;
  const int D = s.num_compartments();
  flat.params = s.params;
  flat.gamma = s.gamma;
  auto cname = [&](int d) { return s.spatial() ? s.compartments[static_cast<std::size_t>(d)] : std::string("0"); };
  for (const auto& sp : s.species)
    for (int d = 0; d < D; ++d) flat.species.push_back({sp.name + "@" + cname(d), sp.alpha, std::nullopt});

  for (int k = 0; k < s.num_reactions(); ++k) {
    const auto& r = s.reactions[static_cast<std::size_t>(k)];
    for (int d = 0; d < D; ++d) {
      Reaction fr;
      fr.name = r.name + "@" + cname(d);
      for (const auto& [i, n] : r.reactants) fr.reactants.emplace_back(s.slot(i, d), n);
      for (const auto& [i, n] : r.products) fr.products.emplace_back(s.slot(i, d), n);
      fr.beta = r.beta;
      fr.catalytic = r.catalytic;
      if (const auto* ma = std::get_if<MassAction>(&r.rate)) {
        fr.rate = MassAction{{ma->kappa.size() == 1 ? ma->kappa[0] : ma->kappa[static_cast<std::size_t>(d)]}};
      } else {
        auto e = map_symbols(s.expression(k, d), [&](const algebra::Symbol& sym) {
          return sym.kind == algebra::Symbol::Kind::Species ? algebra::Symbol::species(s.slot(sym.index, d)) : sym;
        });
        fr.rate = ExpressionLaw{{e}};
      }
      flat.reactions.push_back(std::move(fr));
    }
  }
  for (const auto& mv : s.movements) {
    if (mv.rate == 0.0) continue;
    const auto& sp = s.species[static_cast<std::size_t>(mv.species)];
    if (!sp.eta) throw ValidationError("species '" + sp.name + "' moves but has no eta");
    Reaction fr;
    fr.name = "move_" + sp.name + "_" + cname(mv.from) + "_" + cname(mv.to);
    fr.reactants = {{s.slot(mv.species, mv.from), 1}};
    fr.products = {{s.slot(mv.species, mv.to), 1}};
    fr.beta = sp.alpha + *sp.eta;
    fr.rate = MassAction{{RateConstant::of_literal(mv.rate)}};
    flat.reactions.push_back(std::move(fr));
  }
  for (const auto& iv : s.init) {
    if (iv.compartment >= 0) {
      flat.init.push_back({s.slot(iv.species, iv.compartment), -1, iv.value});
    } else {
      for (int d = 0; d < D; ++d) flat.init.push_back({s.slot(iv.species, d), -1, iv.value});
    }
  }
  return flat;
}

}  // namespace mscrn
