#include "mscrn/reduced.hpp"

#include "mscrn/error.hpp"

#include <algorithm>

namespace mscrn {

using algebra::Symbol;

namespace {

std::string combination(const Model& m, const std::vector<int>& species, const IntVector& theta) {
  std::string out;
  for (std::size_t r = 0; r < species.size(); ++r) {
    auto c = theta[r];
    if (c == 0) continue;
    if (!out.empty()) out += c < 0 ? " - " : " + ";
    else if (c < 0) out += "-";
    if (std::llabs(c) != 1) out += std::to_string(std::llabs(c)) + " ";
    out += m.species[static_cast<std::size_t>(species[r])].name;
  }
  return out;
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

ReducedModel build_reduced_model(const Model& model, const AveragingOptions& options) {
  ReducedModel out;
  out.model = model;
  out.averager = std::make_shared<Averager>(model, options);
  const auto& avg = *out.averager;
  out.classification = avg.classification();
  out.conserved = avg.conserved();
  const auto& c = out.classification;

  const auto& symbols = avg.symbols();
  for (const auto& sym : symbols) {
    ReducedCoordinate rc;
    rc.symbol = sym;
    if (sym.kind == Symbol::Kind::Conserved) {
      auto j = static_cast<std::size_t>(sym.index);
      rc.label = "c" + std::to_string(j + 1);
      rc.alpha = out.conserved.alpha[j];
      rc.discrete = rc.alpha == Exponent(0);
      rc.definition = combination(model, c.fast, out.conserved.vectors[j]);
    } else {
      const auto& sp = model.species[static_cast<std::size_t>(sym.index)];
      rc.label = (model.spatial() ? "s" : "v") + sp.name;
      rc.alpha = sp.alpha;
      rc.discrete = sp.discrete();
      rc.definition = sp.name;
    }
    out.coordinates.push_back(std::move(rc));
  }

  const auto& zeta = c.slow_matrix();
  const auto& ks = c.slow_reactions();
  std::vector<int> reactions = ks.all;
  for (int k : out.conserved.k_conserved.all)
    if (!contains(reactions, k)) reactions.push_back(k);
  std::sort(reactions.begin(), reactions.end());

  for (int k : reactions) {
    ReducedChannel ch;
    ch.reaction = k;
    for (std::size_t r = 0; r < out.coordinates.size(); ++r) {
      const auto& sym = out.coordinates[r].symbol;
      int z = sym.kind == Symbol::Kind::Conserved ? out.conserved.zeta_conserved.at(sym.index, k) : zeta.at(sym.index, k);
      if (z != 0) ch.change.emplace_back(static_cast<int>(r), z);
    }
    ch.jump = contains(ks.discrete, k) || contains(out.conserved.k_conserved.discrete, k);
    ch.rate = out.averager->rate(k);
    out.channels.push_back(std::move(ch));
  }
  out.warnings = out.averager->warnings();
  return out;
}

std::vector<double> ReducedModel::initial_state() const {
  auto scaled = model.initial_scaled();
  const int D = model.num_compartments();
  std::vector<double> species(model.species.size(), 0.0);
  for (int i = 0; i < model.num_species(); ++i)
    for (int d = 0; d < D; ++d) species[static_cast<std::size_t>(i)] += scaled[static_cast<std::size_t>(model.slot(i, d))];
  std::vector<double> out;
  for (const auto& rc : coordinates) {
    if (rc.symbol.kind == Symbol::Kind::Conserved)
      out.push_back(conserved.project(static_cast<std::size_t>(rc.symbol.index), classification.fast, species));
    else
      out.push_back(species[static_cast<std::size_t>(rc.symbol.index)]);
  }
  return out;
}

std::vector<std::string> ReducedModel::labels() const {
  std::vector<std::string> out;
  for (const auto& rc : coordinates) out.push_back(rc.label);
  return out;
}

HybridSystem build_limit_system(const ReducedModel& reduced) {
  HybridSystem sys;
  sys.labels = reduced.labels();
  for (const auto& ch : reduced.channels) {
    const auto& name = reduced.model.reactions[static_cast<std::size_t>(ch.reaction)].name;
    if (!ch.rate.evaluate) throw MissingRates("no averaged rate for reaction '" + name + "'");
    auto eval = ch.rate.evaluate;
    RateFunction fn = [eval](const std::vector<double>& x) { return eval(x).value; };
    if (ch.jump) {
      sys.jumps.push_back({name, fn, ch.change});
    } else {
      FlowReaction f{name, fn, {}};
      for (const auto& [r, z] : ch.change) f.drift.emplace_back(r, static_cast<double>(z));
      sys.flows.push_back(std::move(f));
    }
  }
  return sys;
}

}  // namespace mscrn
