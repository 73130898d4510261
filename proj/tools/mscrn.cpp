// Command-line front end: analyze, simulate, reduce, avg-rates, verify.

#include "mscrn/averaging.hpp"
#include "mscrn/error.hpp"
#include "mscrn/format.hpp"
#include "mscrn/parser.hpp"
#include "mscrn/pdmp.hpp"
#include "mscrn/reduced.hpp"
#include "mscrn/scale.hpp"
#include "mscrn/ssa.hpp"
#include "mscrn/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace mscrn;
using Json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::size_t replicas = 1;
  int grid = 100;
  std::string out;
  std::string format = "json";
  std::uint64_t budget = 100'000;
  std::string mode = "analytic";
};

void emit(const Globals& g, const std::string& text, const std::string& suffix = "") {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::string path = g.out + suffix;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ModelError("cannot write '" + path + "'");
  f << text;
}

AveragingOptions averaging_options(const Globals& g) {
  AveragingOptions o;
  o.mode = g.mode == "montecarlo" ? AveragingMode::MonteCarlo : AveragingMode::Analytic;
  o.mc.budget = g.budget;
  o.mc.seed = g.seed;
  return o;
}

std::vector<std::string> names(const Model& m, const std::vector<int>& idx, bool species) {
  std::vector<std::string> out;
  for (int i : idx)
    out.push_back(species ? m.species[static_cast<std::size_t>(i)].name : m.reactions[static_cast<std::size_t>(i)].name);
  return out;
}

Json reaction_set(const Model& m, const ReactionSet& s) {
  return {{"all", names(m, s.all, false)}, {"discrete", names(m, s.discrete, false)},
          {"continuous", names(m, s.continuous, false)}};
}

Json matrix(const Model& m, const LabeledMatrix& z, bool species_rows) {
  Json rows = Json::array();
  for (int r : z.rows)
    rows.push_back(species_rows ? m.species[static_cast<std::size_t>(r)].name : "c" + std::to_string(r + 1));
  return {{"rows", rows}, {"columns", names(m, z.cols, false)}, {"values", z.values}};
}

std::string analyze_json(const Model& m) {
  auto c = classify(m);
  Json j;
  j["scales"] = to_string(c.kind);
  j["eps1"] = format_exponent(c.eps1);
  j["eps2"] = format_exponent(c.eps2);
  Json tiers;
  for (std::size_t i = 0; i < m.species.size(); ++i) tiers[m.species[i].name] = to_string(c.tier[i]);
  j["tiers"] = tiers;
  j["species"] = {{"discrete", names(m, c.discrete, true)},
                  {"continuous", names(m, c.continuous, true)},
                  {"dropped", names(m, c.dropped, true)}};
  if (c.kind == ScaleKind::Single) {
    j["k_star"] = reaction_set(m, c.k_star);
    j["zeta_star"] = matrix(m, c.zeta_star, true);
  } else {
    j["slow"] = names(m, c.slow, true);
    if (c.kind == ScaleKind::Three) j["middle"] = names(m, c.middle, true);
    j["fast"] = names(m, c.fast, true);
    j["k_slow"] = reaction_set(m, c.k_slow);
    if (c.kind == ScaleKind::Three) j["k_middle"] = reaction_set(m, c.k_middle);
    j["k_fast"] = reaction_set(m, c.k_fast);
    j["zeta_slow"] = matrix(m, c.zeta_slow, true);
    if (c.kind == ScaleKind::Three) j["zeta_middle"] = matrix(m, c.zeta_middle, true);
    j["zeta_fast"] = matrix(m, c.zeta_fast, true);
    auto basis = conserved_basis(m, c);
    Json cons = Json::array();
    for (std::size_t q = 0; q < basis.vectors.size(); ++q) {
      Json theta;
      for (std::size_t r = 0; r < c.fast.size(); ++r)
        theta[m.species[static_cast<std::size_t>(c.fast[r])].name] = basis.vectors[q][r];
      cons.push_back({{"name", "c" + std::to_string(q + 1)},
                      {"theta", theta},
                      {"alpha", format_exponent(basis.alpha[q])},
                      {"reactions", names(m, basis.k_theta[q], false)}});
    }
    j["conserved"] = cons;
    if (!basis.empty()) j["zeta_conserved"] = matrix(m, basis.zeta_conserved, false);
  }
  if (c.spatial_case)
    j["spatial_case"] = {{"case", to_string(c.spatial_case->tag)},
                         {"eta_fast", format_exponent(c.spatial_case->eta_fast)},
                         {"eta_slow", format_exponent(c.spatial_case->eta_slow)}};
  j["warnings"] = c.warnings;
  return j.dump(2) + "\n";
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw CLI::ValidationError("bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string render(const Globals& g, const Trajectory& t) {
  return g.format == "csv" ? trajectory_csv(t) : trajectory_json(t);
}
std::string render(const Globals& g, const EnsembleStats& s) {
  return g.format == "csv" ? ensemble_csv(s) : ensemble_json(s);
}

/// Cartesian grid lo:hi:n over every reduced coordinate, or explicit states.
std::vector<std::vector<double>> rate_states(std::size_t dim, const std::string& range,
                                             const std::vector<std::string>& states) {
  std::vector<std::vector<double>> out;
  if (!states.empty()) {
    for (const auto& s : states) {
      auto v = parse_list(s);
      if (v.size() != dim) throw CLI::ValidationError("state '" + s + "' needs " + std::to_string(dim) + " values");
      out.push_back(v);
    }
    return out;
  }
  double lo = 0, hi = 0;
  int n = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(range);
  if (!(in >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1)
    throw CLI::ValidationError("range must look like lo:hi:n");
  std::vector<double> axis;
  for (int i = 0; i < n; ++i) axis.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  std::vector<double> cur(dim);
  std::function<void(std::size_t)> rec = [&](std::size_t d) {
    if (d == dim) {
      out.push_back(cur);
      return;
    }
    for (double a : axis) {
      cur[d] = a;
      rec(d + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale stochastic reaction networks: classification, simulation, averaging, verification"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master random seed");
  app.add_option("--replicas", g.replicas, "Ensemble size")->check(CLI::PositiveNumber);
  app.add_option("--grid", g.grid, "Number of sampling intervals on [0, t-end]")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output file (prefix for verify)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--budget", g.budget, "Monte Carlo events per stationary estimate")->check(CLI::PositiveNumber);
  app.add_option("--mode", g.mode, "Averaging mode")->check(CLI::IsMember({"analytic", "montecarlo"}));

  std::string model_path;
  auto* analyze = app.add_subcommand("analyze", "Time-scale classification as JSON");
  analyze->add_option("model", model_path)->required();

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate the full chain (ssa) or the reduced limit (pdmp)");
  simulate_cmd->add_option("model", model_path)->required();
  std::string engine = "ssa";
  double N = 100, t_end = 1.0;
  simulate_cmd->add_option("--engine", engine)->check(CLI::IsMember({"ssa", "pdmp"}));
  simulate_cmd->add_option("--N", N, "Scaling parameter")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--t-end", t_end)->check(CLI::NonNegativeNumber);

  auto* reduce = app.add_subcommand("reduce", "Write the reduced model");
  reduce->add_option("model", model_path)->required();

  auto* avg_rates = app.add_subcommand("avg-rates", "Tabulate averaged rates on a state grid");
  avg_rates->add_option("model", model_path)->required();
  std::string range = "0:2:11";
  std::vector<std::string> states;
  avg_rates->add_option("--range", range, "lo:hi:n per reduced coordinate");
  avg_rates->add_option("--state", states, "Explicit comma-separated reduced state (repeatable)");

  auto* verify = app.add_subcommand("verify", "Compare finite-N ensembles with the reduced limit");
  verify->add_option("model", model_path)->required();
  std::string n_list = "10,100,1000", t_list = "1";
  double tol = 0.05;
  verify->add_option("--N", n_list, "Comma-separated N values");
  verify->add_option("--times", t_list, "Comma-separated grid times");
  verify->add_option("--tolerance", tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    auto model = load_model(model_path);
    if (analyze->parsed()) {
      emit(g, analyze_json(model));
    } else if (simulate_cmd->parsed()) {
      auto grid = uniform_grid(t_end, g.grid);
      if (engine == "ssa") {
        SimulationConfig sc;
        sc.N = N;
        sc.t_end = t_end;
        sc.grid = grid;
        sc.seed = g.seed;
        State x0{model.initial_scaled(), true};
        if (g.replicas == 1)
          emit(g, render(g, mscrn::simulate(model, sc, x0)));
        else
          emit(g, render(g, ssa_ensemble(model, sc, x0, g.replicas, default_observables(model))));
      } else {
        auto reduced = build_reduced_model(model, averaging_options(g));
        for (const auto& w : reduced.warnings) std::cerr << "warning: " << w << "\n";
        auto sys = build_limit_system(reduced);
        PdmpConfig pc;
        pc.t_end = t_end;
        pc.grid = grid;
        pc.seed = g.seed;
        if (g.replicas == 1)
          emit(g, render(g, simulate_pdmp(sys, reduced.initial_state(), pc)));
        else
          emit(g, render(g, pdmp_ensemble(sys, reduced.initial_state(), pc, g.replicas,
                                          coordinate_observables(sys.labels))));
      }
    } else if (reduce->parsed()) {
      auto reduced = build_reduced_model(model, averaging_options(g));
      for (const auto& w : reduced.warnings) std::cerr << "warning: " << w << "\n";
      emit(g, serialize_reduced(reduced));
    } else if (avg_rates->parsed()) {
      auto reduced = build_reduced_model(model, averaging_options(g));
      for (const auto& w : reduced.warnings) std::cerr << "warning: " << w << "\n";
      auto labels = reduced.labels();
      auto pts = rate_states(labels.size(), range, states);
      std::ostringstream out;
      Json rows = Json::array();
      if (g.format == "csv") {
        for (const auto& l : labels) out << l << ",";
        out << "reaction,kind,value,se\n";
      }
      for (const auto& x : pts)
        for (const auto& ch : reduced.channels) {
          auto v = ch.rate(x);
          const auto& name = model.reactions[static_cast<std::size_t>(ch.reaction)].name;
          const char* kind = ch.rate.kind == AveragedRate::Kind::MonteCarlo ? "montecarlo"
                             : ch.rate.kind == AveragedRate::Kind::Analytic ? "analytic"
                                                                            : "exact";
          if (g.format == "csv") {
            for (double a : x) out << format_number(a) << ",";
            out << name << "," << kind << "," << format_number(v.value) << "," << format_number(v.se) << "\n";
          } else {
            Json st;
            for (std::size_t r = 0; r < labels.size(); ++r) st[labels[r]] = x[r];
            rows.push_back({{"state", st}, {"reaction", name}, {"kind", kind}, {"value", v.value}, {"se", v.se}});
          }
        }
      emit(g, g.format == "csv" ? out.str() : Json{{"rates", rows}}.dump(2) + "\n");
    } else if (verify->parsed()) {
      VerifyOptions vo;
      vo.N = parse_list(n_list);
      vo.times = parse_list(t_list);
      vo.replicas = g.replicas == 1 ? 2000 : g.replicas;
      vo.seed = g.seed;
      vo.averaging = averaging_options(g);
      vo.tolerance = tol;
      auto rep = verify_convergence(model, vo);
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      if (g.out.empty()) {
        std::cout << (g.format == "csv" ? verify_csv(rep) : verify_json(rep));
      } else {
        emit(g, verify_json(rep), ".json");
        emit(g, verify_csv(rep), ".csv");
      }
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ModelFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
