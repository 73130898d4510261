#include "mscrn/verify.hpp"

#include "mscrn/error.hpp"
#include "mscrn/format.hpp"
#include "mscrn/random.hpp"
#include "mscrn/reduced.hpp"
#include "mscrn/ssa.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mscrn {

const char* to_string(Trend t) {
  switch (t) {
    case Trend::Decreasing: return "decreasing";
    case Trend::NotDecreasing: return "not-decreasing";
    case Trend::NotApplicable: return "not-applicable";
  }
  return "";
}

Trend error_trend(const std::vector<double>& error, const std::vector<double>& error_se) {
  if (error.size() < 2) return Trend::NotApplicable;
  int slack_used = 0;
  for (std::size_t n = 1; n < error.size(); ++n) {
    // At the noise floor the error cannot shrink measurably any more.
    if (error[n] <= error[n - 1] || error[n] <= 2 * error_se[n]) continue;
    double se = std::hypot(error_se[n], error_se[n - 1]);
    if (error[n] - error[n - 1] <= 2 * se && ++slack_used <= 1) continue;
    return Trend::NotDecreasing;
  }
  return Trend::Decreasing;
}

VerifyReport verify_convergence(const Model& model, const VerifyOptions& opt) {
  if (opt.N.empty()) throw ModelError("verify needs at least one N");
  if (opt.times.empty()) throw ModelError("verify needs at least one time");
  if (opt.replicas < 2) throw ModelError("verify needs at least two replicas");
  auto times = opt.times;
  std::sort(times.begin(), times.end());
  if (times.front() < 0) throw ModelError("grid times must be nonnegative");

  VerifyReport rep;
  rep.N = opt.N;
  rep.times = times;
  rep.replicas = opt.replicas;
  rep.tolerance = opt.tolerance;

  auto reduced = build_reduced_model(model, opt.averaging);
  rep.warnings = reduced.warnings;
  rep.observables = reduced.labels();

  // Reduced coordinates as linear functionals of the full state.
  const int D = model.num_compartments();
  std::vector<Observable> full_obs, limit_obs;
  for (std::size_t r = 0; r < reduced.coordinates.size(); ++r) {
    const auto& rc = reduced.coordinates[r];
    Observable o{rc.label, {}};
    auto add = [&](int species, double w) {
      for (int d = 0; d < D; ++d) o.weights.emplace_back(model.slot(species, d), w);
    };
    if (rc.symbol.kind == algebra::Symbol::Kind::Conserved) {
      const auto& theta = reduced.conserved.vectors[static_cast<std::size_t>(rc.symbol.index)];
      for (std::size_t j = 0; j < theta.size(); ++j)
        if (theta[j] != 0) add(reduced.classification.fast[j], static_cast<double>(theta[j]));
    } else {
      add(rc.symbol.index, 1.0);
    }
    full_obs.push_back(std::move(o));
    limit_obs.push_back(Observable{rc.label, {{static_cast<int>(r), 1.0}}});
  }

  PdmpConfig pc;
  pc.t_end = times.back();
  pc.grid = times;
  pc.ode = opt.ode;
  pc.seed = stream_seed(opt.seed, 0);
  auto limit = pdmp_ensemble(build_limit_system(reduced), reduced.initial_state(), pc, opt.replicas, limit_obs,
                             opt.threads);
  const std::size_t nobs = full_obs.size(), nt = times.size();
  rep.limit_mean = limit.mean;
  rep.limit_se.assign(nobs, std::vector<double>(nt, 0.0));
  for (std::size_t o = 0; o < nobs; ++o)
    for (std::size_t t = 0; t < nt; ++t) rep.limit_se[o][t] = limit.standard_error(o, t);

  State x0{model.initial_scaled(), true};
  for (std::size_t n = 0; n < opt.N.size(); ++n) {
    SimulationConfig sc;
    sc.N = opt.N[n];
    sc.t_end = times.back();
    sc.grid = times;
    sc.seed = stream_seed(opt.seed, n + 1);
    auto ens = ssa_ensemble(model, sc, x0, opt.replicas, full_obs, opt.threads);
    rep.mean.push_back(ens.mean);
    rep.variance.push_back(ens.variance);
    std::vector<std::vector<double>> se(nobs, std::vector<double>(nt, 0.0));
    double worst = -1.0, worst_se = 0.0;
    for (std::size_t o = 0; o < nobs; ++o)
      for (std::size_t t = 0; t < nt; ++t) {
        se[o][t] = ens.standard_error(o, t);
        double scale = std::fabs(limit.mean[o][t]) + 1.0;
        double e = std::fabs(ens.mean[o][t] - limit.mean[o][t]) / scale;
        if (e > worst) {
          worst = e;
          worst_se = std::hypot(se[o][t], rep.limit_se[o][t]) / scale;
        }
      }
    rep.se.push_back(std::move(se));
    rep.error.push_back(std::max(worst, 0.0));
    rep.error_se.push_back(worst_se);
  }
  rep.trend = error_trend(rep.error, rep.error_se);
  rep.within_tolerance = rep.error.back() <= rep.tolerance;
  rep.passed = rep.within_tolerance && rep.trend != Trend::NotDecreasing;
  return rep;
}

std::string verify_json(const VerifyReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "mscrn-verify";
  j["schema_version"] = VerifyReport::schema_version;
  j["N"] = r.N;
  j["times"] = r.times;
  j["replicas"] = r.replicas;
  j["observables"] = r.observables;
  j["limit"] = {{"mean", r.limit_mean}, {"se", r.limit_se}};
  auto runs = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < r.N.size(); ++n)
    runs.push_back({{"N", r.N[n]},
                    {"mean", r.mean[n]},
                    {"variance", r.variance[n]},
                    {"se", r.se[n]},
                    {"error", r.error[n]},
                    {"error_se", r.error_se[n]}});
  j["runs"] = runs;
  j["error"] = r.error;
  j["trend"] = to_string(r.trend);
  j["tolerance"] = r.tolerance;
  j["within_tolerance"] = r.within_tolerance;
  j["passed"] = r.passed;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string verify_csv(const VerifyReport& r) {
  std::ostringstream out;
  out << "N,observable,time,mean,variance,se,limit_mean,limit_se,normalized_error\n";
  for (std::size_t n = 0; n < r.N.size(); ++n)
    for (std::size_t o = 0; o < r.observables.size(); ++o)
      for (std::size_t t = 0; t < r.times.size(); ++t) {
        double lim = r.limit_mean[o][t];
        out << format_number(r.N[n]) << "," << r.observables[o] << "," << format_number(r.times[t]) << ","
            << format_number(r.mean[n][o][t]) << "," << format_number(r.variance[n][o][t]) << ","
            << format_number(r.se[n][o][t]) << "," << format_number(lim) << "," << format_number(r.limit_se[o][t])
            << "," << format_number(std::fabs(r.mean[n][o][t] - lim) / (std::fabs(lim) + 1.0)) << "\n";
      }
  return out.str();
}

}  // namespace mscrn
