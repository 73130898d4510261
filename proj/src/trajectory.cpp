#include "mscrn/trajectory.hpp"

#include "mscrn/error.hpp"
#include "mscrn/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace mscrn {

std::vector<Observable> coordinate_observables(const std::vector<std::string>& labels) {
  std::vector<Observable> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({labels[i], {{static_cast<int>(i), 1.0}}});
  return out;
}

double EnsembleStats::standard_error(std::size_t obs, std::size_t t) const {
  return replicas > 0 ? std::sqrt(variance[obs][t] / static_cast<double>(replicas)) : 0.0;
}

namespace {

double quantile(std::vector<double>& v, double q) {
  // Linear interpolation between order statistics.
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  double f = pos - static_cast<double>(lo);
  return v[lo] * (1 - f) + v[hi] * f;
}

}  // namespace

EnsembleStats run_ensemble(const std::function<Trajectory(std::uint64_t)>& simulate, std::size_t replicas,
                           const std::vector<Observable>& observables, unsigned threads) {
  if (replicas == 0) throw ModelError("an ensemble needs at least one replica");
  // values[r][obs][t]
  std::vector<std::vector<std::vector<double>>> values(replicas);
  std::vector<double> times;
  std::mutex times_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      std::size_t r = next.fetch_add(1);
      if (r >= replicas) return;
      try {
        Trajectory t = simulate(r);
        auto& out = values[r];
        out.assign(observables.size(), std::vector<double>(t.times.size()));
        for (std::size_t o = 0; o < observables.size(); ++o)
          for (std::size_t j = 0; j < t.times.size(); ++j) out[o][j] = observables[o](t.states[j]);
        if (r == 0) {
          std::lock_guard lock(times_mutex);
          times = t.times;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = replicas;
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, replicas));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleStats s;
  s.times = times;
  s.replicas = replicas;
  for (const auto& o : observables) s.labels.push_back(o.label);
  const std::size_t T = times.size();
  for (auto* field : {&s.mean, &s.variance, &s.q05, &s.median, &s.q95})
    field->assign(observables.size(), std::vector<double>(T, 0.0));
  std::vector<double> column(replicas);
  for (std::size_t o = 0; o < observables.size(); ++o)
    for (std::size_t j = 0; j < T; ++j) {
      for (std::size_t r = 0; r < replicas; ++r) {
        if (values[r][o].size() != T) throw ModelError("replicas were sampled on different grids");
        column[r] = values[r][o][j];
      }
      double mean = 0.0;
      for (double x : column) mean += x;
      mean /= static_cast<double>(replicas);
      double ss = 0.0;
      for (double x : column) ss += (x - mean) * (x - mean);
      s.mean[o][j] = mean;
      s.variance[o][j] = replicas > 1 ? ss / static_cast<double>(replicas - 1) : 0.0;
      s.q05[o][j] = quantile(column, 0.05);
      s.median[o][j] = quantile(column, 0.5);
      s.q95[o][j] = quantile(column, 0.95);
    }
  return s;
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream out;
  out << "time";
  for (const auto& l : t.labels) out << "," << l;
  for (const auto& l : t.total_labels) out << "," << l;
  out << "\n";
  for (std::size_t j = 0; j < t.times.size(); ++j) {
    out << format_number(t.times[j]);
    for (double v : t.states[j]) out << "," << format_number(v);
    if (j < t.totals.size())
      for (double v : t.totals[j]) out << "," << format_number(v);
    out << "\n";
  }
  return out.str();
}

std::string ensemble_csv(const EnsembleStats& s) {
  std::ostringstream out;
  out << "time,observable,mean,variance,se,q05,median,q95\n";
  for (std::size_t j = 0; j < s.times.size(); ++j)
    for (std::size_t o = 0; o < s.labels.size(); ++o)
      out << format_number(s.times[j]) << "," << s.labels[o] << "," << format_number(s.mean[o][j]) << ","
          << format_number(s.variance[o][j]) << "," << format_number(s.standard_error(o, j)) << ","
          << format_number(s.q05[o][j]) << "," << format_number(s.median[o][j]) << "," << format_number(s.q95[o][j])
          << "\n";
  return out.str();
}

std::string trajectory_json(const Trajectory& t) {
  nlohmann::ordered_json j;
  j["labels"] = t.labels;
  j["times"] = t.times;
  j["states"] = t.states;
  if (!t.total_labels.empty()) {
    j["total_labels"] = t.total_labels;
    j["totals"] = t.totals;
  }
  j["event_counts"] = t.event_counts;
  j["events"] = t.events;
  return j.dump(2) + "\n";
}

std::string ensemble_json(const EnsembleStats& s) {
  nlohmann::ordered_json j;
  j["replicas"] = s.replicas;
  j["times"] = s.times;
  nlohmann::ordered_json obs = nlohmann::ordered_json::object();
  for (std::size_t o = 0; o < s.labels.size(); ++o) {
    std::vector<double> se(s.times.size());
    for (std::size_t t = 0; t < s.times.size(); ++t) se[t] = s.standard_error(o, t);
    obs[s.labels[o]] = {{"mean", s.mean[o]},  {"variance", s.variance[o]}, {"se", se},
                        {"q05", s.q05[o]},    {"median", s.median[o]},     {"q95", s.q95[o]}};
  }
  j["observables"] = obs;
  return j.dump(2) + "\n";
}

std::vector<double> uniform_grid(double t_end, int intervals) {
  std::vector<double> g;
  for (int i = 0; i <= intervals; ++i) g.push_back(t_end * i / intervals);
  return g;
}

}  // namespace mscrn
