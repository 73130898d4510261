#pragma once

#include "mscrn/averaging.hpp"
#include "mscrn/model.hpp"
#include "mscrn/pdmp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mscrn {

struct VerifyOptions {
  std::vector<double> N{10, 100, 1000};
  std::size_t replicas = 2000;
  std::vector<double> times{1.0};
  std::uint64_t seed = 0;
  AveragingOptions averaging;
  OdeConfig ode;
  unsigned threads = 0;
  /// Required normalized error at the largest N.
  double tolerance = 0.05;
};

enum class Trend { Decreasing, NotDecreasing, NotApplicable };
const char* to_string(Trend t);

/// Finite-N ensembles against the reduced-model ensemble at grid times.
struct VerifyReport {
  static constexpr int schema_version = 1;

  std::vector<double> N;
  std::vector<double> times;
  std::vector<std::string> observables;
  std::size_t replicas = 0;
  // [N][observable][time]
  std::vector<std::vector<std::vector<double>>> mean, variance, se;
  // [observable][time]
  std::vector<std::vector<double>> limit_mean, limit_se;
  /// max over observables and times of |mean_N - mean_lim| / (|mean_lim| + 1)
  std::vector<double> error;
  /// Combined standard error of the entry attaining the maximum.
  std::vector<double> error_se;
  Trend trend = Trend::NotApplicable;
  double tolerance = 0.05;
  bool within_tolerance = false;
  bool passed = false;
  std::vector<std::string> warnings;
};

/// Monotone-trend verdict. A step counts as non-increasing when the error
/// drops or is within 2 SE of zero; one further increase within 2 combined
/// SE is tolerated.
Trend error_trend(const std::vector<double>& error, const std::vector<double>& error_se);

VerifyReport verify_convergence(const Model& model, const VerifyOptions& options = {});

std::string verify_json(const VerifyReport& report);
/// Columns: N,observable,time,mean,variance,se,limit_mean,limit_se,normalized_error
std::string verify_csv(const VerifyReport& report);

}  // namespace mscrn
