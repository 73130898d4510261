#pragma once

#include "mscrn/algebra.hpp"
#include "mscrn/model.hpp"
#include "mscrn/pdmp.hpp"
#include "mscrn/random.hpp"
#include "mscrn/scale.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mscrn {

/// Stationary distribution of the movement chain, per species over compartments.
struct MovementEquilibrium {
  std::vector<std::vector<double>> pi;  // [species][compartment]
};

/// Solves pi Q = 0, sum pi = 1 for the movement generator of one species.
std::vector<double> movement_equilibrium(const Model& model, int species);
MovementEquilibrium movement_equilibria(const Model& model);

/// Movement equilibrium of a set of species with fixed totals: multinomial
/// for discrete species, point mass at s_i pi_i for continuous ones. Values
/// are written into a compartment-slot vector (slot i*D+d).
class ProductMeasure {
 public:
  ProductMeasure(const Model& model, const MovementEquilibrium& eq, std::vector<int> species,
                 std::vector<double> totals);

  /// Number of support points of the discrete part.
  double support_size() const;
  /// Visits every support point with its probability.
  void for_each(std::vector<double>& locals, const std::function<void(double)>& visit) const;
  void sample(std::vector<double>& locals, Rng& rng) const;
  /// P(V_{species,compartment} = x) for a discrete species of the measure.
  double marginal_pmf(int species, int compartment, int x) const;

 private:
  int D_ = 1;
  std::vector<int> species_;
  std::vector<double> totals_;
  std::vector<bool> discrete_;
  std::vector<std::vector<double>> pi_;
};

/// kbar_k = sum_d kappa_kd prod_i pi_i(d)^nu_ik.
double mass_action_avg_kappa(const Model& model, const MovementEquilibrium& eq, int reaction);

struct MonteCarloOptions {
  /// Events per stationary estimate, burn-in included.
  std::uint64_t budget = 100'000;
  double burn_in = 0.2;
  int batches = 20;
  /// Samples of an outer movement measure when its support is too large to sum.
  std::size_t outer_samples = 10'000;
  std::size_t exact_limit = 1'000'000;
  double min_ess = 20;
  std::uint64_t seed = 0;
};

enum class AveragingMode { Analytic, MonteCarlo };

struct RateValue {
  double value = 0.0;
  double se = 0.0;
};

class StationaryMeasure {
 public:
  enum class Kind { ProductPoisson, PointMass, Empirical };

  Kind kind = Kind::PointMass;
  std::vector<std::string> labels;
  /// Poisson means or the point mass location.
  std::vector<double> values;
  /// Empirical: distinct states with their occupation time per batch.
  std::vector<std::vector<double>> points;
  std::vector<std::vector<double>> batch_weights;
  double ess = INFINITY;
  std::uint64_t events = 0;

  /// Expectation with a batch-means standard error (zero unless Empirical).
  RateValue expect(const std::function<double(const std::vector<double>&)>& f) const;
};

/// Long-run occupation measure of a hybrid system started at x0. Pure-flow
/// systems relax to a point mass; systems with jumps are simulated for
/// `budget` events with the first `burn_in` fraction discarded.
StationaryMeasure empirical_stationary(const HybridSystem& system, const std::vector<double>& x0,
                                       const MonteCarloOptions& options, std::uint64_t seed);

/// Stationary measure of the fast species with the other species frozen
/// (species-indexed scaled values). Analytic mode recognises independent
/// linear birth-death fast species and throws AnalyticUnavailable otherwise.
/// With conserved quantities the chain starts on <theta_j, v_f> = totals[j].
StationaryMeasure stationary_fast(const Model& model, const ScaleClassification& c, const std::vector<double>& frozen,
                                  AveragingMode mode, const MonteCarloOptions& options,
                                  const ConservedBasis* conserved = nullptr,
                                  const std::vector<double>& conserved_totals = {});

/// Averaged rate of one slow reaction as a function of the reduced state.
class AveragedRate {
 public:
  enum class Kind { Exact, Analytic, MonteCarlo };

  int reaction = -1;
  Kind kind = Kind::Exact;
  /// Over the reduced coordinate symbols; absent for Monte Carlo rates and
  /// for non-rational rate laws.
  std::optional<algebra::RationalFunction> closed_form;
  std::function<RateValue(const std::vector<double>&)> evaluate;

  RateValue operator()(const std::vector<double>& x) const { return evaluate(x); }
};

struct AveragingOptions {
  AveragingMode mode = AveragingMode::Analytic;
  MonteCarloOptions mc;
};

/// Reduced coordinates of an averaging problem: slow species (species
/// symbols, or totals for spatial models) followed by conserved totals.
std::vector<algebra::Symbol> reduced_symbols(const Model& model, const ScaleClassification& c,
                                             const ConservedBasis& conserved);

/// Single-scale spatial model: E_s[sum_d lambda_kd(V_.d)] over the movement
/// equilibrium, as a function of all retained totals.
AveragedRate averaged_rate_single_scale(const Model& model, const MovementEquilibrium& eq, int reaction,
                                        const AveragingOptions& options = {});

/// Two-scale nonspatial model: slow rate averaged over the fast stationary
/// measure given (v_s[, s_c]).
AveragedRate averaged_rate_two_scale(const Model& model, const ScaleClassification& c, int reaction,
                                     const AveragingOptions& options = {});

/// Three-scale model: average over the fast measure given (v_m, v_s), then
/// over the middle measure given v_s.
AveragedRate averaged_rate_three_scale(const Model& model, const ScaleClassification& c, int reaction,
                                       const AveragingOptions& options = {});

/// Two-scale spatial model in the classification's movement case.
AveragedRate averaged_rate_spatial(const Model& model, const ScaleClassification& c, const MovementEquilibrium& eq,
                                   int reaction, const AveragingOptions& options = {});

/// Shared averaging state for all slow reactions of one model: closed forms
/// are derived once and Monte Carlo estimates are memoized per reduced state.
class Averager {
 public:
  Averager(const Model& model, const AveragingOptions& options);
  ~Averager();
  Averager(const Averager&) = delete;
  Averager& operator=(const Averager&) = delete;

  const Model& model() const;
  const ScaleClassification& classification() const;
  const ConservedBasis& conserved() const;
  const std::optional<MovementEquilibrium>& movement() const;
  const std::vector<algebra::Symbol>& symbols() const;
  const std::vector<std::string>& warnings() const;

  /// Rate of reaction k (slow tier, or any retained reaction for single-scale).
  AveragedRate rate(int reaction);

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace mscrn
