#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mscrn {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors caused by the model itself (bad input, impossible scaling).
/// The CLI maps these to exit code 2.
class ModelFailure : public Error {
 public:
  using Error::Error;
};

/// Errors raised while computing (integration, sampling, rate evaluation).
/// The CLI maps these to exit code 3.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

#define MSCRN_DEFINE_ERROR(Name, Base) \
  class Name : public Base {           \
   public:                             \
    using Base::Base;                  \
  };

MSCRN_DEFINE_ERROR(ModelError, ModelFailure)
MSCRN_DEFINE_ERROR(ValidationError, ModelFailure)
MSCRN_DEFINE_ERROR(UnclassifiableError, ModelFailure)
MSCRN_DEFINE_ERROR(MixedAlphaError, ModelFailure)
MSCRN_DEFINE_ERROR(TimescaleViolation, ModelFailure)
MSCRN_DEFINE_ERROR(OverlapError, ModelFailure)
MSCRN_DEFINE_ERROR(DegenerateEtaError, ModelFailure)
MSCRN_DEFINE_ERROR(HeterogeneousEtaError, ModelFailure)
MSCRN_DEFINE_ERROR(ReducibleChainError, ModelFailure)
MSCRN_DEFINE_ERROR(IsolatedSpeciesError, ModelFailure)
MSCRN_DEFINE_ERROR(NotMassAction, ModelFailure)
MSCRN_DEFINE_ERROR(MissingRates, ModelFailure)

MSCRN_DEFINE_ERROR(RateEvaluationError, NumericalFailure)
MSCRN_DEFINE_ERROR(EventCapExceeded, NumericalFailure)
MSCRN_DEFINE_ERROR(OdeStepFailure, NumericalFailure)
MSCRN_DEFINE_ERROR(NegativeRate, NumericalFailure)
MSCRN_DEFINE_ERROR(AnalyticUnavailable, NumericalFailure)
MSCRN_DEFINE_ERROR(NonErgodicSuspected, NumericalFailure)
MSCRN_DEFINE_ERROR(CaseUnavailable, NumericalFailure)

#undef MSCRN_DEFINE_ERROR

/// Location inside a model source text (1-based line and column).
struct SourceSpan {
  std::size_t line = 0;
  std::size_t column = 0;
  std::size_t length = 0;
};

class ParseError : public ModelFailure {
 public:
  ParseError(const std::string& message, SourceSpan span)
      : ModelFailure(std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message),
        span_(span) {}

  const SourceSpan& span() const noexcept { return span_; }

 private:
  SourceSpan span_;
};

}  // namespace mscrn
