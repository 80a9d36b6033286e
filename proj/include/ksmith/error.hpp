#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ksmith {

// Error kinds raised across the harness. Failures that are data (QC results,
// judge verdicts) are returned as values instead.
enum class Errc {
  SchemaViolation,
  DanglingReference,
  IOFailure,
  UnknownNode,
  UnknownFact,
  NoReplacementCandidate,
  InvalidArgument,
  GenerationFailure,
  EmptyBank,
  MissingHierarchy,
  DistractorShortage,
  VariantExhaustion,
  Unreachable,
  AuthFailure,
  RateLimited,
  MalformedVerdict,
  MissingAnswer,
  UnknownProbe,
  EmptyFilter,
  MissingProbs,
  OutOfRange,
  UnpairedProbe,
  CurveMismatch,
  SparseCurve,
  MissingBaseline,
  ShapeMismatch,
  MissingPhase,
  NumericFailure,
  DegenerateInput,
  LengthMismatch,
  InvalidDistribution,
  NegativeWeight,
  ConstantSeries,
  ShortSeries,
  ConfigError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ksmith
