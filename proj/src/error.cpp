#include "ksmith/error.hpp"

namespace ksmith {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::IOFailure: return "IOFailure";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::UnknownFact: return "UnknownFact";
    case Errc::NoReplacementCandidate: return "NoReplacementCandidate";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::GenerationFailure: return "GenerationFailure";
    case Errc::EmptyBank: return "EmptyBank";
    case Errc::MissingHierarchy: return "MissingHierarchy";
    case Errc::DistractorShortage: return "DistractorShortage";
    case Errc::VariantExhaustion: return "VariantExhaustion";
    case Errc::Unreachable: return "Unreachable";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MalformedVerdict: return "MalformedVerdict";
    case Errc::MissingAnswer: return "MissingAnswer";
    case Errc::UnknownProbe: return "UnknownProbe";
    case Errc::EmptyFilter: return "EmptyFilter";
    case Errc::MissingProbs: return "MissingProbs";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::UnpairedProbe: return "UnpairedProbe";
    case Errc::CurveMismatch: return "CurveMismatch";
    case Errc::SparseCurve: return "SparseCurve";
    case Errc::MissingBaseline: return "MissingBaseline";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingPhase: return "MissingPhase";
    case Errc::NumericFailure: return "NumericFailure";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidDistribution: return "InvalidDistribution";
    case Errc::NegativeWeight: return "NegativeWeight";
    case Errc::ConstantSeries: return "ConstantSeries";
    case Errc::ShortSeries: return "ShortSeries";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace ksmith
