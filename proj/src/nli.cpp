#include "oasis/nli.hpp"

#include <cmath>
#include <string>

#include "oasis/errors.hpp"

namespace oasis {

const char* to_string(NliLabel label) noexcept {
  switch (label) {
    case NliLabel::kEntailment:
      return "ENT";
    case NliLabel::kNeutral:
      return "NEUT";
    case NliLabel::kContradiction:
      return "CONTR";
  }
  return "?";
}

NliLabel parse_nli_label(std::string_view s) {
  if (s == "ENT") return NliLabel::kEntailment;
  if (s == "NEUT") return NliLabel::kNeutral;
  if (s == "CONTR") return NliLabel::kContradiction;
  throw FormatError("unknown NLI label '" + std::string(s) + "'");
}

bool NliDistribution::is_valid(double tolerance) const noexcept {
  for (double p : {entailment, neutral, contradiction}) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) return false;
  }
  return std::fabs(entailment + neutral + contradiction - 1.0) <= tolerance;
}

NliLabel NliDistribution::argmax() const noexcept {
  NliLabel best = NliLabel::kEntailment;
  double best_p = entailment;
  if (contradiction > best_p) {
    best = NliLabel::kContradiction;
    best_p = contradiction;
  }
  if (neutral > best_p) best = NliLabel::kNeutral;
  return best;
}

double NliDistribution::probability(NliLabel label) const noexcept {
  switch (label) {
    case NliLabel::kEntailment:
      return entailment;
    case NliLabel::kNeutral:
      return neutral;
    case NliLabel::kContradiction:
      return contradiction;
  }
  return 0.0;
}

const char* to_string(BackendErrorKind kind) noexcept {
  switch (kind) {
    case BackendErrorKind::kTimeout:
      return "Timeout";
    case BackendErrorKind::kAuthFailure:
      return "AuthFailure";
    case BackendErrorKind::kRateLimited:
      return "RateLimited";
    case BackendErrorKind::kMalformedResponse:
      return "MalformedResponse";
    case BackendErrorKind::kDimensionMismatch:
      return "DimensionMismatch";
    case BackendErrorKind::kInvalidDistribution:
      return "InvalidDistribution";
    case BackendErrorKind::kScriptExhausted:
      return "ScriptExhausted";
    case BackendErrorKind::kTransport:
      return "Transport";
  }
  return "Unknown";
}

}  // namespace oasis
