#pragma once

#include <string>
#include <string_view>

namespace oasis {

enum class NliLabel { kEntailment, kNeutral, kContradiction };

/// "ENT", "NEUT" or "CONTR".
const char* to_string(NliLabel label) noexcept;

/// Inverse of to_string; throws FormatError on anything else.
NliLabel parse_nli_label(std::string_view s);

/// Probability triple over the three NLI labels.
struct NliDistribution {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;

  /// Each component in [0, 1] and the sum within `tolerance` of 1.
  bool is_valid(double tolerance = 1e-6) const noexcept;

  /// Most probable label; ties resolve ENT > CONTR > NEUT.
  NliLabel argmax() const noexcept;

  double probability(NliLabel label) const noexcept;
};

}  // namespace oasis
