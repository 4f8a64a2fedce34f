#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oasis::eval {

/// ROUGE-1 F1 between two texts using text::unigrams tokenization and
/// clipped unigram counts. Two empty token lists score 1, one empty list 0.
double rouge1_f1(std::string_view candidate, std::string_view reference);

struct Easiness {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Mean over generated claims of the best ROUGE-1 against any gold claim.
double easiness_p(std::span<const std::string> generated, std::span<const std::string> gold);
/// Mean over gold claims of the best ROUGE-1 against any generated claim.
double easiness_r(std::span<const std::string> generated, std::span<const std::string> gold);
/// Harmonic mean of the two (0 when both are 0). Throws InvalidArgument on
/// an empty claim set.
Easiness easiness(std::span<const std::string> generated, std::span<const std::string> gold);

struct Confusion {
  std::size_t true_positive = 0;   // gold True, predicted True
  std::size_t false_negative = 0;  // gold True, predicted False
  std::size_t true_negative = 0;   // gold False, predicted False
  std::size_t false_positive = 0;  // gold False, predicted True

  double recall_true() const;
  double recall_false() const;
};

Confusion confusion(std::span<const bool> predictions, std::span<const bool> golds);

/// Mean of the per-class recalls. Throws MetricUndefined when the golds
/// contain only one class and InvalidArgument on a length mismatch.
double balanced_accuracy(std::span<const bool> predictions, std::span<const bool> golds);
double balanced_accuracy(const Confusion& c);

// std::vector<bool> is not contiguous, so callers holding one convert here.
double balanced_accuracy(const std::vector<bool>& predictions, const std::vector<bool>& golds);

}  // namespace oasis::eval
