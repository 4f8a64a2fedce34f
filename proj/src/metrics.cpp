#include "oasis/metrics.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include "oasis/errors.hpp"
#include "oasis/text.hpp"

namespace oasis::eval {

namespace {

using Counts = std::map<std::string, std::size_t>;

Counts count_tokens(std::string_view s) {
  Counts counts;
  for (auto& tok : text::unigrams(s)) ++counts[std::move(tok)];
  return counts;
}

std::size_t total(const Counts& c) {
  std::size_t n = 0;
  for (const auto& [tok, k] : c) n += k;
  return n;
}

double f1_from_counts(const Counts& cand, const Counts& ref) {
  const std::size_t nc = total(cand);
  const std::size_t nr = total(ref);
  if (nc == 0 && nr == 0) return 1.0;
  if (nc == 0 || nr == 0) return 0.0;
  std::size_t overlap = 0;
  for (const auto& [tok, k] : cand) {
    if (auto it = ref.find(tok); it != ref.end()) overlap += std::min(k, it->second);
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(nc);
  const double r = static_cast<double>(overlap) / static_cast<double>(nr);
  return 2.0 * p * r / (p + r);
}

// Mean over `rows` of the best score against any of `cols`; `score(i, j)`
// is ROUGE-1 with row item as candidate.
template <typename Score>
double mean_of_row_max(std::size_t rows, std::size_t cols, Score score) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < cols; ++j) best = std::max(best, score(i, j));
    sum += best;
  }
  return sum / static_cast<double>(rows);
}

void require_non_empty(std::span<const std::string> generated, std::span<const std::string> gold) {
  if (generated.empty() || gold.empty()) {
    throw InvalidArgument("easiness needs non-empty generated and gold claim sets");
  }
}

}  // namespace

double rouge1_f1(std::string_view candidate, std::string_view reference) {
  return f1_from_counts(count_tokens(candidate), count_tokens(reference));
}

double easiness_p(std::span<const std::string> generated, std::span<const std::string> gold) {
  require_non_empty(generated, gold);
  return mean_of_row_max(generated.size(), gold.size(), [&](std::size_t i, std::size_t j) {
    return rouge1_f1(generated[i], gold[j]);
  });
}

double easiness_r(std::span<const std::string> generated, std::span<const std::string> gold) {
  require_non_empty(generated, gold);
  return mean_of_row_max(gold.size(), generated.size(), [&](std::size_t i, std::size_t j) {
    return rouge1_f1(generated[j], gold[i]);
  });
}

Easiness easiness(std::span<const std::string> generated, std::span<const std::string> gold) {
  require_non_empty(generated, gold);
  std::vector<Counts> gen_counts, gold_counts;
  for (const auto& c : generated) gen_counts.push_back(count_tokens(c));
  for (const auto& c : gold) gold_counts.push_back(count_tokens(c));
  // One score matrix serves both directions.
  std::vector<double> scores(generated.size() * gold.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    for (std::size_t j = 0; j < gold.size(); ++j) {
      scores[i * gold.size() + j] = f1_from_counts(gen_counts[i], gold_counts[j]);
    }
  }
  Easiness e;
  e.precision = mean_of_row_max(generated.size(), gold.size(), [&](std::size_t i, std::size_t j) {
    return scores[i * gold.size() + j];
  });
  e.recall = mean_of_row_max(gold.size(), generated.size(), [&](std::size_t i, std::size_t j) {
    return scores[j * gold.size() + i];
  });
  e.f1 = (e.precision + e.recall) == 0.0
             ? 0.0
             : 2.0 * e.precision * e.recall / (e.precision + e.recall);
  return e;
}

double Confusion::recall_true() const {
  const std::size_t n = true_positive + false_negative;
  if (n == 0) throw MetricUndefined("no gold True instances");
  return static_cast<double>(true_positive) / static_cast<double>(n);
}

double Confusion::recall_false() const {
  const std::size_t n = true_negative + false_positive;
  if (n == 0) throw MetricUndefined("no gold False instances");
  return static_cast<double>(true_negative) / static_cast<double>(n);
}

Confusion confusion(std::span<const bool> predictions, std::span<const bool> golds) {
  if (predictions.size() != golds.size()) {
    throw InvalidArgument("predictions and golds differ in length");
  }
  Confusion c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i]) {
      ++(predictions[i] ? c.true_positive : c.false_negative);
    } else {
      ++(predictions[i] ? c.false_positive : c.true_negative);
    }
  }
  return c;
}

double balanced_accuracy(const Confusion& c) {
  if (c.true_positive + c.false_negative == 0 || c.true_negative + c.false_positive == 0) {
    throw MetricUndefined("balanced accuracy is undefined when golds contain a single class");
  }
  return (c.recall_true() + c.recall_false()) / 2.0;
}

double balanced_accuracy(std::span<const bool> predictions, std::span<const bool> golds) {
  return balanced_accuracy(confusion(predictions, golds));
}

double balanced_accuracy(const std::vector<bool>& predictions, const std::vector<bool>& golds) {
  auto p = std::make_unique<bool[]>(predictions.size());
  auto g = std::make_unique<bool[]>(golds.size());
  std::copy(predictions.begin(), predictions.end(), p.get());
  std::copy(golds.begin(), golds.end(), g.get());
  return balanced_accuracy(std::span<const bool>(p.get(), predictions.size()),
                           std::span<const bool>(g.get(), golds.size()));
}

}  // namespace oasis::eval
