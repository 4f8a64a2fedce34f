#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "oasis/backends.hpp"
#include "oasis/corpus.hpp"

namespace oasis::retrieval {

using backends::EmbeddingVector;

/// Dense passage store scored by dot product. Vectors are opaque: pooling and
/// normalization are the embedder's business. Rows are stored contiguously.
class PassageIndex {
 public:
  explicit PassageIndex(std::size_t dimension);

  /// Throws InvalidArgument on a duplicate id or non-finite value and
  /// DimensionMismatch on a wrong-sized vector.
  void add(std::string passage_id, std::string passage_text, std::span<const float> vector);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }

  const std::string& passage_id(std::size_t row) const { return ids_.at(row); }
  const std::string& passage_text(std::size_t row) const { return texts_.at(row); }
  std::span<const float> vector(std::size_t row) const;
  std::optional<std::size_t> find(const std::string& passage_id) const;

 private:
  std::size_t dimension_;
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> rows_;
};

struct ScoredPassage {
  std::string passage_id;
  double score = 0.0;
  std::size_t row = 0;

  bool operator==(const ScoredPassage&) const = default;
};

/// Scores non-increasing; equal scores ordered by ascending passage_id.
using RankedResult = std::vector<ScoredPassage>;

struct IndexBuildOptions {
  std::size_t batch_size = 32;
  std::size_t workers = 1;
  /// Skip passages whose text exactly repeats an earlier passage.
  bool dedup_texts = true;
};

/// Embeds every passage and builds the index. Throws InvalidArgument on an
/// empty input or duplicate passage_id, DimensionMismatch when the backend
/// returns vectors of differing dimensions across batches.
PassageIndex index_build(const std::vector<corpus::Passage>& passages,
                         backends::EmbeddingBackend& embedder, const IndexBuildOptions& options = {});

/// Exact full scan: the k best rows by dot product (fewer when the index is
/// smaller). `shards` > 1 splits the scan across threads.
RankedResult top_k(const PassageIndex& index, std::span<const float> query, std::size_t k,
                   std::size_t shards = 1);

double dot(std::span<const float> a, std::span<const float> b);

/// |relevant ∩ results| / |relevant|, optionally over only the first k
/// results. Throws InvalidArgument when `relevant` is empty.
double recall_at_k(const RankedResult& results, const std::set<std::string>& relevant);
double recall_at_k(const RankedResult& results, const std::set<std::string>& relevant,
                   std::size_t k);

/// Contrastive loss with in-batch negatives: for each i, the negative log
/// softmax of claim_i . positive_i against claim_i . positive_j over all j,
/// summed over the batch. Uses max-subtraction for stability.
double in_batch_loss(const std::vector<EmbeddingVector>& claim_vectors,
                     const std::vector<EmbeddingVector>& positive_vectors);

/// Little-endian binary form: u32 dimension, u64 count, then per entry
/// u32 id length + id bytes, u32 text length + text bytes, and `dimension`
/// IEEE-754 float32 values.
void save_index(const std::filesystem::path& path, const PassageIndex& index);
PassageIndex load_index(const std::filesystem::path& path);
std::string serialize_index(const PassageIndex& index);
PassageIndex deserialize_index(std::string_view bytes);

}  // namespace oasis::retrieval
