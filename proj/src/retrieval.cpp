#include "oasis/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "oasis/errors.hpp"
#include "oasis/jsonl.hpp"

namespace oasis::retrieval {

PassageIndex::PassageIndex(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw InvalidArgument("index dimension must be positive");
}

void PassageIndex::add(std::string passage_id, std::string passage_text,
                       std::span<const float> vec) {
  if (vec.size() != dimension_) {
    throw DimensionMismatch("vector for '" + passage_id + "' has dimension " +
                            std::to_string(vec.size()) + ", index has " +
                            std::to_string(dimension_));
  }
  for (float x : vec) {
    if (!std::isfinite(x)) throw InvalidArgument("non-finite value in vector for '" + passage_id + "'");
  }
  if (rows_.count(passage_id)) throw InvalidArgument("duplicate passage_id '" + passage_id + "'");
  rows_.emplace(passage_id, ids_.size());
  ids_.push_back(std::move(passage_id));
  texts_.push_back(std::move(passage_text));
  data_.insert(data_.end(), vec.begin(), vec.end());
}

std::span<const float> PassageIndex::vector(std::size_t row) const {
  if (row >= ids_.size()) throw InvalidArgument("row out of range");
  return {data_.data() + row * dimension_, dimension_};
}

std::optional<std::size_t> PassageIndex::find(const std::string& passage_id) const {
  auto it = rows_.find(passage_id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

PassageIndex index_build(const std::vector<corpus::Passage>& passages,
                         backends::EmbeddingBackend& embedder, const IndexBuildOptions& options) {
  if (passages.empty()) throw InvalidArgument("cannot build an index from zero passages");
  std::unordered_set<std::string> ids, texts;
  std::vector<const corpus::Passage*> kept;
  std::vector<std::string> kept_texts;
  for (const auto& p : passages) {
    if (!ids.insert(p.passage_id).second) {
      throw InvalidArgument("duplicate passage_id '" + p.passage_id + "'");
    }
    std::string t = p.text();
    if (options.dedup_texts && !texts.insert(t).second) {
      spdlog::debug("index: skipping '{}' (duplicate text)", p.passage_id);
      continue;
    }
    kept.push_back(&p);
    kept_texts.push_back(std::move(t));
  }

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n_batches = (kept.size() + batch - 1) / batch;
  std::vector<std::vector<EmbeddingVector>> results(n_batches);
  std::vector<std::exception_ptr> errors(n_batches);
  auto run_batch = [&](std::size_t b) {
    try {
      const std::size_t begin = b * batch;
      const std::size_t end = std::min(kept.size(), begin + batch);
      results[b] = embedder.embed(std::span<const std::string>(kept_texts).subspan(begin, end - begin));
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n_batches);
  if (workers == 1) {
    for (std::size_t b = 0; b < n_batches; ++b) run_batch(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < n_batches; b = next++) run_batch(b);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t dim = results.front().front().size();
  PassageIndex index(dim);
  std::size_t i = 0;
  for (auto& vecs : results) {
    for (auto& v : vecs) {
      if (v.size() != dim) {
        throw DimensionMismatch("embedding backend returned dimensions " + std::to_string(dim) +
                                " and " + std::to_string(v.size()));
      }
      index.add(kept[i]->passage_id, std::move(kept_texts[i]), v);
      ++i;
    }
  }
  return index;
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("dot product of dimensions " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

namespace {

bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.passage_id < b.passage_id;
}

// Bounded heap whose front is the worst kept candidate.
RankedResult scan(const PassageIndex& index, std::span<const float> query, std::size_t k,
                  std::size_t begin, std::size_t end) {
  RankedResult heap;
  heap.reserve(std::min(k, end - begin) + 1);
  for (std::size_t row = begin; row < end; ++row) {
    const double score = dot(index.vector(row), query);
    if (heap.size() == k) {
      const ScoredPassage& worst = heap.front();
      if (score < worst.score ||
          (score == worst.score && index.passage_id(row) > worst.passage_id)) {
        continue;
      }
    }
    heap.push_back({index.passage_id(row), score, row});
    std::push_heap(heap.begin(), heap.end(), ranks_before);
    if (heap.size() > k) {
      std::pop_heap(heap.begin(), heap.end(), ranks_before);
      heap.pop_back();
    }
  }
  std::sort_heap(heap.begin(), heap.end(), ranks_before);
  return heap;
}

}  // namespace

RankedResult top_k(const PassageIndex& index, std::span<const float> query, std::size_t k,
                   std::size_t shards) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  if (query.size() != index.dimension()) {
    throw DimensionMismatch("query has dimension " + std::to_string(query.size()) +
                            ", index has " + std::to_string(index.dimension()));
  }
  const std::size_t n = index.size();
  shards = std::clamp<std::size_t>(shards, 1, std::max<std::size_t>(1, n / 1024));
  if (shards == 1) return scan(index, query, k, 0, n);

  std::vector<RankedResult> partial(shards);
  {
    std::vector<std::jthread> pool;
    for (std::size_t s = 0; s < shards; ++s) {
      pool.emplace_back([&, s] { partial[s] = scan(index, query, k, n * s / shards, n * (s + 1) / shards); });
    }
  }
  RankedResult merged;
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end(), ranks_before);
  if (merged.size() > k) merged.resize(k);
  return merged;
}

double recall_at_k(const RankedResult& results, const std::set<std::string>& relevant) {
  return recall_at_k(results, relevant, results.size());
}

double recall_at_k(const RankedResult& results, const std::set<std::string>& relevant,
                   std::size_t k) {
  if (relevant.empty()) throw InvalidArgument("recall needs a non-empty relevant set");
  std::set<std::string> hit;
  for (std::size_t i = 0; i < std::min(k, results.size()); ++i) {
    if (relevant.count(results[i].passage_id)) hit.insert(results[i].passage_id);
  }
  return static_cast<double>(hit.size()) / static_cast<double>(relevant.size());
}

double in_batch_loss(const std::vector<EmbeddingVector>& claims,
                     const std::vector<EmbeddingVector>& positives) {
  const std::size_t n = claims.size();
  if (n == 0) throw InvalidArgument("in-batch loss needs at least one pair");
  if (positives.size() != n) throw InvalidArgument("claim and positive batches differ in size");
  const std::size_t dim = claims.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (claims[i].size() != dim || positives[i].size() != dim) {
      throw DimensionMismatch("batch vectors must share one dimension");
    }
    for (float x : claims[i]) {
      if (!std::isfinite(x)) throw InvalidArgument("non-finite value in claim vector");
    }
    for (float x : positives[i]) {
      if (!std::isfinite(x)) throw InvalidArgument("non-finite value in passage vector");
    }
  }
  double loss = 0.0;
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) scores[j] = dot(claims[i], positives[j]);
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    loss += std::max(0.0, m + std::log(sum) - scores[i]);
  }
  return loss;
}

// --- persistence ----------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_bytes(std::string& out, const std::string& s) {
  if (s.size() > UINT32_MAX) throw InvalidArgument("string too long for index record");
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string string() {
    const auto len = static_cast<std::size_t>(uint(4));
    need(len);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(uint(4))); }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("index file is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_index(const PassageIndex& index) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(index.dimension()));
  put_u64(out, index.size());
  for (std::size_t row = 0; row < index.size(); ++row) {
    put_bytes(out, index.passage_id(row));
    put_bytes(out, index.passage_text(row));
    for (float x : index.vector(row)) put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

PassageIndex deserialize_index(std::string_view bytes) {
  Reader in(bytes);
  const auto dim = static_cast<std::size_t>(in.uint(4));
  const auto count = in.uint(8);
  if (dim == 0) throw FormatError("index header has zero dimension");
  PassageIndex index(dim);
  std::vector<float> vec(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = in.string();
    std::string text = in.string();
    for (float& x : vec) x = in.f32();
    try {
      index.add(std::move(id), std::move(text), vec);
    } catch (const InvalidArgument& e) {
      throw FormatError(std::string("corrupt index record: ") + e.what());
    }
  }
  if (!in.done()) throw FormatError("trailing bytes after index records");
  return index;
}

void save_index(const std::filesystem::path& path, const PassageIndex& index) {
  jsonl::write_file(path, serialize_index(index));
}

PassageIndex load_index(const std::filesystem::path& path) {
  return deserialize_index(jsonl::read_file(path));
}

}  // namespace oasis::retrieval
