#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oasis/jsonl.hpp"

namespace oasis::corpus {

struct Page {
  std::string page_id;
  std::string title;
  std::string text;
  std::optional<std::int64_t> popularity_rank;
};

/// A window of consecutive sentences from one page. The id is derived from
/// (page_id, start) and is therefore stable across runs.
struct Passage {
  std::string passage_id;
  std::string page_id;
  std::size_t start = 0;
  std::vector<std::string> sentences;

  /// Sentences joined by single spaces.
  std::string text() const;

  bool operator==(const Passage&) const = default;
};

/// Sliding-window geometry: `size` sentences per passage, advancing by
/// `stride`. Defaults are the values used to build the original resource.
struct WindowSpec {
  std::size_t size = 5;
  std::size_t stride = 1;
};

/// Rule-based sentence segmenter. A sentence ends at a run of '.', '!' or
/// '?' (plus closing quotes/brackets) followed by whitespace or end of
/// input, unless the period closes a guarded abbreviation or the next word
/// starts in lowercase.
class SentenceSplitter {
 public:
  SentenceSplitter();
  explicit SentenceSplitter(std::vector<std::string> abbreviations);

  std::vector<std::string> split(std::string_view text) const;

  const std::vector<std::string>& abbreviations() const { return abbreviations_; }
  static const std::vector<std::string>& default_abbreviations();

 private:
  bool is_abbreviation(std::string_view word) const;

  std::vector<std::string> abbreviations_;
};

/// Segments with the default abbreviation guard list.
std::vector<std::string> split_sentences(std::string_view text);

std::string make_passage_id(std::string_view page_id, std::size_t start);

/// Windows start at 0, stride, 2*stride, ... while start + size fits; a page
/// shorter than `size` yields one passage holding every sentence, and an
/// empty sentence list yields nothing.
std::vector<Passage> window_passages(const std::string& page_id,
                                     const std::vector<std::string>& sentences,
                                     WindowSpec spec);

std::vector<Passage> page_passages(const Page& page, WindowSpec spec,
                                   const SentenceSplitter& splitter = SentenceSplitter());

/// Uniform choice in [0, n) that depends only on (seed, key).
std::size_t sample_index(std::string_view key, std::size_t n, std::uint64_t seed);

/// Picks one window of the page uniformly at random; throws UnusablePage if
/// the page has no sentences.
Passage sample_passage(const Page& page, std::uint64_t seed, WindowSpec spec = {},
                       const SentenceSplitter& splitter = SentenceSplitter());

// Serialization. Page records are {page_id, title, text[, popularity_rank]};
// passage records are {passage_id, page_id, start, sentences}.
jsonl::json to_json(const Passage& passage);
Passage passage_from_json(const jsonl::json& obj);
Page page_from_json(const jsonl::json& obj);

/// Loads pages from a line-delimited record file, or from a directory whose
/// entries are read in name order: *.jsonl (records), *.json (one record),
/// *.txt (raw text; the file stem becomes page_id and title). Page ids must
/// be unique and texts non-empty.
std::vector<Page> load_pages(const std::filesystem::path& path);

std::vector<Passage> read_passages(const std::filesystem::path& path);
void write_passages(const std::filesystem::path& path, const std::vector<Passage>& passages);

}  // namespace oasis::corpus
