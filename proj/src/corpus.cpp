#include "oasis/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

#include "oasis/errors.hpp"
#include "oasis/text.hpp"

namespace oasis::corpus {

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Length of a closing quote/bracket at `pos`, including the UTF-8 right
// quotes, or 0.
std::size_t closer_length(std::string_view s, std::size_t pos) {
  const char c = s[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  if (pos + 2 < s.size() && static_cast<unsigned char>(c) == 0xE2 &&
      static_cast<unsigned char>(s[pos + 1]) == 0x80) {
    const auto third = static_cast<unsigned char>(s[pos + 2]);
    if (third == 0x99 || third == 0x9D) return 3;
  }
  return 0;
}

}  // namespace

std::string Passage::text() const { return text::join(sentences, " "); }

const std::vector<std::string>& SentenceSplitter::default_abbreviations() {
  static const std::vector<std::string> kList = {
      "Dr.",   "Mr.",   "Mrs.",  "Ms.",   "Prof.", "Sr.",  "Jr.",   "St.",
      "Mt.",   "Ft.",   "vs.",   "e.g.",  "i.e.",  "cf.",  "approx.", "ca.",
      "Gen.",  "Col.",  "Lt.",   "Sgt.",  "Capt.", "Gov.", "Sen.",  "Rep.",
      "Rev.",  "Hon.",  "Fig.",  "No.",   "Vol.",  "pp.",  "Jan.",  "Feb.",
      "Aug.",  "Sept.", "Oct.",  "Nov.",  "Dec."};
  return kList;
}

SentenceSplitter::SentenceSplitter() : abbreviations_(default_abbreviations()) {}

SentenceSplitter::SentenceSplitter(std::vector<std::string> abbreviations)
    : abbreviations_(std::move(abbreviations)) {}

bool SentenceSplitter::is_abbreviation(std::string_view word) const {
  while (!word.empty() && (word.front() == '(' || word.front() == '"' ||
                           word.front() == '\'' || word.front() == '[')) {
    word.remove_prefix(1);
  }
  return std::find(abbreviations_.begin(), abbreviations_.end(), word) !=
         abbreviations_.end();
}

std::vector<std::string> SentenceSplitter::split(std::string_view s) const {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_terminator(s[i])) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;  // one past the sentence's last byte
    while (end < s.size() && is_terminator(s[end])) ++end;
    while (end < s.size()) {
      const std::size_t len = closer_length(s, end);
      if (len == 0) break;
      end += len;
    }
    if (end < s.size() && !is_space(s[end])) {
      i = end;
      continue;
    }
    bool boundary = true;
    if (s[i] == '.' && end - i == 1) {
      std::size_t word_start = i;
      while (word_start > start && !is_space(s[word_start - 1])) --word_start;
      if (is_abbreviation(s.substr(word_start, i + 1 - word_start))) boundary = false;
    }
    if (boundary) {
      std::size_t next = end;
      while (next < s.size() && is_space(s[next])) ++next;
      if (next < s.size() && std::islower(static_cast<unsigned char>(s[next]))) boundary = false;
    }
    if (boundary) {
      std::string sentence = text::normalize_whitespace(s.substr(start, end - start));
      if (!sentence.empty()) out.push_back(std::move(sentence));
      start = end;
    }
    i = end;
  }
  std::string rest = text::normalize_whitespace(s.substr(start));
  if (!rest.empty()) out.push_back(std::move(rest));
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  static const SentenceSplitter kDefault;
  return kDefault.split(text);
}

std::string make_passage_id(std::string_view page_id, std::size_t start) {
  return std::string(page_id) + ":" + std::to_string(start);
}

std::vector<Passage> window_passages(const std::string& page_id,
                                     const std::vector<std::string>& sentences,
                                     WindowSpec spec) {
  if (spec.size == 0 || spec.stride == 0) {
    throw InvalidArgument("window size and stride must be positive");
  }
  std::vector<Passage> out;
  if (sentences.empty()) return out;
  if (sentences.size() < spec.size) {
    out.push_back({make_passage_id(page_id, 0), page_id, 0, sentences});
    return out;
  }
  for (std::size_t start = 0; start + spec.size <= sentences.size(); start += spec.stride) {
    auto first = sentences.begin() + static_cast<std::ptrdiff_t>(start);
    out.push_back({make_passage_id(page_id, start), page_id, start,
                   std::vector<std::string>(first, first + static_cast<std::ptrdiff_t>(spec.size))});
  }
  return out;
}

std::vector<Passage> page_passages(const Page& page, WindowSpec spec,
                                   const SentenceSplitter& splitter) {
  return window_passages(page.page_id, splitter.split(page.text), spec);
}

std::size_t sample_index(std::string_view key, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("cannot sample from an empty range");
  const std::uint64_t h = text::fnv1a64(key);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  return static_cast<std::size_t>(rng() % n);
}

Passage sample_passage(const Page& page, std::uint64_t seed, WindowSpec spec,
                       const SentenceSplitter& splitter) {
  auto windows = page_passages(page, spec, splitter);
  if (windows.empty()) throw UnusablePage("page '" + page.page_id + "' has no sentences");
  return std::move(windows[sample_index(page.page_id, windows.size(), seed)]);
}

jsonl::json to_json(const Passage& p) {
  return {{"passage_id", p.passage_id},
          {"page_id", p.page_id},
          {"start", p.start},
          {"sentences", p.sentences}};
}

Passage passage_from_json(const jsonl::json& obj) {
  Passage p;
  p.passage_id = jsonl::string_field(obj, "passage_id");
  p.page_id = jsonl::string_field(obj, "page_id");
  const auto& start = jsonl::field(obj, "start");
  if (!start.is_number_unsigned()) {
    throw FormatError("field 'start' must be a non-negative integer");
  }
  p.start = start.get<std::size_t>();
  const auto& sentences = jsonl::field(obj, "sentences");
  if (!sentences.is_array()) throw FormatError("field 'sentences' must be an array");
  for (const auto& s : sentences) {
    if (!s.is_string()) throw FormatError("sentences must be strings");
    p.sentences.push_back(s.get<std::string>());
  }
  if (p.sentences.empty()) throw FormatError("passage '" + p.passage_id + "' has no sentences");
  return p;
}

Page page_from_json(const jsonl::json& obj) {
  Page page;
  page.page_id = jsonl::string_field(obj, "page_id");
  page.title = obj.contains("title") ? jsonl::string_field(obj, "title") : std::string();
  page.text = jsonl::string_field(obj, "text");
  if (auto it = obj.find("popularity_rank"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw FormatError("field 'popularity_rank' must be an integer");
    page.popularity_rank = it->get<std::int64_t>();
  }
  return page;
}

std::vector<Page> load_pages(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<Page> pages;
  auto load_records = [&](const fs::path& file) {
    for (const auto& row : jsonl::read(file)) pages.push_back(page_from_json(row));
  };
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const auto ext = file.extension().string();
      if (ext == ".jsonl") {
        load_records(file);
      } else if (ext == ".json") {
        pages.push_back(page_from_json(jsonl::json::parse(jsonl::read_file(file))));
      } else if (ext == ".txt") {
        const auto stem = file.stem().string();
        pages.push_back({stem, stem, jsonl::read_file(file), std::nullopt});
      }
    }
  } else {
    load_records(path);
  }
  std::set<std::string> seen;
  for (const auto& page : pages) {
    if (!seen.insert(page.page_id).second) {
      throw FormatError("duplicate page_id '" + page.page_id + "'");
    }
    if (text::normalize_whitespace(page.text).empty()) {
      throw FormatError("page '" + page.page_id + "' has empty text");
    }
  }
  return pages;
}

std::vector<Passage> read_passages(const std::filesystem::path& path) {
  std::vector<Passage> out;
  for (const auto& row : jsonl::read(path)) out.push_back(passage_from_json(row));
  return out;
}

void write_passages(const std::filesystem::path& path, const std::vector<Passage>& passages) {
  std::vector<jsonl::json> rows;
  rows.reserve(passages.size());
  for (const auto& p : passages) rows.push_back(to_json(p));
  jsonl::write(path, rows);
}

}  // namespace oasis::corpus
