#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace oasis::text {

/// Trims and collapses every run of ASCII whitespace to a single space.
std::string normalize_whitespace(std::string_view s);

/// Lowercases ASCII letters and collapses whitespace. Used for the
/// "same claim" tests where casing and spacing should not matter.
std::string normalize_claim(std::string_view s);

/// Unigram tokenizer shared by ROUGE-1 and the overlap heuristics: ASCII
/// lowercase, ASCII punctuation replaced by spaces, whitespace split. Bytes
/// outside ASCII are kept as part of tokens.
std::vector<std::string> unigrams(std::string_view s);

/// Whitespace-separated word count.
std::size_t word_count(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::uint64_t fnv1a64(std::string_view data) noexcept;

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace oasis::text
