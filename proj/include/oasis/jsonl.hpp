#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace oasis::jsonl {

using json = nlohmann::json;

/// Reads a line-delimited JSON file. Blank lines are skipped; a line that
/// fails to parse raises FormatError naming the file and line number.
std::vector<json> read(const std::filesystem::path& path);

/// Parses line-delimited JSON from memory. `origin` labels error messages.
std::vector<json> parse(std::string_view content, std::string_view origin);

/// One compact object per line, '\n' terminated. Output is byte-stable for
/// equal inputs (object keys are emitted in sorted order).
std::string dump(const std::vector<json>& rows);

void write(const std::filesystem::path& path, const std::vector<json>& rows);

/// Whole-file helpers used by the index and report writers.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Typed field access that reports the missing or mistyped field by name.
const json& field(const json& obj, const char* name);
std::string string_field(const json& obj, const char* name);

}  // namespace oasis::jsonl
