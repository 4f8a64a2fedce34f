#include "oasis/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "oasis/errors.hpp"

namespace oasis::jsonl {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

std::vector<json> parse(std::string_view content, std::string_view origin) {
  std::vector<json> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      try {
        rows.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw FormatError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": invalid JSON: " + e.what());
      }
    }
    pos = end + 1;
  }
  return rows;
}

std::vector<json> read(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::string dump(const std::vector<json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump(-1, ' ', false, json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

void write(const std::filesystem::path& path, const std::vector<json>& rows) {
  write_file(path, dump(rows));
}

const json& field(const json& obj, const char* name) {
  if (!obj.is_object()) throw FormatError("expected a JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw FormatError(std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const json& obj, const char* name) {
  const json& v = field(obj, name);
  if (!v.is_string()) throw FormatError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

}  // namespace oasis::jsonl
