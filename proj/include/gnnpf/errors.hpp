#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace gnnpf {

// Bad arguments or configuration; the CLI maps this to exit code 2.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or mismatched input file. Messages name the file and location.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FetchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// Parses JSON text; syntax errors become FormatError with `where` and the
// byte offset of the failure.
inline nlohmann::json parse_json_text(std::string_view text, const std::string& where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + ": JSON parse error at byte " + std::to_string(e.byte) + ": " +
                      e.what());
  }
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

inline void expect_schema(const nlohmann::json& doc, int version, const std::string& where) {
  if (!doc.is_object() || !doc.contains("schema_version"))
    throw FormatError(where + ": missing schema_version");
  const auto& v = doc.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != version)
    throw FormatError(where + ": unsupported schema_version " + v.dump() + " (expected " +
                      std::to_string(version) + ")");
}

}  // namespace gnnpf
