#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mutmod {

using json = nlohmann::json;

inline constexpr std::string_view kFormatVersion = "1";

/// One structured record per line. The first record is a header
/// {"mutmod": "1", "kind": "<kind>"}; blank lines and lines starting with '#'
/// are skipped.
struct DocRecord {
  int line = 0;
  json value;
};

struct Document {
  std::string kind;
  std::string origin;  // file name for messages
  std::filesystem::path base_dir;
  std::vector<DocRecord> records;
};

Document parse_document(std::string_view text, const std::string& origin,
                        const std::filesystem::path& base_dir = {});
Document read_document(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);   // throws IoError
void write_file(const std::filesystem::path& path, std::string_view content);

/// Header line for a document of the given kind.
std::string document_header(std::string_view kind);

}  // namespace mutmod
