#include "mutmod/document.hpp"

#include <fstream>
#include <sstream>

#include "mutmod/error.hpp"

namespace mutmod {

namespace {

[[noreturn]] void parse_fail(const std::string& origin, int line, std::size_t column,
                             const std::string& why) {
  throw Error(ErrorCode::ParseError, origin + ":" + std::to_string(line) + ":" +
                                         std::to_string(column) + ": " + why);
}

}  // namespace

Document parse_document(std::string_view text, const std::string& origin,
                        const std::filesystem::path& base_dir) {
  Document doc;
  doc.origin = origin;
  doc.base_dir = base_dir;
  bool have_header = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;

    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      std::string what = e.what();
      auto colon = what.find("syntax error");
      parse_fail(origin, line_no, e.byte == 0 ? 1 : e.byte,
                 colon == std::string::npos ? what : what.substr(colon));
    }
    if (!value.is_object()) parse_fail(origin, line_no, first + 1, "record must be an object");

    if (!have_header) {
      auto v = value.find("mutmod");
      if (v == value.end() || !v->is_string())
        parse_fail(origin, line_no, 1, "missing header {\"mutmod\": \"1\", \"kind\": ...}");
      if (v->get<std::string>() != kFormatVersion)
        parse_fail(origin, line_no, 1, "unsupported format version '" + v->get<std::string>() + "'");
      auto k = value.find("kind");
      if (k == value.end() || !k->is_string()) parse_fail(origin, line_no, 1, "header lacks a kind");
      doc.kind = k->get<std::string>();
      have_header = true;
      continue;
    }
    doc.records.push_back({line_no, std::move(value)});
  }
  if (!have_header) parse_fail(origin, 1, 1, "empty document");
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Document read_document(const std::filesystem::path& path) {
  return parse_document(read_file(path), path.string(), path.parent_path());
}

std::string document_header(std::string_view kind) {
  json h = {{"mutmod", kFormatVersion}, {"kind", kind}};
  return h.dump();
}

}  // namespace mutmod
