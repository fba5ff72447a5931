#pragma once

// Line-delimited JSON record I/O shared by the persistence code. Private to
// the core library so nlohmann/json stays out of the installed headers.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fads/error.hpp"
#include <nlohmann/json.hpp>

namespace fads::detail {

using Json = nlohmann::json;

struct Record {
  std::size_t line_no;
  Json value;
};

inline std::string dump_record(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

/// Blank lines are skipped; anything else must be a JSON object.
inline std::vector<Record> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kMalformedRecord,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object())
      throw Error(ErrorKind::kMalformedRecord,
                  path.string() + ":" + std::to_string(line_no) + ": record is not an object");
    out.push_back({line_no, std::move(j)});
  }
  return out;
}

inline void write_records(const std::filesystem::path& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoFailure, "cannot write " + path.string());
  for (const auto& r : records) out << dump_record(r) << '\n';
  if (!out) throw Error(ErrorKind::kIoFailure, "write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIoFailure, "write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.filename().string() + ":" + std::to_string(line_no);
}

}  // namespace fads::detail
