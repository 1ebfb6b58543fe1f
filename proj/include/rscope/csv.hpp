#pragma once

#include "rscope/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace rscope {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// RFC 4180 quoting: fields holding commas, quotes, or newlines get
/// wrapped, embedded quotes doubled.
inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw ArgumentError("cannot open for writing: " + path.string());
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(cells[i]);
    }
    out_ << "\r\n";
    if (!out_) throw FormatError("csv write failed");
  }

 private:
  std::ofstream out_;
};

}  // namespace rscope
