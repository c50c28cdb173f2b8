#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include "shiftgauge/errors.hpp"

namespace shiftgauge::csv {

// Shortest decimal string that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// RFC-4180 quoting: wrap when the field contains a comma, quote, or newline.
inline std::string escape_field(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += escape_field(fields[i]);
  }
  line += '\n';
  return line;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError(str_cat("cannot open for writing: ", path));
    path_ = path;
  }

  void row(const std::vector<std::string>& fields) {
    out_ << join_row(fields);
    if (!out_) throw IoError(str_cat("write failed: ", path_));
  }

 private:
  std::ofstream out_;
  std::string path_;
};

// State-machine parser for RFC-4180 input, including quoted fields with
// embedded separators and doubled quotes. A trailing newline does not yield
// an empty record.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool any_char = false;
  int c;
  while ((c = in.get()) != EOF) {
    any_char = true;
    if (in_quotes) {
      if (c == '"') {
        int peek = in.peek();
        if (peek == '"') {
          in.get();
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += static_cast<char>(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        break;
      case ',':
        row.push_back(field);
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        row.push_back(field);
        field.clear();
        rows.push_back(row);
        row.clear();
        any_char = false;
        break;
      default:
        field += static_cast<char>(c);
    }
  }
  if (in_quotes) throw FormatError("unterminated quoted CSV field");
  if (any_char) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<std::vector<std::string>> parse_file(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(str_cat("cannot open for reading: ", path));
  return parse(in);
}

inline double to_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw FormatError(str_cat("not a number: '", s, "' in ", context));
  return v;
}

}  // namespace shiftgauge::csv
