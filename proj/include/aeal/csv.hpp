#pragma once

#include "aeal/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace aeal::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header field, or -1.
  int find(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
};

/// RFC-4180 parser. Quoted fields may contain separators, doubled quotes and
/// line breaks; CRLF and LF line endings are both accepted. Lines starting
/// with `comment` (when nonzero) are skipped outside quoted fields.
inline Table parse(std::string_view text, char comment = '\0') {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool at_line_start = true;
  std::size_t line = 1;

  const auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  const auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
    at_line_start = true;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (at_line_start && comment != '\0' && c == comment) {
      while (i < text.size() && text[i] != '\n') ++i;
      ++line;
      continue;
    }
    at_line_start = false;
    switch (c) {
      case '"':
        if (!field.empty() || field_quoted)
          fail(Errc::CsvParse, "stray quote on line " + std::to_string(line));
        in_quotes = true;
        field_quoted = true;
        break;
      case ',': end_field(); break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field_quoted) fail(Errc::CsvParse, "text after closing quote on line " + std::to_string(line));
        field += c;
    }
  }
  if (in_quotes) fail(Errc::CsvParse, "unterminated quoted field");
  if (!field.empty() || field_quoted || !record.empty()) end_record();

  Table t;
  if (records.empty()) fail(Errc::CsvParse, "missing header row");
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      fail(Errc::CsvParse, "record " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                               " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

inline Table read_file(const std::string& path, char comment = '\0') {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::CsvParse, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), comment);
}

inline double to_double(std::string_view s) {
  double v = 0.0;
  auto first = s.data();
  const auto last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty())
    fail(Errc::CsvParse, "not a number: '" + std::string(s) + "'");
  return v;
}

/// Shortest text that is still 17 significant digits, so values round-trip.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (j) out << ',';
    out << quote(fields[j]);
  }
  out << '\n';
}

}  // namespace aeal::csv
