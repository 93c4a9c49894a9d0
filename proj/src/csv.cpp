#include "sspn/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sspn {

namespace {

std::vector<std::optional<std::string>> parse_record(const std::string& text, size_t& pos,
                                                     const std::string& origin, size_t line) {
  std::vector<std::optional<std::string>> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  auto flush = [&] {
    if (!was_quoted && field.empty())
      fields.emplace_back(std::nullopt);
    else
      fields.emplace_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  while (pos < text.size()) {
    char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
        } else {
          quoted = false;
          ++pos;
        }
      } else {
        field += c;
        ++pos;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty())
        throw std::runtime_error(origin + ":" + std::to_string(line) +
                                 ": quote inside unquoted field");
      quoted = true;
      was_quoted = true;
      ++pos;
    } else if (c == ',') {
      flush();
      ++pos;
    } else if (c == '\r') {
      ++pos;
      if (pos < text.size() && text[pos] == '\n') ++pos;
      flush();
      return fields;
    } else if (c == '\n') {
      ++pos;
      flush();
      return fields;
    } else {
      field += c;
      ++pos;
    }
  }
  if (quoted)
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": unterminated quote");
  flush();
  return fields;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable table;
  size_t pos = 0;
  size_t line = 1;
  if (text.empty()) throw std::runtime_error(origin + ": missing header row");
  auto header = parse_record(text, pos, origin, line++);
  for (auto& h : header) table.header.push_back(h.value_or(""));
  while (pos < text.size()) {
    if (text[pos] == '\n' || text[pos] == '\r') {  // tolerate a trailing newline
      size_t rest = pos;
      while (rest < text.size() && (text[rest] == '\n' || text[rest] == '\r')) ++rest;
      if (rest == text.size()) break;
    }
    auto fields = parse_record(text, pos, origin, line);
    if (fields.size() != table.header.size())
      throw std::runtime_error(origin + ":" + std::to_string(line) + ": expected " +
                               std::to_string(table.header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    ++line;
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

}  // namespace sspn
