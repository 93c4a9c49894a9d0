#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sspn {

// RFC-4180-style CSV: comma separated, double-quote escaping, header row.
// Empty fields decode as nulls.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<std::string>>> rows;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

}  // namespace sspn
