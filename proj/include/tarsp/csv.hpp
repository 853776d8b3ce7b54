#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace tarsp {

/// Minimal CSV: comma separated, optional double quotes around a field,
/// surrounding whitespace trimmed. Enough for the files this library writes
/// and for typical spreadsheet exports.
std::vector<std::string> split_csv_line(std::string_view line);

/// Whole-field numeric parse; false on trailing garbage or an empty field.
bool parse_double(std::string_view field, double& out);

/// Header plus rows; blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, or -1.
  long column(std::string_view name) const;
};

/// Throws Ingestion when a row's field count differs from the header.
CsvTable read_csv(std::istream& is, const std::string& source = "<input>");

std::string format_double(double v);

}  // namespace tarsp
