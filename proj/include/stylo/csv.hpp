#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stylo {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // line the record starts on
};

/// RFC 4180 parsing: quoted fields may hold commas, doubled quotes and line
/// breaks. Blank lines are skipped. Throws DataError on malformed quoting.
std::vector<CsvRecord> parse_csv(std::string_view data);

/// Quotes a field when it contains a comma, quote, or line break.
std::string csv_escape(std::string_view field);

}  // namespace stylo
