#pragma once

// RFC 4180 CSV: comma separated, CRLF or LF records, double-quoted fields with
// "" escapes.

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace srvfgan::csv {

using Record = std::vector<std::string>;

/// Quotes the field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Writes one record terminated by CRLF.
void write_record(std::ostream& out, const Record& fields);

struct ParsedRecord {
  Record fields;
  std::size_t line = 0;  // 1-based line on which the record starts
};

/// Throws ParseError on an unterminated quoted field or stray quote.
std::vector<ParsedRecord> parse(std::istream& in);

}  // namespace srvfgan::csv
