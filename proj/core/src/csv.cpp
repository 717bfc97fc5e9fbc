#include "srvfgan/csv.hpp"

#include "srvfgan/error.hpp"

#include <iterator>

namespace srvfgan::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_record(std::ostream& out, const Record& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << escape(fields[i]);
  }
  out << "\r\n";
}

std::vector<ParsedRecord> parse(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<ParsedRecord> records;
  ParsedRecord current;
  std::string field;
  std::size_t line = 1;
  current.line = 1;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank line is not a record.
    if (!(current.fields.size() == 1 && current.fields[0].empty())) records.push_back(std::move(current));
    current = ParsedRecord{};
    current.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == ',') {
      end_field();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      ++line;
      end_record();
    } else if (c == '"') {
      if (field_started) throw Error(Errc::ParseError, "line " + std::to_string(line) + ": stray quote in field");
      quoted = true;
      field_started = true;
    } else {
      if (after_quote) {
        throw Error(Errc::ParseError, "line " + std::to_string(line) + ": text after closing quote");
      }
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(Errc::ParseError, "line " + std::to_string(current.line) + ": unterminated quoted field");
  if (field_started || !current.fields.empty()) end_record();
  return records;
}

}  // namespace srvfgan::csv
