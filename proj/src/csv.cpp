#include "faqpilot/csv.hpp"

#include "faqpilot/error.hpp"

namespace faqpilot::csv {

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

std::optional<Row> Reader::next() {
  std::string line;
  if (!std::getline(in_, line)) return std::nullopt;
  ++line_;
  record_line_ = line_;

  Row row;
  std::string field;
  bool in_quotes = false;
  for (;;) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      // An unquoted CR ending the line belongs to a CRLF terminator.
      if (c == '\r' && i + 1 == line.size() && !in_quotes) break;
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    if (!in_quotes) break;
    field += '\n';
    if (!std::getline(in_, line)) {
      throw Error(ErrorCode::MalformedRow,
                  "unterminated quoted field starting at line " + std::to_string(record_line_));
    }
    ++line_;
  }
  row.push_back(std::move(field));
  return row;
}

}  // namespace faqpilot::csv
