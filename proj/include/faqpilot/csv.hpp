#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace faqpilot::csv {

using Row = std::vector<std::string>;

/// Writes one RFC 4180 record. Fields containing a comma, quote, CR or LF
/// are quoted; embedded quotes are doubled.
void write_row(std::ostream& out, const Row& row);
std::string escape(const std::string& field);

/// Streaming reader. Quoted fields may span physical lines; line_number()
/// reports the physical line the last record started on (1-based).
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next record, or nullopt at end of input. Throws Error(MalformedRow)
  /// for an unterminated quoted field.
  std::optional<Row> next();
  [[nodiscard]] std::size_t line_number() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

}  // namespace faqpilot::csv
