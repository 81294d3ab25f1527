#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace monest {

// Shortest representation that parses back to the same double; nan/inf spelled out.
std::string format_double(double v);

// RFC 4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view s);

// Rows end with CRLF.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(std::span<const std::string> names);
  void row(std::span<const double> values);
  void row(std::span<const std::string> fields);

  std::size_t rows() const { return rows_; }

 private:
  std::ostream& out_;
  std::size_t columns_ = 0;
  std::size_t rows_ = 0;
};

// Minimal RFC 4180 reader, used by tests and the sweep merger.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace monest
