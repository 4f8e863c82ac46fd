#pragma once

// RFC-4180 CSV output: comma separated, CRLF line ends, fields quoted only
// when they contain a comma, quote or line break. Doubles are written with
// 17 significant digits so they read back bit-exactly.

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pocketlab {

std::string format_double(double v);
std::string csv_escape(std::string_view field);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(std::string_view s);
  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  void end_row();

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace pocketlab
