#include "pocketlab/csv.hpp"

#include <cmath>
#include <cstdio>

namespace pocketlab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter& CsvWriter::field(std::string_view s) {
  if (!first_) out_ << ',';
  out_ << csv_escape(s);
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::field(long long v) { return field(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
  out_ << "\r\n";
  first_ = true;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (const auto& f : fields) field(std::string_view(f));
  end_row();
}

}  // namespace pocketlab
