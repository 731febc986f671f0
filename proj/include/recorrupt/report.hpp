#pragma once

#include <string>
#include <vector>

namespace recorrupt {

/// One validated metric. `threshold` is the tolerance the check applied to `value`.
struct ReportRow {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;

  void add(std::string name, double value, double se, double threshold, bool pass);
  bool all_pass() const;
  const ReportRow& find(const std::string& name) const;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Shortest round-trip-safe text for a real: 17 significant digits.
std::string format_real(double v);
std::string to_csv(const CsvTable& table);
/// Writes `table` with LF line endings; throws std::runtime_error when the file cannot be written.
void emit_csv(const CsvTable& table, const std::string& path);
/// RFC-4180 reader (quoted fields, doubled quotes, embedded commas/newlines).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

CsvTable report_table(const Report& report);

} // namespace recorrupt
