#include "recorrupt/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace recorrupt {

void Report::add(std::string name, double value, double se, double threshold, bool pass) {
  rows.push_back({std::move(name), value, se, threshold, pass});
}

bool Report::all_pass() const {
  for (const ReportRow& r : rows)
    if (!r.pass) return false;
  return true;
}

const ReportRow& Report::find(const std::string& name) const {
  for (const ReportRow& r : rows)
    if (r.name == name) return r;
  throw std::out_of_range("report has no row named '" + name + "'");
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {
std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += quote(row[i]);
  }
  out += '\n';
}
} // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("to_csv: row has " + std::to_string(row.size()) + " fields, header has " +
                                  std::to_string(table.header.size()));
    }
    append_row(out, row);
  }
  return out;
}

void emit_csv(const CsvTable& table, const std::string& path) {
  const std::string text = to_csv(table);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw std::invalid_argument("parse_csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

CsvTable report_table(const Report& report) {
  CsvTable t;
  t.header = {"name", "value", "se", "threshold", "pass"};
  for (const ReportRow& r : report.rows) {
    t.rows.push_back({r.name, format_real(r.value), format_real(r.se), format_real(r.threshold), r.pass ? "1" : "0"});
  }
  return t;
}

} // namespace recorrupt
