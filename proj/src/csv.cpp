#include "uavsec/csv.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace uavsec {

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string quote_field(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot create '" + path + "'");
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << quote_field(header[i]);
  out_ << "\n";
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_) throw std::logic_error("CsvWriter: column count mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) out_ << format_number(v);
          else if constexpr (std::is_same_v<T, long long>) out_ << v;
          else out_ << quote_field(v);
        },
        cells[i]);
  }
  out_ << "\n";
  if (!out_) throw std::runtime_error("CsvWriter: write failed");
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::logic_error("CsvWriter: column count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
  out_ << "\n";
  if (!out_) throw std::runtime_error("CsvWriter: write failed");
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::out_of_range("CSV has no column '" + std::string(name) + "'");
}

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
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
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw std::runtime_error("CSV: unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  auto records = parse_records(buf.str());
  if (records.empty()) throw std::runtime_error("'" + path + "' has no header row");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size())
      throw std::runtime_error("'" + path + "' row " + std::to_string(i) + " has wrong column count");
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

}  // namespace uavsec
