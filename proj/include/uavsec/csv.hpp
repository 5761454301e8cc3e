#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace uavsec {

/// Numbers print with 9 significant digits.
std::string format_number(double v);

/// RFC 4180 quoting: fields with comma, quote, CR or LF are quoted and
/// embedded quotes doubled.
std::string quote_field(std::string_view field);

using CsvCell = std::variant<double, long long, std::string>;

class CsvWriter {
 public:
  /// Throws std::runtime_error if the file cannot be created.
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<CsvCell>& cells);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws std::out_of_range when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace uavsec
