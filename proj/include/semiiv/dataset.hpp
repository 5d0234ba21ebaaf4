#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semiiv {

/// Row-aligned named real-valued columns.
///
/// Column order is insertion order; lookups are by name. All columns share one
/// row count, fixed by the first column added.
class Dataset {
 public:
  Dataset() = default;

  void add_column(std::string name, std::vector<double> values);

  [[nodiscard]] bool has_column(std::string_view name) const;
  [[nodiscard]] std::span<const double> column(std::string_view name) const;
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return names_.size(); }
  [[nodiscard]] bool empty() const { return names_.empty(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::size_t rows_ = 0;
};

// CSV: header row required, ',' separator, '.' decimal point, no empty cells.
// Errors name the offending row (1-based, header is row 1) and column.
Dataset read_csv(std::istream& in, std::string_view source = "<stream>");
Dataset read_csv_file(const std::string& path);

// Values are written in shortest round-trip form, so write -> read is exact.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);

std::string format_double(double value);

}  // namespace semiiv
