#include "semiiv/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "semiiv/error.hpp"

namespace semiiv {

void Dataset::add_column(std::string name, std::vector<double> values) {
  if (name.empty()) throw InputError("column name must not be empty");
  if (has_column(name)) throw InputError("duplicate column '" + name + "'");
  if (!names_.empty() && values.size() != rows_) {
    throw InputError("column '" + name + "' has " + std::to_string(values.size()) +
                     " rows, dataset has " + std::to_string(rows_));
  }
  rows_ = values.size();
  names_.push_back(std::move(name));
  columns_.push_back(std::move(values));
}

bool Dataset::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::span<const double> Dataset::column(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InputError("missing column '" + std::string(name) + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

}  // namespace

Dataset read_csv(std::istream& in, std::string_view source) {
  const std::string where(source);
  std::string line;
  if (!std::getline(in, line)) throw InputError(where + ": empty file, header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto cell : split(line)) {
    if (cell.empty()) throw InputError(where + ": empty column name in header");
    header.emplace_back(cell);
  }
  std::vector<std::vector<double>> values(header.size());

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InputError(where + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto cell = cells[c];
      if (cell.empty()) {
        throw InputError(where + ": empty cell at row " + std::to_string(row) + ", column '" + header[c] +
                         "' (missing values are not supported)");
      }
      if (cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw InputError(where + ": non-numeric value '" + std::string(cells[c]) + "' at row " +
                         std::to_string(row) + ", column '" + header[c] + "'");
      }
      values[c].push_back(v);
    }
  }

  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) data.add_column(header[c], std::move(values[c]));
  return data;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return read_csv(in, path);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& names = data.names();
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  std::vector<std::span<const double>> cols;
  for (const auto& name : names) cols.push_back(data.column(name));
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << format_double(cols[c][r]);
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_csv(out, data);
  out.flush();
  if (!out) throw InputError("write to '" + path + "' failed");
}

}  // namespace semiiv
