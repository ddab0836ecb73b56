#include "hvf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "hvf/errors.hpp"

namespace hvf {

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"t_out", "h_out", "w_out", "l_norm", "l_hor", "hol"};
    for (int i = 1; i <= 5; ++i) c.push_back("occu_" + std::to_string(i));
    for (int i = 1; i <= 5; ++i) c.push_back("e_" + std::to_string(i));
    for (int i = 1; i <= 4; ++i) c.push_back("ws_" + std::to_string(i));
    for (int i = 1; i <= 5; ++i) c.push_back("sp_heat_" + std::to_string(i));
    for (int i = 1; i <= 5; ++i) c.push_back("sp_cool_" + std::to_string(i));
    for (int i = 1; i <= 5; ++i) c.push_back("t_in_" + std::to_string(i));
    return c;
  }();
  return cols;
}

SimulatedDataset::SimulatedDataset(std::vector<Timestamp> timestamps, std::vector<std::string> columns,
                                   std::vector<std::vector<double>> data)
    : timestamps_(std::move(timestamps)), columns_(std::move(columns)), data_(std::move(data)) {
  if (columns_.size() != data_.size()) throw DimensionError("dataset: column name/data count mismatch");
  for (std::size_t c = 0; c < data_.size(); ++c) {
    if (data_[c].size() != timestamps_.size()) {
      throw DimensionError("dataset: column '" + columns_[c] + "' has " +
                           std::to_string(data_[c].size()) + " rows, expected " +
                           std::to_string(timestamps_.size()));
    }
  }
}

bool SimulatedDataset::has_column(std::string_view name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

const std::vector<double>& SimulatedDataset::column(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw ConfigError("dataset has no column '" + std::string(name) + "'");
  return data_[static_cast<std::size_t>(it - columns_.begin())];
}

std::vector<double>& SimulatedDataset::column(std::string_view name) {
  return const_cast<std::vector<double>&>(std::as_const(*this).column(name));
}

SimulatedDataset SimulatedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw DimensionError("dataset slice out of range");
  std::vector<Timestamp> ts(timestamps_.begin() + static_cast<std::ptrdiff_t>(begin),
                            timestamps_.begin() + static_cast<std::ptrdiff_t>(end));
  std::vector<std::vector<double>> data;
  for (const auto& col : data_) {
    data.emplace_back(col.begin() + static_cast<std::ptrdiff_t>(begin),
                      col.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return SimulatedDataset(std::move(ts), columns_, std::move(data));
}

void write_dataset_csv(const SimulatedDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "timestamp";
  for (const auto& c : ds.columns()) out << ',' << c;
  out << '\n';
  std::vector<const std::vector<double>*> cols;
  for (const auto& c : ds.columns()) cols.push_back(&ds.column(c));
  char buf[64];
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    out << format_timestamp(ds.timestamps()[r]);
    for (const auto* col : cols) {
      std::snprintf(buf, sizeof buf, ",%.6f", (*col)[r]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

SimulatedDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset '" + path.string() + "' is empty");
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header.front() != "timestamp") {
    throw ParseError("dataset row 1: first column must be 'timestamp'");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (names[i] == names[j]) throw ParseError("dataset row 1: duplicate column '" + names[i] + "'");
    }
  }
  std::vector<Timestamp> ts;
  std::vector<std::vector<double>> data(names.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("dataset row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    auto t = parse_timestamp(fields[0]);
    if (!t) throw ParseError("dataset row " + std::to_string(row) + ": bad timestamp '" + fields[0] + "'");
    ts.push_back(*t);
    for (std::size_t c = 0; c < names.size(); ++c) {
      auto v = detail::parse_double(fields[c + 1]);
      if (!v) {
        throw ParseError("dataset row " + std::to_string(row) + ": bad value '" + fields[c + 1] +
                         "' in column '" + names[c] + "'");
      }
      data[c].push_back(*v);
    }
  }
  return SimulatedDataset(std::move(ts), std::move(names), std::move(data));
}

}  // namespace hvf
