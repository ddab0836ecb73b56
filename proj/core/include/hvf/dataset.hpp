#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hvf/calendar.hpp"

namespace hvf {

/// Column names of the simulator output, in file order (after `timestamp`).
const std::vector<std::string>& dataset_columns();

/// Time-indexed table of simulator variables at 15-minute granularity.
/// Values are stored column-major.
class SimulatedDataset {
 public:
  SimulatedDataset() = default;
  SimulatedDataset(std::vector<Timestamp> timestamps, std::vector<std::string> columns,
                   std::vector<std::vector<double>> data);

  std::size_t rows() const noexcept { return timestamps_.size(); }
  const std::vector<Timestamp>& timestamps() const noexcept { return timestamps_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  bool has_column(std::string_view name) const;
  /// Throws ConfigError naming the column when absent.
  const std::vector<double>& column(std::string_view name) const;
  std::vector<double>& column(std::string_view name);

  /// Rows [begin, end) as a new dataset.
  SimulatedDataset slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<Timestamp> timestamps_;
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> data_;
};

/// Writes `timestamp` followed by every column, fixed 6-decimal values.
void write_dataset_csv(const SimulatedDataset& ds, const std::filesystem::path& path);
/// Header-driven read: column order in the file does not matter. Throws
/// ParseError with the row number on malformed content.
SimulatedDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace hvf
