#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hvf/tensor.hpp"

namespace hvf {

/// One forecast instance in °C.
struct ForecastInstance {
  std::size_t instance = 0;
  Tensor values;  // [horizon × zones × Q]
  Tensor actual;  // [horizon × zones]
};

struct ForecastSet {
  std::vector<double> levels;
  std::size_t horizon = 0;
  std::size_t zones = 0;
  std::vector<ForecastInstance> instances;

  /// Throws DimensionError when an instance does not match horizon/zones/levels.
  void validate() const;
  std::size_t median_index() const;
};

/// 100·RMSE/mean(actual). Throws DimensionError on length mismatch or empty
/// input, NumericError when mean(actual) is zero.
double cvrmse(std::span<const double> actual, std::span<const double> predicted);

struct HorizonMetrics {
  std::size_t horizon = 0, zones = 0;
  std::vector<std::vector<double>> per_zone;  // [zone][step − 1]
  std::vector<double> zone_mean;              // [step − 1], mean of the per-zone curves
  std::vector<double> aggregate;              // per zone over every step
  double overall = 0;                         // every zone and step pooled
};

/// Median-forecast CVRMSE per zone and step over all instances.
/// Throws ConfigError when there are no instances.
HorizonMetrics per_horizon_cvrmse(const ForecastSet& set);

struct CoverageEntry {
  double nominal = 0;
  double lower_level = 0, upper_level = 0;
  double coverage = 0;
  double crossing_freq = 0;
};

struct CoverageReport {
  std::vector<CoverageEntry> entries;
  /// Fraction of (instance, step, zone) triples whose quantiles needed reordering.
  double crossing_freq = 0;
  std::size_t triples = 0;
};

/// Central intervals [(1−n)/2, (1+n)/2] for each nominal level n, evaluated after
/// sorting each triple's quantiles ascending. Throws ConfigError when a
/// required quantile level is absent.
CoverageReport interval_coverage(const ForecastSet& set, std::span<const double> nominal);

/// Mean pinball loss in °C over all instances, steps, zones and levels.
double mean_pinball(const ForecastSet& set);

enum class ExportFormat { Csv, JsonLines };

struct HorizonRow {
  std::string zone;  // "1".."Z" or "mean"
  std::size_t step = 0;
  double cvrmse_pct = 0;
};

/// Rows zone-major, steps 1..H; six significant digits.
void export_horizon_metrics(const HorizonMetrics& m, const std::filesystem::path& path, ExportFormat format);
std::vector<HorizonRow> import_horizon_metrics(const std::filesystem::path& path, ExportFormat format);

void export_coverage(const CoverageReport& r, const std::filesystem::path& path, ExportFormat format);
std::vector<CoverageEntry> import_coverage(const std::filesystem::path& path, ExportFormat format);

/// CSV `instance,step,zone,q_level,value_c,actual_c` with 1-based step and zone.
void write_forecast_dump(const ForecastSet& set, const std::filesystem::path& path);
/// Throws ParseError with the row number on malformed or incomplete content.
ForecastSet read_forecast_dump(const std::filesystem::path& path);

struct PlateauObservation {
  bool available = false;  // horizon ≥ 24
  double at_step_24 = 0;
  double mean_before_24 = 0;
  double mean_after_24 = 0;
  double max_relative_change_after_24 = 0;
  bool plateau = false;  // max relative change ≤ 0.25
};

PlateauObservation observe_plateau(const HorizonMetrics& m);

struct EvaluationSummary {
  HorizonMetrics horizon;
  CoverageReport coverage;
  double pinball_c = 0;
  PlateauObservation plateau;
  std::size_t instances = 0;
};

EvaluationSummary evaluate_forecasts(const ForecastSet& set, std::span<const double> nominal = {});

/// Creates `dir` if needed and writes horizon_cvrmse.csv, coverage.csv and summary.json.
void write_evaluation(const EvaluationSummary& s, const std::filesystem::path& dir);

}  // namespace hvf
