#pragma once

// Dataset → scaled model samples: cyclical time encodings, fixed-interval
// min-max scaling to [−1, 1], forecast-noise injection on known-future
// weather, sliding windows and chronological splits.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hvf/calendar.hpp"
#include "hvf/dataset.hpp"
#include "hvf/tensor.hpp"

namespace hvf {

struct FeatureRange {
  std::string name;
  double min = -1.0;
  double max = 1.0;
};

/// Maps v ∈ [lo, hi] to 2(v − lo)/(hi − lo) − 1. No clamping.
double minmax_scale(double v, double lo, double hi);
double minmax_inverse(double s, double lo, double hi);

/// Per-feature scaling intervals.
class ScalerSpec {
 public:
  ScalerSpec() = default;
  /// Throws ConfigError on duplicate names or max ≤ min.
  explicit ScalerSpec(std::vector<FeatureRange> ranges);

  /// Intervals for every model feature.
  static ScalerSpec defaults();

  const std::vector<FeatureRange>& features() const noexcept { return ranges_; }
  bool contains(std::string_view feature) const;
  /// Throws ConfigError for an unknown feature.
  const FeatureRange& range(std::string_view feature) const;

  /// Out-of-interval values are clamped first; `clamped` (if given) is
  /// incremented for each one.
  double scale(std::string_view feature, double v, std::size_t* clamped = nullptr) const;
  double inverse_scale(std::string_view feature, double s) const;

  friend bool operator==(const ScalerSpec& a, const ScalerSpec& b) {
    if (a.ranges_.size() != b.ranges_.size()) return false;
    for (std::size_t i = 0; i < a.ranges_.size(); ++i) {
      const auto &x = a.ranges_[i], &y = b.ranges_[i];
      if (x.name != y.name || x.min != y.min || x.max != y.max) return false;
    }
    return true;
  }

 private:
  std::vector<FeatureRange> ranges_;
};

struct TimeFeatures {
  double hour_sin = 0, hour_cos = 1;
  double dow_sin = 0, dow_cos = 1;
  double month_sin = 0, month_cos = 1;
  double holiday = 0;
};

/// sin/cos of hour-of-day (P = 24, fractional hours), ISO weekday (P = 7,
/// Monday = 0), month (P = 12, January = 0), plus the holiday flag.
TimeFeatures encode_time_features(Timestamp t, const std::vector<MonthDay>& holidays);

/// Adds i.i.d. N(0, sd²) to every value. sd = 0 leaves values untouched.
void add_forecast_noise(std::span<double> values, double sd, std::mt19937_64& rng);

/// Encoder inputs, in model column order.
const std::vector<std::string>& past_feature_names();
/// Decoder inputs, in model column order.
const std::vector<std::string>& future_feature_names();
/// The five zone temperatures.
const std::vector<std::string>& target_names();
/// The five weather variables that receive forecast noise.
const std::vector<std::string>& weather_feature_names();

/// The whole dataset encoded once: scaled past/future/target matrices plus the
/// physical weather (for noise) and physical targets (for evaluation).
class FeatureTable {
 public:
  /// Header-driven: columns are looked up by name. Time encodings are derived
  /// from timestamps; the holiday flag comes from the `hol` column.
  FeatureTable(const SimulatedDataset& dataset, ScalerSpec scaler);

  std::size_t rows() const noexcept { return timestamps_.size(); }
  const ScalerSpec& scaler() const noexcept { return scaler_; }
  const std::vector<Timestamp>& timestamps() const noexcept { return timestamps_; }
  const Tensor& past() const noexcept { return past_; }            // [N × 36]
  const Tensor& future() const noexcept { return future_; }        // [N × 21]
  const Tensor& target() const noexcept { return target_; }        // [N × 5] scaled
  const Tensor& weather_raw() const noexcept { return weather_; }  // [N × 5] physical
  const Tensor& actual() const noexcept { return actual_; }        // [N × 5] °C
  /// Clamp events per feature during encoding (only non-zero entries).
  const std::map<std::string, std::size_t>& clamp_counts() const noexcept { return clamps_; }
  std::size_t total_clamps() const noexcept;

 private:
  ScalerSpec scaler_;
  std::vector<Timestamp> timestamps_;
  Tensor past_, future_, target_, weather_, actual_;
  std::map<std::string, std::size_t> clamps_;
};

struct WindowedSample {
  Tensor past;    // [n_past × 36]
  Tensor future;  // [n_future × 21]
  Tensor target;  // [n_future × 5]
  Timestamp origin{};      // first forecast instant
  std::size_t start_row = 0;  // first past row in the table
};

/// Random-access collection of samples.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual WindowedSample sample(std::size_t index) const = 0;
  bool empty() const { return size() == 0; }
};

struct WindowOptions {
  std::size_t n_past = 672;
  std::size_t n_future = 96;
  std::size_t stride = 1;
  /// Forecast noise sd per weather feature, physical units.
  std::array<double, 5> noise_sd{0.01, 0.01, 0.01, 0.01, 0.01};
  std::uint64_t seed = 0;
};

/// ⌊(rows − n_past − n_future)/stride⌋ + 1, or 0 when rows are too few.
std::size_t window_count(std::size_t rows, std::size_t n_past, std::size_t n_future,
                         std::size_t stride);

/// Lazily materialised sliding windows over rows [begin, end) of a table.
/// Noise on a sample's future weather depends only on (seed, start_row).
class WindowedSet final : public SampleSource {
 public:
  WindowedSet(std::shared_ptr<const FeatureTable> table, std::size_t begin, std::size_t end,
              WindowOptions options);

  std::size_t size() const override { return count_; }
  WindowedSample sample(std::size_t index) const override;

  std::size_t begin_row() const noexcept { return begin_; }
  std::size_t end_row() const noexcept { return end_; }
  std::size_t start_row(std::size_t index) const { return begin_ + index * options_.stride; }
  const WindowOptions& options() const noexcept { return options_; }
  const FeatureTable& table() const noexcept { return *table_; }

 private:
  std::shared_ptr<const FeatureTable> table_;
  std::size_t begin_, end_, count_;
  WindowOptions options_;
};

/// In-memory samples, e.g. a repeated batch for overfitting checks.
class SampleVector final : public SampleSource {
 public:
  SampleVector() = default;
  explicit SampleVector(std::vector<WindowedSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  WindowedSample sample(std::size_t index) const override { return samples_.at(index); }
  void push_back(WindowedSample s) { samples_.push_back(std::move(s)); }

 private:
  std::vector<WindowedSample> samples_;
};

/// Windows over the whole table. Throws ConfigError stating the minimum row
/// count when the table is too short.
WindowedSet build_windows(std::shared_ptr<const FeatureTable> table, const WindowOptions& options);

struct SplitFractions {
  double train = 0.6, validation = 0.2, test = 0.2;
};

struct DatasetSplits {
  WindowedSet train, validation, test;
  /// Row boundaries: [0, b1) train, [b1, b2) validation, [b2, N) test.
  std::size_t train_end = 0, validation_end = 0, rows = 0;
};

/// Contiguous segments in time order, each windowed on its own so that no
/// window straddles a boundary. Throws ConfigError when any split has no
/// window or the fractions do not sum to 1.
DatasetSplits split_chronological(std::shared_ptr<const FeatureTable> table, const WindowOptions& options,
                                  const SplitFractions& fractions = {});

/// CSV `split,index,start_row,origin` listing every sample.
void write_window_manifest(const DatasetSplits& splits, const std::filesystem::path& path);

}  // namespace hvf
