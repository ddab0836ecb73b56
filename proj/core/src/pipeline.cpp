#include "hvf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "hvf/errors.hpp"
#include "hvf/random.hpp"

namespace hvf {
namespace {

std::vector<std::string> numbered(const std::string& stem, int count) {
  std::vector<std::string> out;
  for (int i = 1; i <= count; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

void append(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

const std::vector<std::string>& time_feature_names() {
  static const std::vector<std::string> names = {"hour_sin", "hour_cos", "dow_sin", "dow_cos",
                                                 "month_sin", "month_cos"};
  return names;
}

}  // namespace

double minmax_scale(double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; }

double minmax_inverse(double s, double lo, double hi) { return (s + 1.0) / 2.0 * (hi - lo) + lo; }

ScalerSpec::ScalerSpec(std::vector<FeatureRange> ranges) : ranges_(std::move(ranges)) {
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    if (!(ranges_[i].max > ranges_[i].min)) {
      throw ConfigError("scaler: feature '" + ranges_[i].name + "' needs max > min");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (ranges_[i].name == ranges_[j].name) throw ConfigError("scaler: duplicate feature '" + ranges_[i].name + "'");
    }
  }
}

ScalerSpec ScalerSpec::defaults() {
  std::vector<FeatureRange> r = {
      {"t_out", -30.0, 40.0}, {"h_out", 0.0, 100.0}, {"w_out", 0.0, 25.0},
      {"l_norm", 0.0, 1300.0}, {"l_hor", 0.0, 1300.0},
  };
  for (const auto& n : time_feature_names()) r.push_back({n, -1.0, 1.0});
  r.push_back({"hol", 0.0, 1.0});
  for (const auto& n : numbered("e_", 5)) r.push_back({n, 0.0, 1000.0});
  for (const auto& n : numbered("occu_", 5)) r.push_back({n, 0.0, 30.0});
  for (const auto& n : numbered("ws_", 4)) r.push_back({n, 0.0, 1.0});
  for (const auto& n : numbered("sp_heat_", 5)) r.push_back({n, 15.0, 30.0});
  for (const auto& n : numbered("t_in_", 5)) r.push_back({n, 10.0, 40.0});
  return ScalerSpec(std::move(r));
}

bool ScalerSpec::contains(std::string_view feature) const {
  return std::any_of(ranges_.begin(), ranges_.end(), [&](const FeatureRange& r) { return r.name == feature; });
}

const FeatureRange& ScalerSpec::range(std::string_view feature) const {
  for (const auto& r : ranges_) {
    if (r.name == feature) return r;
  }
  throw ConfigError("scaler: unknown feature '" + std::string(feature) + "'");
}

double ScalerSpec::scale(std::string_view feature, double v, std::size_t* clamped) const {
  const FeatureRange& r = range(feature);
  if (v < r.min || v > r.max) {
    if (clamped) ++*clamped;
    v = std::clamp(v, r.min, r.max);
  }
  return minmax_scale(v, r.min, r.max);
}

double ScalerSpec::inverse_scale(std::string_view feature, double s) const {
  const FeatureRange& r = range(feature);
  return minmax_inverse(s, r.min, r.max);
}

TimeFeatures encode_time_features(Timestamp t, const std::vector<MonthDay>& holidays) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double hour = fractional_hour(t);
  const double dow = iso_weekday_index(t);
  const double month = month_index(t);
  TimeFeatures f;
  f.hour_sin = std::sin(two_pi * hour / 24.0);
  f.hour_cos = std::cos(two_pi * hour / 24.0);
  f.dow_sin = std::sin(two_pi * dow / 7.0);
  f.dow_cos = std::cos(two_pi * dow / 7.0);
  f.month_sin = std::sin(two_pi * month / 12.0);
  f.month_cos = std::cos(two_pi * month / 12.0);
  f.holiday = is_holiday(t, holidays) ? 1.0 : 0.0;
  return f;
}

void add_forecast_noise(std::span<double> values, double sd, std::mt19937_64& rng) {
  if (sd < 0) throw ConfigError("forecast noise sd must be non-negative");
  if (sd == 0) return;
  std::normal_distribution<double> noise(0.0, sd);
  for (double& v : values) v += noise(rng);
}

const std::vector<std::string>& weather_feature_names() {
  static const std::vector<std::string> names = {"t_out", "h_out", "w_out", "l_norm", "l_hor"};
  return names;
}

const std::vector<std::string>& past_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = weather_feature_names();
    append(n, time_feature_names());
    n.push_back("hol");
    append(n, numbered("e_", 5));
    append(n, numbered("occu_", 5));
    append(n, numbered("ws_", 4));
    append(n, numbered("sp_heat_", 5));
    append(n, numbered("t_in_", 5));
    return n;
  }();
  return names;
}

const std::vector<std::string>& future_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = weather_feature_names();
    append(n, time_feature_names());
    n.push_back("hol");
    append(n, numbered("ws_", 4));
    append(n, numbered("sp_heat_", 5));
    return n;
  }();
  return names;
}

const std::vector<std::string>& target_names() {
  static const std::vector<std::string> names = numbered("t_in_", 5);
  return names;
}

// ---------------------------------------------------------------------------

FeatureTable::FeatureTable(const SimulatedDataset& dataset, ScalerSpec scaler)
    : scaler_(std::move(scaler)), timestamps_(dataset.timestamps()) {
  const std::size_t n = dataset.rows();
  if (n == 0) throw ConfigError("dataset has no rows");
  const auto& past_names = past_feature_names();
  const auto& future_names = future_feature_names();

  // Every non-derived feature must exist before any work.
  std::vector<std::string> missing;
  for (const auto& name : past_names) {
    const bool derived = std::find(time_feature_names().begin(), time_feature_names().end(), name) !=
                         time_feature_names().end();
    if (!derived && !dataset.has_column(name)) missing.push_back(name);
    if (!scaler_.contains(name)) throw ConfigError("scaler has no interval for feature '" + name + "'");
  }
  if (!missing.empty()) {
    std::string msg = "dataset is missing feature column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }

  // Physical values for every past feature (time encodings computed here).
  std::map<std::string, std::vector<double>> physical;
  for (const auto& name : past_names) {
    if (dataset.has_column(name)) physical[name] = dataset.column(name);
  }
  for (const auto& name : time_feature_names()) physical[name].resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const TimeFeatures tf = encode_time_features(timestamps_[r], {});
    physical["hour_sin"][r] = tf.hour_sin;
    physical["hour_cos"][r] = tf.hour_cos;
    physical["dow_sin"][r] = tf.dow_sin;
    physical["dow_cos"][r] = tf.dow_cos;
    physical["month_sin"][r] = tf.month_sin;
    physical["month_cos"][r] = tf.month_cos;
  }

  std::map<std::string, std::vector<double>> scaled;
  for (const auto& [name, values] : physical) {
    std::size_t clamped = 0;
    auto& out = scaled[name];
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r) out[r] = scaler_.scale(name, values[r], &clamped);
    if (clamped) clamps_[name] = clamped;
  }

  auto fill = [n, &scaled](Tensor& dst, const std::vector<std::string>& names) {
    dst = Tensor({n, names.size()});
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto& col = scaled.at(names[c]);
      for (std::size_t r = 0; r < n; ++r) dst.at(r, c) = col[r];
    }
  };
  fill(past_, past_names);
  fill(future_, future_names);
  fill(target_, target_names());

  const auto& wx = weather_feature_names();
  weather_ = Tensor({n, wx.size()});
  for (std::size_t c = 0; c < wx.size(); ++c) {
    for (std::size_t r = 0; r < n; ++r) weather_.at(r, c) = physical.at(wx[c])[r];
  }
  actual_ = Tensor({n, target_names().size()});
  for (std::size_t c = 0; c < target_names().size(); ++c) {
    for (std::size_t r = 0; r < n; ++r) actual_.at(r, c) = physical.at(target_names()[c])[r];
  }
}

std::size_t FeatureTable::total_clamps() const noexcept {
  std::size_t total = 0;
  for (const auto& [name, count] : clamps_) total += count;
  return total;
}

// ---------------------------------------------------------------------------

std::size_t window_count(std::size_t rows, std::size_t n_past, std::size_t n_future, std::size_t stride) {
  if (stride == 0) throw ConfigError("window stride must be at least 1");
  if (rows < n_past + n_future) return 0;
  return (rows - n_past - n_future) / stride + 1;
}

WindowedSet::WindowedSet(std::shared_ptr<const FeatureTable> table, std::size_t begin, std::size_t end,
                         WindowOptions options)
    : table_(std::move(table)), begin_(begin), end_(end), options_(options) {
  if (!table_) throw ConfigError("windowed set needs a feature table");
  if (begin_ > end_ || end_ > table_->rows()) throw DimensionError("window row range outside the table");
  if (options_.n_past == 0 || options_.n_future == 0) throw ConfigError("n_past and n_future must be positive");
  for (double sd : options_.noise_sd) {
    if (!(sd >= 0)) throw ConfigError("forecast noise sd must be non-negative");
  }
  count_ = window_count(end_ - begin_, options_.n_past, options_.n_future, options_.stride);
}

WindowedSample WindowedSet::sample(std::size_t index) const {
  if (index >= count_) throw DimensionError("sample index " + std::to_string(index) + " out of range");
  const FeatureTable& t = *table_;
  const std::size_t s = start_row(index);
  const std::size_t origin = s + options_.n_past;
  const std::size_t np = options_.n_past, nf = options_.n_future;
  const std::size_t fp = t.past().cols(), ff = t.future().cols(), z = t.target().cols();

  WindowedSample out;
  out.start_row = s;
  out.origin = t.timestamps()[origin];
  out.past = Tensor({np, fp});
  std::copy_n(t.past().data() + s * fp, np * fp, out.past.data());
  out.future = Tensor({nf, ff});
  std::copy_n(t.future().data() + origin * ff, nf * ff, out.future.data());
  out.target = Tensor({nf, z});
  std::copy_n(t.target().data() + origin * z, nf * z, out.target.data());

  // Forecast noise on the five weather columns (first in the future layout).
  const bool noisy = std::any_of(options_.noise_sd.begin(), options_.noise_sd.end(), [](double v) { return v > 0; });
  if (noisy) {
    std::mt19937_64 rng = derive_rng({options_.seed, s});
    const auto& wx = weather_feature_names();
    std::vector<double> column(nf);
    for (std::size_t c = 0; c < wx.size(); ++c) {
      for (std::size_t r = 0; r < nf; ++r) column[r] = t.weather_raw().at(origin + r, c);
      add_forecast_noise(column, options_.noise_sd[c], rng);
      for (std::size_t r = 0; r < nf; ++r) out.future.at(r, c) = t.scaler().scale(wx[c], column[r]);
    }
  }
  return out;
}

WindowedSet build_windows(std::shared_ptr<const FeatureTable> table, const WindowOptions& options) {
  if (!table) throw ConfigError("build_windows needs a feature table");
  const std::size_t need = options.n_past + options.n_future;
  if (table->rows() < need) {
    throw ConfigError("dataset has " + std::to_string(table->rows()) + " rows; windowing needs at least " +
                      std::to_string(need));
  }
  const std::size_t rows = table->rows();
  return WindowedSet(std::move(table), 0, rows, options);
}

DatasetSplits split_chronological(std::shared_ptr<const FeatureTable> table, const WindowOptions& options,
                                  const SplitFractions& f) {
  if (!table) throw ConfigError("split needs a feature table");
  if (f.train <= 0 || f.validation <= 0 || f.test <= 0) throw ConfigError("split fractions must be positive");
  if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const std::size_t n = table->rows();
  auto boundary = [n](double frac) {
    return std::min(n, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9)));
  };
  const std::size_t b1 = boundary(f.train);
  const std::size_t b2 = boundary(f.train + f.validation);
  DatasetSplits s{WindowedSet(table, 0, b1, options), WindowedSet(table, b1, b2, options),
                  WindowedSet(table, b2, n, options), b1, b2, n};
  const std::size_t need = options.n_past + options.n_future;
  auto check = [need](const WindowedSet& w, const char* name) {
    if (w.empty()) {
      throw ConfigError(std::string(name) + " split has " + std::to_string(w.end_row() - w.begin_row()) +
                        " rows; each split needs at least " + std::to_string(need));
    }
  };
  check(s.train, "train");
  check(s.validation, "validation");
  check(s.test, "test");
  return s;
}

void write_window_manifest(const DatasetSplits& splits, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "split,index,start_row,origin\n";
  auto emit = [&out](const WindowedSet& w, const char* name) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::size_t s = w.start_row(i);
      out << name << ',' << i << ',' << s << ',' << format_timestamp(w.table().timestamps()[s + w.options().n_past])
          << '\n';
    }
  };
  emit(splits.train, "train");
  emit(splits.validation, "validation");
  emit(splits.test, "test");
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace hvf
