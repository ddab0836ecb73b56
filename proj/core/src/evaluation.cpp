#include "hvf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "csv.hpp"
#include "hvf/errors.hpp"
#include "json.hpp"

namespace hvf {
namespace {

constexpr double kDefaultNominal[] = {0.90, 0.95, 0.99};

std::size_t level_index(const std::vector<double>& levels, double q) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (std::abs(levels[i] - q) < 1e-9) return i;
  }
  return levels.size();
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path,
                                                     const std::vector<std::string>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_line(line) != header) {
    throw ParseError(path.string() + " row 1: unexpected header");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw ParseError(path.string() + " row " + std::to_string(row) + ": wrong field count");
    rows.push_back(std::move(f));
  }
  return rows;
}

double number(const std::string& s, const std::string& where) {
  auto v = detail::parse_double(s);
  if (!v) throw ParseError(where + ": bad number '" + s + "'");
  return *v;
}

}  // namespace

void ForecastSet::validate() const {
  if (horizon == 0 || zones == 0 || levels.empty()) throw DimensionError("forecast set has empty extents");
  for (const auto& inst : instances) {
    if (inst.values.size() != horizon * zones * levels.size() || inst.actual.size() != horizon * zones) {
      throw DimensionError("forecast instance " + std::to_string(inst.instance) + " does not match [" +
                           std::to_string(horizon) + " x " + std::to_string(zones) + " x " +
                           std::to_string(levels.size()) + "]");
    }
  }
}

std::size_t ForecastSet::median_index() const {
  const std::size_t i = level_index(levels, 0.5);
  if (i == levels.size()) throw ConfigError("forecast set has no 0.5 quantile");
  return i;
}

double cvrmse(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw DimensionError("cvrmse: series lengths differ");
  if (actual.empty()) throw DimensionError("cvrmse: empty series");
  double sq = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    sq += e * e;
    mean += actual[i];
  }
  const double n = static_cast<double>(actual.size());
  mean /= n;
  if (mean == 0.0) throw NumericError("cvrmse is undefined: mean of the actual series is zero");
  return 100.0 * std::sqrt(sq / n) / mean;
}

HorizonMetrics per_horizon_cvrmse(const ForecastSet& set) {
  set.validate();
  if (set.instances.empty()) throw ConfigError("per-horizon CVRMSE needs at least one instance");
  const std::size_t H = set.horizon, Z = set.zones, Q = set.levels.size(), med = set.median_index();
  HorizonMetrics m;
  m.horizon = H;
  m.zones = Z;
  m.per_zone.assign(Z, std::vector<double>(H));
  m.zone_mean.assign(H, 0.0);
  m.aggregate.assign(Z, 0.0);

  std::vector<double> a, p, all_a, all_p;
  for (std::size_t z = 0; z < Z; ++z) {
    std::vector<double> za, zp;
    for (std::size_t h = 0; h < H; ++h) {
      a.clear();
      p.clear();
      for (const auto& inst : set.instances) {
        a.push_back(inst.actual[h * Z + z]);
        p.push_back(inst.values[(h * Z + z) * Q + med]);
      }
      m.per_zone[z][h] = cvrmse(a, p);
      m.zone_mean[h] += m.per_zone[z][h] / static_cast<double>(Z);
      za.insert(za.end(), a.begin(), a.end());
      zp.insert(zp.end(), p.begin(), p.end());
    }
    m.aggregate[z] = cvrmse(za, zp);
    all_a.insert(all_a.end(), za.begin(), za.end());
    all_p.insert(all_p.end(), zp.begin(), zp.end());
  }
  m.overall = cvrmse(all_a, all_p);
  return m;
}

CoverageReport interval_coverage(const ForecastSet& set, std::span<const double> nominal) {
  set.validate();
  if (nominal.empty()) nominal = kDefaultNominal;
  const std::size_t Q = set.levels.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  CoverageReport r;
  for (double n : nominal) {
    if (!(n > 0 && n < 1)) throw ConfigError("nominal coverage must lie in (0, 1)");
    const double lo = (1.0 - n) / 2.0, hi = 1.0 - lo;
    const std::size_t il = level_index(set.levels, lo), ih = level_index(set.levels, hi);
    if (il == Q || ih == Q) {
      throw ConfigError("interval " + fmt6(100 * n) + "% needs quantile levels " + fmt6(lo) + " and " + fmt6(hi));
    }
    pairs.emplace_back(il, ih);
    r.entries.push_back(CoverageEntry{n, set.levels[il], set.levels[ih], 0.0, 0.0});
  }
  std::vector<std::size_t> hits(pairs.size(), 0);
  std::size_t crossed = 0;
  std::vector<double> q(Q);
  for (const auto& inst : set.instances) {
    for (std::size_t t = 0; t < set.horizon * set.zones; ++t) {
      std::copy_n(inst.values.data() + t * Q, Q, q.begin());
      if (!std::is_sorted(q.begin(), q.end())) {
        ++crossed;
        std::sort(q.begin(), q.end());
      }
      const double y = inst.actual[t];
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (y >= q[pairs[k].first] && y <= q[pairs[k].second]) ++hits[k];
      }
      ++r.triples;
    }
  }
  const double n = r.triples ? static_cast<double>(r.triples) : 1.0;
  r.crossing_freq = static_cast<double>(crossed) / n;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    r.entries[k].coverage = static_cast<double>(hits[k]) / n;
    r.entries[k].crossing_freq = r.crossing_freq;
  }
  return r;
}

double mean_pinball(const ForecastSet& set) {
  set.validate();
  if (set.instances.empty()) throw ConfigError("pinball score needs at least one instance");
  const std::size_t Q = set.levels.size();
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& inst : set.instances) {
    for (std::size_t t = 0; t < inst.actual.size(); ++t) {
      for (std::size_t k = 0; k < Q; ++k) {
        const double r = inst.actual[t] - inst.values[t * Q + k];
        total += r > 0 ? set.levels[k] * r : (set.levels[k] - 1.0) * r;
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------

void export_horizon_metrics(const HorizonMetrics& m, const std::filesystem::path& path, ExportFormat format) {
  auto out = open_out(path);
  if (format == ExportFormat::Csv) out << "zone,step,cvrmse_pct\n";
  auto emit = [&](const std::string& zone, const std::vector<double>& curve) {
    for (std::size_t h = 0; h < curve.size(); ++h) {
      if (format == ExportFormat::Csv) {
        out << zone << ',' << (h + 1) << ',' << fmt6(curve[h]) << '\n';
      } else {
        out << "{\"zone\":\"" << zone << "\",\"step\":" << (h + 1) << ",\"cvrmse_pct\":" << fmt6(curve[h]) << "}\n";
      }
    }
  };
  for (std::size_t z = 0; z < m.zones; ++z) emit(std::to_string(z + 1), m.per_zone[z]);
  emit("mean", m.zone_mean);
  finish(out, path);
}

std::vector<HorizonRow> import_horizon_metrics(const std::filesystem::path& path, ExportFormat format) {
  std::vector<HorizonRow> rows;
  if (format == ExportFormat::Csv) {
    const auto raw = read_csv_rows(path, {"zone", "step", "cvrmse_pct"});
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::string where = path.string() + " row " + std::to_string(i + 2);
      rows.push_back({raw[i][0], static_cast<std::size_t>(number(raw[i][1], where)), number(raw[i][2], where)});
    }
    return rows;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      rows.push_back({j.at("zone").get<std::string>(), j.at("step").get<std::size_t>(), j.at("cvrmse_pct").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return rows;
}

void export_coverage(const CoverageReport& r, const std::filesystem::path& path, ExportFormat format) {
  auto out = open_out(path);
  if (format == ExportFormat::Csv) out << "level,coverage,crossing_freq\n";
  for (const auto& e : r.entries) {
    if (format == ExportFormat::Csv) {
      out << fmt6(e.nominal) << ',' << fmt6(e.coverage) << ',' << fmt6(e.crossing_freq) << '\n';
    } else {
      out << "{\"level\":" << fmt6(e.nominal) << ",\"coverage\":" << fmt6(e.coverage)
          << ",\"crossing_freq\":" << fmt6(e.crossing_freq) << "}\n";
    }
  }
  finish(out, path);
}

std::vector<CoverageEntry> import_coverage(const std::filesystem::path& path, ExportFormat format) {
  std::vector<CoverageEntry> entries;
  auto make = [](double level, double cov, double cross) {
    CoverageEntry e;
    e.nominal = level;
    e.lower_level = (1.0 - level) / 2.0;
    e.upper_level = 1.0 - e.lower_level;
    e.coverage = cov;
    e.crossing_freq = cross;
    return e;
  };
  if (format == ExportFormat::Csv) {
    const auto raw = read_csv_rows(path, {"level", "coverage", "crossing_freq"});
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::string where = path.string() + " row " + std::to_string(i + 2);
      entries.push_back(make(number(raw[i][0], where), number(raw[i][1], where), number(raw[i][2], where)));
    }
    return entries;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      entries.push_back(make(j.at("level").get<double>(), j.at("coverage").get<double>(),
                             j.at("crossing_freq").get<double>()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return entries;
}

void write_forecast_dump(const ForecastSet& set, const std::filesystem::path& path) {
  set.validate();
  auto out = open_out(path);
  out << "instance,step,zone,q_level,value_c,actual_c\n";
  const std::size_t Z = set.zones, Q = set.levels.size();
  char buf[128];
  for (const auto& inst : set.instances) {
    for (std::size_t h = 0; h < set.horizon; ++h) {
      for (std::size_t z = 0; z < Z; ++z) {
        for (std::size_t k = 0; k < Q; ++k) {
          std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.6g,%.6f,%.6f\n", inst.instance, h + 1, z + 1, set.levels[k],
                        inst.values[(h * Z + z) * Q + k], inst.actual[h * Z + z]);
          out << buf;
        }
      }
    }
  }
  finish(out, path);
}

ForecastSet read_forecast_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open forecast dump '" + path.string() + "'");
  const std::vector<std::string> header = {"instance", "step", "zone", "q_level", "value_c", "actual_c"};
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_line(line) != header) {
    throw ParseError("forecast dump row 1: expected header instance,step,zone,q_level,value_c,actual_c");
  }

  struct Entry {
    std::size_t step, zone;
    double level, value, actual;
    std::size_t row;
  };
  std::map<std::size_t, std::vector<Entry>> by_instance;
  std::vector<double> levels;
  std::size_t horizon = 0, zones = 0, row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    const std::string where = "forecast dump row " + std::to_string(row);
    if (f.size() != header.size()) throw ParseError(where + ": expected 6 fields, got " + std::to_string(f.size()));
    auto as_index = [&](const std::string& s) {
      const double v = number(s, where);
      if (!(v >= 0) || v != std::floor(v)) throw ParseError(where + ": '" + s + "' is not a non-negative integer");
      return static_cast<std::size_t>(v);
    };
    Entry e{as_index(f[1]), as_index(f[2]), number(f[3], where), number(f[4], where), number(f[5], where), row};
    if (e.step == 0 || e.zone == 0) throw ParseError(where + ": step and zone are 1-based");
    if (!(e.level > 0 && e.level < 1)) throw ParseError(where + ": q_level outside (0, 1)");
    if (!std::isfinite(e.value) || !std::isfinite(e.actual)) throw ParseError(where + ": non-finite value");
    horizon = std::max(horizon, e.step);
    zones = std::max(zones, e.zone);
    if (level_index(levels, e.level) == levels.size()) levels.push_back(e.level);
    by_instance[as_index(f[0])].push_back(e);
  }
  if (by_instance.empty()) throw ParseError("forecast dump has no rows");
  std::sort(levels.begin(), levels.end());

  ForecastSet set;
  set.levels = levels;
  set.horizon = horizon;
  set.zones = zones;
  const std::size_t Q = levels.size();
  for (auto& [id, entries] : by_instance) {
    ForecastInstance inst;
    inst.instance = id;
    inst.values = Tensor({horizon, zones, Q}, std::numeric_limits<double>::quiet_NaN());
    inst.actual = Tensor({horizon, zones}, std::numeric_limits<double>::quiet_NaN());
    for (const auto& e : entries) {
      const std::size_t k = level_index(levels, e.level);
      double& slot = inst.values[((e.step - 1) * zones + (e.zone - 1)) * Q + k];
      if (!std::isnan(slot)) throw ParseError("forecast dump row " + std::to_string(e.row) + ": duplicate entry");
      slot = e.value;
      inst.actual[(e.step - 1) * zones + (e.zone - 1)] = e.actual;
    }
    if (!inst.values.all_finite()) {
      throw ParseError("forecast dump: instance " + std::to_string(id) + " is missing step/zone/level entries");
    }
    set.instances.push_back(std::move(inst));
  }
  return set;
}

PlateauObservation observe_plateau(const HorizonMetrics& m) {
  PlateauObservation p;
  if (m.horizon < 24) return p;
  p.available = true;
  const auto& c = m.zone_mean;
  p.at_step_24 = c[23];
  double before = 0, after = 0, max_change = 0;
  for (std::size_t h = 0; h < 24; ++h) before += c[h];
  for (std::size_t h = 24; h < m.horizon; ++h) {
    after += c[h];
    if (p.at_step_24 > 0) max_change = std::max(max_change, std::abs(c[h] - p.at_step_24) / p.at_step_24);
  }
  p.mean_before_24 = before / 24.0;
  p.mean_after_24 = m.horizon > 24 ? after / static_cast<double>(m.horizon - 24) : p.at_step_24;
  p.max_relative_change_after_24 = max_change;
  p.plateau = max_change <= 0.25;
  return p;
}

EvaluationSummary evaluate_forecasts(const ForecastSet& set, std::span<const double> nominal) {
  EvaluationSummary s;
  s.horizon = per_horizon_cvrmse(set);
  s.coverage = interval_coverage(set, nominal);
  s.pinball_c = mean_pinball(set);
  s.plateau = observe_plateau(s.horizon);
  s.instances = set.instances.size();
  return s;
}

void write_evaluation(const EvaluationSummary& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  export_horizon_metrics(s.horizon, dir / "horizon_cvrmse.csv", ExportFormat::Csv);
  export_coverage(s.coverage, dir / "coverage.csv", ExportFormat::Csv);

  nlohmann::ordered_json j;
  j["instances"] = s.instances;
  j["horizon"] = s.horizon.horizon;
  j["zones"] = s.horizon.zones;
  j["cvrmse_overall_pct"] = std::stod(fmt6(s.horizon.overall));
  std::vector<double> agg;
  for (double v : s.horizon.aggregate) agg.push_back(std::stod(fmt6(v)));
  j["cvrmse_per_zone_pct"] = agg;
  j["pinball_c"] = std::stod(fmt6(s.pinball_c));
  j["crossing_freq"] = std::stod(fmt6(s.coverage.crossing_freq));
  nlohmann::ordered_json cov = nlohmann::ordered_json::array();
  for (const auto& e : s.coverage.entries) {
    cov.push_back({{"level", std::stod(fmt6(e.nominal))}, {"coverage", std::stod(fmt6(e.coverage))}});
  }
  j["coverage"] = cov;
  nlohmann::ordered_json plateau;
  plateau["available"] = s.plateau.available;
  if (s.plateau.available) {
    plateau["cvrmse_at_step_24_pct"] = std::stod(fmt6(s.plateau.at_step_24));
    plateau["mean_before_24_pct"] = std::stod(fmt6(s.plateau.mean_before_24));
    plateau["mean_after_24_pct"] = std::stod(fmt6(s.plateau.mean_after_24));
    plateau["max_relative_change_after_24"] = std::stod(fmt6(s.plateau.max_relative_change_after_24));
    plateau["plateau_after_24"] = s.plateau.plateau;
  }
  j["plateau_observation"] = plateau;
  const auto path = dir / "summary.json";
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

}  // namespace hvf
