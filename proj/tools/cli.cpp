#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "hvf/checkpoint.hpp"
#include "hvf/dataset.hpp"
#include "hvf/errors.hpp"
#include "hvf/random.hpp"

namespace hvf::cli {
namespace {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

// ---------------------------------------------------------------------------
// typed access with field-level errors

const ojson& field(const ojson& tree, const std::string& section, const std::string& key) {
  const ojson& s = section.empty() ? tree : tree.at(section);
  if (!s.contains(key)) throw ConfigError("missing config field '" + (section.empty() ? key : section + "." + key) + "'");
  return s.at(key);
}

std::string path_of(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

std::uint64_t get_uint(const ojson& tree, const std::string& section, const std::string& key) {
  const ojson& v = field(tree, section, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(path_of(section, key) + " must be a non-negative integer");
}

double get_double(const ojson& tree, const std::string& section, const std::string& key) {
  const ojson& v = field(tree, section, key);
  if (!v.is_number()) throw ConfigError(path_of(section, key) + " must be a number");
  return v.get<double>();
}

std::string get_string(const ojson& tree, const std::string& section, const std::string& key) {
  const ojson& v = field(tree, section, key);
  if (!v.is_string()) throw ConfigError(path_of(section, key) + " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_doubles(const ojson& tree, const std::string& section, const std::string& key) {
  const ojson& v = field(tree, section, key);
  if (!v.is_array()) throw ConfigError(path_of(section, key) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path_of(section, key) + " must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix) {
  std::filesystem::path out = p;
  out += suffix;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

ojson default_config(const std::string& profile) {
  if (profile != "full" && profile != "tiny") {
    throw ConfigError("--profile must be 'tiny' or 'full', got '" + profile + "'");
  }
  const ModelConfig m = profile == "tiny" ? ModelConfig::tiny() : ModelConfig{};
  const FitOptions f;
  const SimulatorSection s;
  ojson holidays = ojson::array();
  for (const auto& h : s.holidays) holidays.push_back(format_month_day(h));

  ojson c;
  c["seed"] = 42;
  c["simulator"] = {{"days", s.days},
                    {"start_date", s.start_date},
                    {"p_open", s.p_open},
                    {"pulse_steps", s.pulse_steps},
                    {"inner_step_s", s.inner_step_s},
                    {"holidays", holidays},
                    {"weather_csv", s.weather_csv},
                    {"weather_mean_c", s.weather.annual_mean_c},
                    {"weather_seasonal_amplitude_c", s.weather.seasonal_amplitude_c},
                    {"weather_diurnal_amplitude_c", s.weather.diurnal_amplitude_c},
                    {"weather_noise_sd_c", s.weather.noise_sd_c},
                    {"weather_mean_wind_mps", s.weather.mean_wind},
                    {"heating_capacity_w", s.heating_capacity_w},
                    {"cooling_capacity_w", s.cooling_capacity_w},
                    {"capacitance_multiplier", s.capacitance_multiplier},
                    {"window_open_area_m2", s.window_open_area}};
  c["pipeline"] = {{"stride", 1},
                   {"noise_sd", 0.01},
                   {"noise_sd_per_feature", nullptr},
                   {"train_fraction", 0.6},
                   {"validation_fraction", 0.2},
                   {"test_fraction", 0.2}};
  c["model"] = {{"n_past", m.n_past},   {"n_future", m.n_future}, {"units", m.units},
                {"heads", m.heads},     {"d_model", m.d_model},   {"dropout", m.dropout},
                {"quantiles", m.quantiles}};
  c["training"] = {{"batch_size", profile == "tiny" ? 32 : f.batch_size},
                   {"learning_rate", profile == "tiny" ? 3e-3 : f.adam.learning_rate},
                   {"beta1", f.adam.beta1},
                   {"beta2", f.adam.beta2},
                   {"epsilon", f.adam.epsilon},
                   {"max_epochs", f.max_epochs},
                   {"patience", f.patience},
                   {"clip_norm", f.clip_norm}};
  c["evaluation"] = {{"levels", {0.90, 0.95, 0.99}}, {"selector", "all-test"}};
  const PathsSection p;
  c["paths"] = {{"dataset", p.dataset},
                {"checkpoint", p.checkpoint},
                {"forecast", p.forecast},
                {"metrics", p.metrics},
                {"log", p.log}};
  return c;
}

void merge_config(ojson& base, const json& overlay, const std::string& where) {
  if (!overlay.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string name = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + name + "'");
    ojson& slot = base[key];
    if (slot.is_object()) {
      merge_config(slot, value, name);
    } else if (slot.is_null() || value.is_null() || same_kind(slot, value)) {
      slot = value;
    } else {
      throw ConfigError("config key '" + name + "' has type " + std::string(value.type_name()) + ", expected " +
                        std::string(slot.type_name()));
    }
  }
}

RunConfig to_run_config(const ojson& tree) {
  RunConfig c;
  c.effective = tree;
  c.seed = get_uint(tree, "", "seed");

  // simulator
  auto& s = c.simulator;
  s.days = get_uint(tree, "simulator", "days");
  if (s.days == 0) throw ConfigError("simulator.days must be at least 1");
  s.start_date = get_string(tree, "simulator", "start_date");
  if (!parse_date(s.start_date)) throw ConfigError("simulator.start_date must be YYYY-MM-DD");
  s.p_open = get_double(tree, "simulator", "p_open");
  if (!(s.p_open >= 0 && s.p_open <= 1)) throw ConfigError("simulator.p_open must lie in [0, 1]");
  s.pulse_steps = get_uint(tree, "simulator", "pulse_steps");
  if (s.pulse_steps == 0) throw ConfigError("simulator.pulse_steps must be at least 1");
  s.inner_step_s = get_double(tree, "simulator", "inner_step_s");
  {
    const double ratio = kStepSeconds / s.inner_step_s;
    if (!(s.inner_step_s > 0) || std::abs(ratio - std::round(ratio)) > 1e-9) {
      throw ConfigError("simulator.inner_step_s must divide 900");
    }
  }
  s.holidays.clear();
  const ojson& hol = field(tree, "simulator", "holidays");
  if (!hol.is_array()) throw ConfigError("simulator.holidays must be an array of \"MM-DD\" strings");
  for (const auto& h : hol) {
    auto md = h.is_string() ? parse_month_day(h.get<std::string>()) : std::nullopt;
    if (!md) throw ConfigError("simulator.holidays entries must be \"MM-DD\" strings");
    s.holidays.push_back(*md);
  }
  s.weather_csv = get_string(tree, "simulator", "weather_csv");
  s.weather.annual_mean_c = get_double(tree, "simulator", "weather_mean_c");
  s.weather.seasonal_amplitude_c = get_double(tree, "simulator", "weather_seasonal_amplitude_c");
  s.weather.diurnal_amplitude_c = get_double(tree, "simulator", "weather_diurnal_amplitude_c");
  s.weather.noise_sd_c = get_double(tree, "simulator", "weather_noise_sd_c");
  s.weather.mean_wind = get_double(tree, "simulator", "weather_mean_wind_mps");
  if (s.weather.noise_sd_c < 0) throw ConfigError("simulator.weather_noise_sd_c must be non-negative");
  if (s.weather.mean_wind < 0) throw ConfigError("simulator.weather_mean_wind_mps must be non-negative");
  s.heating_capacity_w = get_double(tree, "simulator", "heating_capacity_w");
  s.cooling_capacity_w = get_double(tree, "simulator", "cooling_capacity_w");
  s.capacitance_multiplier = get_double(tree, "simulator", "capacitance_multiplier");
  s.window_open_area = get_double(tree, "simulator", "window_open_area_m2");
  if (!(s.heating_capacity_w > 0)) throw ConfigError("simulator.heating_capacity_w must be positive");
  if (!(s.cooling_capacity_w > 0)) throw ConfigError("simulator.cooling_capacity_w must be positive");
  if (!(s.capacitance_multiplier > 0)) throw ConfigError("simulator.capacitance_multiplier must be positive");
  if (!(s.window_open_area >= 0)) throw ConfigError("simulator.window_open_area_m2 must be non-negative");

  // pipeline
  auto& p = c.pipeline;
  p.stride = get_uint(tree, "pipeline", "stride");
  if (p.stride == 0) throw ConfigError("pipeline.stride must be at least 1");
  const double sd = get_double(tree, "pipeline", "noise_sd");
  if (!(sd >= 0)) throw ConfigError("pipeline.noise_sd must be non-negative");
  p.noise_sd.fill(sd);
  if (!field(tree, "pipeline", "noise_sd_per_feature").is_null()) {
    const auto per = get_doubles(tree, "pipeline", "noise_sd_per_feature");
    if (per.size() != 5) {
      throw ConfigError("pipeline.noise_sd_per_feature needs 5 values (t_out, h_out, w_out, l_norm, l_hor)");
    }
    for (std::size_t i = 0; i < 5; ++i) {
      if (!(per[i] >= 0)) throw ConfigError("pipeline.noise_sd_per_feature must be non-negative");
      p.noise_sd[i] = per[i];
    }
  }
  p.fractions.train = get_double(tree, "pipeline", "train_fraction");
  p.fractions.validation = get_double(tree, "pipeline", "validation_fraction");
  p.fractions.test = get_double(tree, "pipeline", "test_fraction");
  if (p.fractions.train <= 0 || p.fractions.validation <= 0 || p.fractions.test <= 0 ||
      std::abs(p.fractions.train + p.fractions.validation + p.fractions.test - 1.0) > 1e-9) {
    throw ConfigError("pipeline fractions must be positive and sum to 1");
  }

  // model
  auto& m = c.model;
  m.n_past = get_uint(tree, "model", "n_past");
  m.n_future = get_uint(tree, "model", "n_future");
  m.units = get_uint(tree, "model", "units");
  m.heads = get_uint(tree, "model", "heads");
  m.d_model = get_uint(tree, "model", "d_model");
  m.dropout = get_double(tree, "model", "dropout");
  m.quantiles = get_doubles(tree, "model", "quantiles");
  m.past_features = past_feature_names().size();
  m.future_features = future_feature_names().size();
  m.zones = target_names().size();
  m.seed = c.seed;
  m.validate();

  // training
  auto& t = c.training;
  t.batch_size = get_uint(tree, "training", "batch_size");
  t.adam.learning_rate = get_double(tree, "training", "learning_rate");
  t.adam.beta1 = get_double(tree, "training", "beta1");
  t.adam.beta2 = get_double(tree, "training", "beta2");
  t.adam.epsilon = get_double(tree, "training", "epsilon");
  t.max_epochs = get_uint(tree, "training", "max_epochs");
  t.patience = get_uint(tree, "training", "patience");
  t.clip_norm = get_double(tree, "training", "clip_norm");
  t.seed = c.seed;
  t.validate();

  // evaluation
  auto& e = c.evaluation;
  e.levels = get_doubles(tree, "evaluation", "levels");
  for (double n : e.levels) {
    if (!(n > 0 && n < 1)) throw ConfigError("evaluation.levels must lie in (0, 1)");
    const double lo = (1 - n) / 2, hi = 1 - lo;
    auto has = [&m](double q) {
      return std::any_of(m.quantiles.begin(), m.quantiles.end(), [q](double x) { return std::abs(x - q) < 1e-9; });
    };
    if (!has(lo) || !has(hi)) {
      throw ConfigError("evaluation.levels: interval " + std::to_string(n) + " needs quantiles " +
                        std::to_string(lo) + " and " + std::to_string(hi) + " in model.quantiles");
    }
  }
  e.selector = get_string(tree, "evaluation", "selector");
  if (e.selector != "all-test") select_instances(e.selector, std::size_t(-1));  // syntax check only

  // paths
  c.paths.dataset = get_string(tree, "paths", "dataset");
  c.paths.checkpoint = get_string(tree, "paths", "checkpoint");
  c.paths.forecast = get_string(tree, "paths", "forecast");
  c.paths.metrics = get_string(tree, "paths", "metrics");
  c.paths.log = get_string(tree, "paths", "log");
  return c;
}

std::string config_hash(const ojson& tree) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(tree.dump())));
  return buf;
}

std::vector<std::size_t> select_instances(const std::string& selector, std::size_t test_count) {
  std::vector<std::size_t> out;
  if (selector == "all-test") {
    for (std::size_t i = 0; i < test_count; ++i) out.push_back(i);
    return out;
  }
  const std::string prefix = "test:";
  if (selector.rfind(prefix, 0) != 0) {
    throw ConfigError("selector must be 'all-test', 'test:<i>' or 'test:<a>-<b>', got '" + selector + "'");
  }
  const std::string rest = selector.substr(prefix.size());
  auto parse = [&selector](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("selector '" + selector + "' has a bad index");
    }
    return static_cast<std::size_t>(std::stoull(s));
  };
  const auto dash = rest.find('-');
  const std::size_t a = parse(rest.substr(0, dash));
  const std::size_t b = dash == std::string::npos ? a : parse(rest.substr(dash + 1));
  if (b < a) throw ConfigError("selector '" + selector + "' has an empty range");
  if (b >= test_count) {
    throw ConfigError("selector '" + selector + "' exceeds the " + std::to_string(test_count) + " test instances");
  }
  for (std::size_t i = a; i <= b; ++i) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// commands

GenerateResult cmd_generate(const RunConfig& cfg, const std::filesystem::path& out) {
  const auto& s = cfg.simulator;
  sim::BuildingSpec building = sim::default_building();
  building.heating_capacity_w = s.heating_capacity_w;
  building.cooling_capacity_w = s.cooling_capacity_w;
  building.capacitance_multiplier = s.capacitance_multiplier;
  building.window_open_area = s.window_open_area;
  building.validate();

  const Calendar calendar(*parse_date(s.start_date), s.days, s.holidays);
  std::vector<sim::WeatherRecord> weather;
  if (s.weather_csv.empty()) {
    auto rng = derive_rng({cfg.seed, 1});
    weather = sim::synth_weather(rng, calendar, s.weather);
  } else {
    weather = sim::load_weather_csv(s.weather_csv);
    if (weather.size() != calendar.steps() || weather.front().timestamp != calendar.at(0)) {
      throw ConfigError("weather file must start at simulator.start_date and cover " +
                        std::to_string(calendar.steps()) + " steps, found " + std::to_string(weather.size()));
    }
  }
  auto rng_sched = derive_rng({cfg.seed, 2});
  auto rng_sp = derive_rng({cfg.seed, 3});
  auto rng_win = derive_rng({cfg.seed, 4});
  const auto schedules = sim::generate_schedules(rng_sched, calendar, building);
  const auto setpoints = sim::generate_mprs_setpoints(rng_sp, calendar);
  const auto windows = sim::generate_prbs_windows(rng_win, calendar, s.p_open, s.pulse_steps);
  sim::SimulationOptions options;
  options.inner_step_s = s.inner_step_s;
  const SimulatedDataset ds = sim::simulate(building, calendar, weather, schedules, setpoints, windows, options);

  ensure_parent(out);
  write_dataset_csv(ds, out);
  GenerateResult r;
  r.rows = ds.rows();
  r.dataset = out;
  r.manifest = with_suffix(out, ".manifest.json");
  ojson manifest;
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = config_hash(cfg.effective);
  manifest["rows"] = ds.rows();
  manifest["columns"] = ds.columns();
  manifest["start"] = format_timestamp(calendar.start());
  manifest["days"] = s.days;
  ojson events = ojson::array();
  for (const auto& e : windows.events) events.push_back(e.size());
  manifest["window_open_events"] = events;
  std::ofstream mf(r.manifest, std::ios::binary | std::ios::trunc);
  mf << manifest.dump(2) << '\n';
  if (!mf) throw std::runtime_error("write failed for '" + r.manifest.string() + "'");
  return r;
}

TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out,
                      std::ostream& progress) {
  const SimulatedDataset ds = read_dataset_csv(dataset);
  const ScalerSpec scaler = ScalerSpec::defaults();
  auto table = std::make_shared<const FeatureTable>(ds, scaler);
  WindowOptions wo;
  wo.n_past = cfg.model.n_past;
  wo.n_future = cfg.model.n_future;
  wo.stride = cfg.pipeline.stride;
  wo.noise_sd = cfg.pipeline.noise_sd;
  wo.seed = cfg.seed;
  const DatasetSplits splits = split_chronological(table, wo, cfg.pipeline.fractions);

  Model model(cfg.model);
  TrainResult result;
  result.checkpoint = out;
  result.log = cfg.paths.log.empty() ? with_suffix(out, ".log.jsonl") : std::filesystem::path(cfg.paths.log);
  ensure_parent(out);
  ensure_parent(result.log);
  std::ofstream log(result.log, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot open '" + result.log.string() + "' for writing");

  const std::string hash = config_hash(cfg.effective);
  auto metadata = [&](std::size_t best_epoch, double best_val) {
    return std::map<std::string, std::string>{{"best_epoch", std::to_string(best_epoch)},
                                              {"best_val_loss", fmt17(best_val)},
                                              {"config_hash", hash},
                                              {"dataset_rows", std::to_string(ds.rows())}};
  };
  progress << "train: " << splits.train.size() << " / validation: " << splits.validation.size()
           << " / test: " << splits.test.size() << " windows, " << model.parameter_count() << " parameters\n";
  if (table->total_clamps() > 0) progress << "warning: " << table->total_clamps() << " input values clamped\n";

  result.report = fit(model, splits.train, splits.validation, cfg.training,
                      [&](const EpochRecord& r, const Model& current, bool improved) {
                        log << epoch_log_line(r) << '\n';
                        log.flush();
                        progress << epoch_log_line(r) << '\n';
                        if (improved) {
                          save_checkpoint(make_checkpoint(current, scaler, wo, cfg.pipeline.fractions, cfg.seed,
                                                          metadata(r.epoch, r.val_loss)),
                                          out);
                        }
                      });
  auto meta = metadata(result.report.best_epoch, result.report.best_val_loss);
  meta["stop_reason"] = result.report.stop_reason;
  meta["epochs_run"] = std::to_string(result.report.epochs.size() - 1);
  save_checkpoint(make_checkpoint(model, scaler, wo, cfg.pipeline.fractions, cfg.seed, meta), out);
  return result;
}

PredictResult cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& dataset, const std::string& selector,
                          const std::filesystem::path& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Model model = restore_model(ckpt);
  const SimulatedDataset ds = read_dataset_csv(dataset);
  auto table = std::make_shared<const FeatureTable>(ds, ckpt.scaler);
  // origin spacing at prediction time is independent of the training stride
  WindowOptions window = ckpt.window;
  window.stride = cfg.pipeline.stride;
  const DatasetSplits splits = split_chronological(table, window, ckpt.fractions);
  const auto chosen = select_instances(selector, splits.test.size());

  const ModelConfig& mc = model.config();
  ForecastSet set;
  set.levels = mc.quantiles;
  set.horizon = mc.n_future;
  set.zones = mc.zones;
  for (std::size_t i : chosen) {
    const WindowedSample s = splits.test.sample(i);
    ForecastInstance inst;
    inst.instance = i;
    inst.values = forecast_sample(model, ckpt.scaler, s).values;
    inst.actual = Tensor({mc.n_future, mc.zones});
    const std::size_t origin = s.start_row + mc.n_past;
    for (std::size_t h = 0; h < mc.n_future; ++h) {
      for (std::size_t z = 0; z < mc.zones; ++z) inst.actual.at(h, z) = table->actual().at(origin + h, z);
    }
    set.instances.push_back(std::move(inst));
  }
  ensure_parent(out);
  write_forecast_dump(set, out);
  return PredictResult{set.instances.size(), out};
}

EvaluationSummary cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& forecast,
                               const std::filesystem::path& out_dir) {
  const ForecastSet set = read_forecast_dump(forecast);
  EvaluationSummary s = evaluate_forecasts(set, cfg.evaluation.levels);
  write_evaluation(s, out_dir);
  return s;
}

// ---------------------------------------------------------------------------
// command line

namespace {

void flatten(const ojson& tree, const std::string& prefix, std::vector<std::pair<std::string, const ojson*>>& out) {
  for (const auto& [key, value] : tree.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten(value, name, out);
    } else {
      out.emplace_back(name, &value);
    }
  }
}

json parse_override(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

void set_path(json& overlay, const std::string& dotted, json value) {
  json* node = &overlay;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

struct Common {
  std::string config_path;
  std::string profile = "full";
  std::string out;
  std::map<std::string, std::string> overrides;
  std::vector<std::pair<std::string, CLI::Option*>> override_opts;
};

void add_common(CLI::App* cmd, Common& c, const std::vector<std::pair<std::string, const ojson*>>& keys) {
  cmd->add_option("--config", c.config_path, "JSON config file (sections: seed, simulator, pipeline, model, "
                                             "training, evaluation, paths)");
  cmd->add_option("--profile", c.profile, "Parameter profile: tiny or full")->capture_default_str();
  cmd->add_option("--out", c.out, "Output path");
  for (const auto& [name, value] : keys) {
    CLI::Option* opt = cmd->add_option("--" + name, c.overrides[name], "Override " + name + " (default " +
                                                                           value->dump() + ")");
    c.override_opts.emplace_back(name, opt);
  }
}

RunConfig resolve(const Common& c) {
  ojson tree = default_config(c.profile);
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("cannot read config file '" + c.config_path + "'");
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + c.config_path + "' is not valid JSON: " + e.what());
    }
    merge_config(tree, file, "");
  }
  json overlay = json::object();
  for (const auto& [name, opt] : c.override_opts) {
    if (opt->count() > 0) set_path(overlay, name, parse_override(c.overrides.at(name)));
  }
  merge_config(tree, overlay, "");
  return to_run_config(tree);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Indoor temperature forecasting under hybrid ventilation: simulate, train, predict, evaluate"};
  app.require_subcommand(1);
  std::vector<std::pair<std::string, const ojson*>> keys;
  const ojson defaults = default_config("full");
  flatten(defaults, "", keys);

  Common gen_c, train_c, pred_c, eval_c;
  std::string train_dataset, pred_checkpoint, pred_dataset, pred_select, eval_forecast;

  CLI::App* gen = app.add_subcommand("generate", "Simulate the building and write the dataset CSV");
  add_common(gen, gen_c, keys);
  CLI::App* train = app.add_subcommand("train", "Fit the forecaster and write the best checkpoint");
  add_common(train, train_c, keys);
  train->add_option("--dataset", train_dataset, "Dataset CSV (default paths.dataset)");
  CLI::App* pred = app.add_subcommand("predict", "Write the forecast dump for selected test instances");
  add_common(pred, pred_c, keys);
  pred->add_option("--checkpoint", pred_checkpoint, "Checkpoint file (default paths.checkpoint)");
  pred->add_option("--dataset", pred_dataset, "Dataset CSV (default paths.dataset)");
  pred->add_option("--select", pred_select, "all-test | test:<i> | test:<a>-<b> (default evaluation.selector)");
  CLI::App* eval = app.add_subcommand("evaluate", "Compute horizon CVRMSE, interval coverage and a summary");
  add_common(eval, eval_c, keys);
  eval->add_option("--forecast", eval_forecast, "Forecast dump CSV (default paths.forecast)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      const RunConfig cfg = resolve(gen_c);
      const auto r = cmd_generate(cfg, gen_c.out.empty() ? cfg.paths.dataset : gen_c.out);
      out << "wrote " << r.rows << " rows to " << r.dataset.string() << '\n';
    } else if (train->parsed()) {
      const RunConfig cfg = resolve(train_c);
      const auto r = cmd_train(cfg, train_dataset.empty() ? cfg.paths.dataset : train_dataset,
                               train_c.out.empty() ? cfg.paths.checkpoint : train_c.out, out);
      out << "best epoch " << r.report.best_epoch << ", validation loss " << fmt17(r.report.best_val_loss) << " ("
          << r.report.stop_reason << "); checkpoint " << r.checkpoint.string() << '\n';
    } else if (pred->parsed()) {
      const RunConfig cfg = resolve(pred_c);
      const auto r = cmd_predict(cfg, pred_checkpoint.empty() ? cfg.paths.checkpoint : pred_checkpoint,
                                 pred_dataset.empty() ? cfg.paths.dataset : pred_dataset,
                                 pred_select.empty() ? cfg.evaluation.selector : pred_select,
                                 pred_c.out.empty() ? cfg.paths.forecast : pred_c.out);
      out << "wrote " << r.instances << " instance(s) to " << r.dump.string() << '\n';
    } else if (eval->parsed()) {
      const RunConfig cfg = resolve(eval_c);
      const std::filesystem::path dir = eval_c.out.empty() ? cfg.paths.metrics : eval_c.out;
      const auto s = cmd_evaluate(cfg, eval_forecast.empty() ? cfg.paths.forecast : eval_forecast, dir);
      out << "CVRMSE " << s.horizon.overall << "% over " << s.instances << " instance(s); metrics in " << dir.string()
          << '\n';
    }
  } catch (const ConfigError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DimensionError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("hvf");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace hvf::cli
