#pragma once

// Command implementations behind the `hvf` executable, kept in a library so
// tests can drive them in-process.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hvf/building_sim.hpp"
#include "hvf/evaluation.hpp"
#include "hvf/model.hpp"
#include "hvf/pipeline.hpp"
#include "hvf/training.hpp"
#include "json.hpp"

namespace hvf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

struct SimulatorSection {
  std::size_t days = 365;
  std::string start_date = "2021-01-01";
  double p_open = 0.05;
  std::size_t pulse_steps = 2;
  double inner_step_s = 60.0;
  std::vector<MonthDay> holidays = Calendar::default_holidays();
  std::string weather_csv;  // empty → synthetic weather
  sim::WeatherOptions weather;
  double heating_capacity_w = 60000.0;
  double cooling_capacity_w = 30000.0;
  double capacitance_multiplier = 5.0;
  double window_open_area = 1.0;
};

struct PipelineSection {
  std::size_t stride = 1;
  std::array<double, 5> noise_sd{0.01, 0.01, 0.01, 0.01, 0.01};
  SplitFractions fractions;
};

struct EvaluationSection {
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::string selector = "all-test";
};

struct PathsSection {
  std::string dataset = "out/dataset.csv";
  std::string checkpoint = "out/model.hvf";
  std::string forecast = "out/forecast.csv";
  std::string metrics = "out/metrics";
  std::string log;  // empty → <checkpoint>.log.jsonl
};

struct RunConfig {
  std::uint64_t seed = 42;
  SimulatorSection simulator;
  PipelineSection pipeline;
  ModelConfig model;
  FitOptions training;
  EvaluationSection evaluation;
  PathsSection paths;
  /// Canonical JSON of the effective configuration.
  nlohmann::ordered_json effective;
};

/// Default configuration tree for a profile ("full" or "tiny").
nlohmann::ordered_json default_config(const std::string& profile);

/// Merges `overlay` into `base`, rejecting keys absent from `base` and values
/// whose JSON type differs. `where` prefixes error messages.
void merge_config(nlohmann::ordered_json& base, const nlohmann::json& overlay, const std::string& where);

/// Validates every field and converts. Throws ConfigError naming the field.
RunConfig to_run_config(const nlohmann::ordered_json& tree);

/// FNV-1a of the canonical config text, as 16 hex digits.
std::string config_hash(const nlohmann::ordered_json& tree);

struct GenerateResult {
  std::size_t rows = 0;
  std::filesystem::path dataset, manifest;
};
GenerateResult cmd_generate(const RunConfig& cfg, const std::filesystem::path& out);

struct TrainResult {
  TrainReport report;
  std::filesystem::path checkpoint, log;
};
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset, const std::filesystem::path& out,
                      std::ostream& progress);

struct PredictResult {
  std::size_t instances = 0;
  std::filesystem::path dump;
};
PredictResult cmd_predict(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& dataset, const std::string& selector,
                          const std::filesystem::path& out);

EvaluationSummary cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& forecast,
                               const std::filesystem::path& out_dir);

/// Test split indices chosen by a selector: "all-test", "test:<i>" or "test:<a>-<b>" (inclusive).
std::vector<std::size_t> select_instances(const std::string& selector, std::size_t test_count);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hvf::cli
