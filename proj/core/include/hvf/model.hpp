#pragma once

// Attention-based biLSTM encoder–decoder with per-zone quantile outputs.
//
//   past   ─dense─► Self-MHA ─GRN─► biLSTM ─GRN─┐ (encoder, length n_past)
//   future ─dense─► Self-MHA ─GRN─► biLSTM ─GRN─┤ (decoder, length n_future)
//                                   Cross-MHA(q = decoder, kv = encoder) ─GRN─►
//                                   biLSTM ─GRN─► dense head [n_future × zones·Q]

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hvf/autodiff.hpp"
#include "hvf/dataset.hpp"
#include "hvf/layers.hpp"
#include "hvf/pipeline.hpp"

namespace hvf {

struct ModelConfig {
  std::size_t n_past = 672;
  std::size_t n_future = 96;
  std::size_t past_features = 36;
  std::size_t future_features = 21;
  std::size_t zones = 5;
  std::size_t units = 200;
  std::size_t heads = 4;
  std::size_t d_model = 400;
  double dropout = 0.3;
  std::vector<double> quantiles{0.005, 0.025, 0.05, 0.5, 0.95, 0.975, 0.995};
  std::uint64_t seed = 42;

  /// Reduced dimensions for desk-scale runs.
  static ModelConfig tiny();

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  std::size_t quantile_count() const noexcept { return quantiles.size(); }
  /// Index of the 0.5 level.
  std::size_t median_index() const;
  std::size_t output_width() const noexcept { return zones * quantiles.size(); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Values captured during a forward pass for inspection.
struct ForwardTrace {
  std::vector<Tensor> encoder_attention;  // per head, [n_past × n_past]
  std::vector<Tensor> decoder_attention;  // per head, [n_future × n_future]
  std::vector<Tensor> cross_attention;    // per head, [n_future × n_past]
};

class Model {
 public:
  /// Allocates and initialises every weight from cfg.seed.
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore& params() noexcept { return store_; }
  const ParameterStore& params() const noexcept { return store_; }
  std::size_t parameter_count() const noexcept { return store_.element_count(); }

  /// Records the network on `g` (which must be bound to params()). Returns the
  /// scaled output [n_future × zones·Q]; column z·Q + q is zone z, level q.
  Var forward(Graph& g, const Tensor& past, const Tensor& future, bool training, Rng& rng,
              ForwardTrace* trace = nullptr) const;

  /// Inference pass reshaped to [n_future × zones × Q] (scaled units).
  Tensor infer(const Tensor& past, const Tensor& future, ForwardTrace* trace = nullptr) const;

 private:
  struct Branch {
    DenseWeights input;
    MhaWeights attention;
    GrnWeights attention_grn;
    BiLstmWeights lstm;
    DenseWeights adapter;  // used when 2·units != d_model
    GrnWeights lstm_grn;
  };

  Var encode(Graph& g, Var x, const Branch& b, bool training, Rng& rng, std::vector<Tensor>* attn) const;
  Var recurrent_block(Graph& g, Var x, const BiLstmWeights& lstm, const DenseWeights& adapter,
                      const GrnWeights& grn, bool training, Rng& rng) const;

  ModelConfig cfg_;
  ParameterStore store_;
  bool adapt_ = false;
  Branch encoder_, decoder_;
  MhaWeights cross_;
  GrnWeights cross_grn_;
  BiLstmWeights output_lstm_;
  DenseWeights output_adapter_;
  GrnWeights output_grn_;
  DenseWeights head_;
};

inline Model build_model(const ModelConfig& cfg) { return Model(cfg); }

/// Forecast in °C, [n_future × zones × Q].
struct QuantileForecast {
  Tensor values;
  std::vector<double> levels;
  Timestamp origin{};
  /// Inputs clamped to their scaling interval while preparing this forecast.
  std::size_t clamped_inputs = 0;
  std::vector<std::string> warnings;
};

/// Runs inference on an already-scaled sample and converts to °C.
QuantileForecast forecast_sample(const Model& model, const ScalerSpec& scaler, const WindowedSample& sample);

/// Scales a raw window of exactly n_past + n_future rows (physical units; the
/// target rows of the future part are ignored), runs inference and converts
/// back to °C. Out-of-interval inputs are clamped and reported in `warnings`.
QuantileForecast predict(const Model& model, const ScalerSpec& scaler, const SimulatedDataset& raw_window);

}  // namespace hvf
