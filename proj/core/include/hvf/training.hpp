#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hvf/autodiff.hpp"
#include "hvf/model.hpp"
#include "hvf/pipeline.hpp"

namespace hvf {

/// Mean over elements of max(q·(y−ŷ), (q−1)·(y−ŷ)).
/// Throws ConfigError for q ∉ (0,1), DimensionError on length mismatch.
double pinball_loss(std::span<const double> y, std::span<const double> y_hat, double q);

/// Unweighted mean of the pinball loss over levels, steps and zones.
/// y is [T × Z]; y_hat holds T·Z·|levels| values laid out [T × Z × Q].
double total_quantile_loss(const Tensor& y, const Tensor& y_hat, std::span<const double> levels);

/// Differentiable total_quantile_loss of a [T × Z·Q] prediction node.
Var quantile_loss(Graph& g, Var prediction, const Tensor& target, std::span<const double> levels);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<Tensor> m, v;
  std::size_t t = 0;
  AdamOptions options;

  static OptimizerState for_params(const ParameterStore& store, AdamOptions options = {});
};

/// One bias-corrected Adam update. Every gradient is checked first; a
/// non-finite entry throws NumericError naming the parameter and leaves
/// parameters and state untouched.
void adam_step(ParameterStore& store, const std::vector<Tensor>& grads, OptimizerState& state);

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

/// Mean total quantile loss of the model over a sample collection (inference mode).
double evaluate_loss(const Model& model, const SampleSource& samples);

struct FitOptions {
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double clip_norm = 1.0;  // ≤ 0 disables clipping
  AdamOptions adam;
  std::uint64_t seed = 42;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  /// NaN for epoch 0 (the untrained evaluation).
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_loss = 0;
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;  // epochs[0] is the untrained model
  std::size_t best_epoch = 0;
  double best_val_loss = 0;
  std::string stop_reason;  // "early_stopping" or "max_epochs"
  std::size_t optimizer_steps = 0;

  double initial_val_loss() const { return epochs.empty() ? 0.0 : epochs.front().val_loss; }
};

/// Called after every epoch (including epoch 0) with the current model;
/// `improved` is true when this epoch set a new best validation loss.
using EpochCallback = std::function<void(const EpochRecord&, const Model&, bool improved)>;

/// Seeded shuffled minibatches, dropout in training only, Adam with global-norm
/// clipping, early stopping on validation loss. On return the model holds the
/// parameters of the best validation epoch.
TrainReport fit(Model& model, const SampleSource& train, const SampleSource& validation,
                const FitOptions& options, const EpochCallback& on_epoch = {});

/// Writes one JSON object per line: {"epoch","train_loss","val_loss","seconds"}.
std::string epoch_log_line(const EpochRecord& record);

}  // namespace hvf
