#include "hvf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "hvf/errors.hpp"
#include "hvf/random.hpp"

namespace hvf {
namespace {

void check_level(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile level must lie in (0, 1), got " + std::to_string(q));
}

double rho(double residual, double q) { return residual > 0 ? q * residual : (q - 1.0) * residual; }

}  // namespace

double pinball_loss(std::span<const double> y, std::span<const double> y_hat, double q) {
  check_level(q);
  if (y.size() != y_hat.size()) {
    throw DimensionError("pinball_loss: " + std::to_string(y.size()) + " targets vs " +
                         std::to_string(y_hat.size()) + " predictions");
  }
  if (y.empty()) throw DimensionError("pinball_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += rho(y[i] - y_hat[i], q);
  return total / static_cast<double>(y.size());
}

double total_quantile_loss(const Tensor& y, const Tensor& y_hat, std::span<const double> levels) {
  if (levels.empty()) throw DimensionError("total_quantile_loss: no quantile levels");
  for (double q : levels) check_level(q);
  if (y_hat.size() != y.size() * levels.size()) {
    throw DimensionError("total_quantile_loss: prediction " + shape_string(y_hat.shape()) + " does not hold " +
                         std::to_string(levels.size()) + " levels for target " + shape_string(y.shape()));
  }
  const std::size_t nq = levels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t k = 0; k < nq; ++k) total += rho(y[i] - y_hat[i * nq + k], levels[k]);
  }
  return total / static_cast<double>(y_hat.size());
}

Var quantile_loss(Graph& g, Var prediction, const Tensor& target, std::span<const double> levels) {
  const Tensor& p = prediction.value();
  const double loss = total_quantile_loss(target, p, levels);
  std::vector<double> lv(levels.begin(), levels.end());
  return g.record("quantile_loss", {prediction}, Tensor::scalar(loss),
                  [target, lv](Graph& g, std::size_t self) {
                    const std::size_t ip = g.parent(self, 0);
                    if (!g.needs_grad(ip)) return;
                    const double upstream = g.grad_buffer(self).item();
                    const Tensor& pred = g.value(ip);
                    Tensor& dp = g.grad_buffer(ip);
                    const std::size_t nq = lv.size();
                    const double scale = upstream / static_cast<double>(pred.size());
                    for (std::size_t i = 0; i < target.size(); ++i) {
                      for (std::size_t k = 0; k < nq; ++k) {
                        const double r = target[i] - pred[i * nq + k];
                        dp[i * nq + k] += scale * (r > 0 ? -lv[k] : 1.0 - lv[k]);
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::for_params(const ParameterStore& store, AdamOptions options) {
  OptimizerState s;
  s.options = options;
  for (const auto& p : store) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_step(ParameterStore& store, const std::vector<Tensor>& grads, OptimizerState& state) {
  if (grads.size() != store.size() || state.m.size() != store.size() || state.v.size() != store.size()) {
    throw DimensionError("adam_step: gradient/state count does not match the parameter store");
  }
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (grads[p].shape() != store[p].value.shape()) {
      throw DimensionError("adam_step: gradient shape mismatch for '" + store[p].name + "'");
    }
    if (!grads[p].all_finite()) throw NumericError("adam_step: non-finite gradient in '" + store[p].name + "'");
  }
  const AdamOptions& o = state.options;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < store.size(); ++p) {
    Tensor& w = store[p].value;
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    const Tensor& gr = grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gr[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gr[i] * gr[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.values()) v *= s;
    }
  }
  return norm;
}

double evaluate_loss(const Model& model, const SampleSource& samples) {
  if (samples.empty()) throw ConfigError("cannot evaluate loss on an empty split");
  const auto& levels = model.config().quantiles;
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const WindowedSample s = samples.sample(i);
    total += total_quantile_loss(s.target, model.infer(s.past, s.future), levels);
  }
  return total / static_cast<double>(samples.size());
}

void FitOptions::validate() const {
  if (batch_size == 0) throw ConfigError("training.batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("training.max_epochs must be positive");
  if (!(adam.learning_rate > 0)) throw ConfigError("training.learning_rate must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("training.beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("training.beta2 must lie in [0, 1)");
  if (!(adam.epsilon > 0)) throw ConfigError("training.epsilon must be positive");
}

TrainReport fit(Model& model, const SampleSource& train, const SampleSource& validation,
                const FitOptions& options, const EpochCallback& on_epoch) {
  options.validate();
  if (train.empty()) throw ConfigError("training split is empty");
  if (validation.empty()) throw ConfigError("validation split is empty");

  using clock = std::chrono::steady_clock;
  ParameterStore& store = model.params();
  const auto& levels = model.config().quantiles;
  OptimizerState opt = OptimizerState::for_params(store, options.adam);

  auto snapshot = [&store] {
    std::vector<Tensor> v;
    v.reserve(store.size());
    for (const auto& p : store) v.push_back(p.value);
    return v;
  };

  TrainReport report;
  {
    const auto t0 = clock::now();
    EpochRecord r;
    r.epoch = 0;
    r.val_loss = evaluate_loss(model, validation);
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    report.epochs.push_back(r);
    report.best_val_loss = r.val_loss;
    if (on_epoch) on_epoch(r, model, true);
  }
  std::vector<Tensor> best = snapshot();
  std::size_t wait = 0;
  report.stop_reason = "max_epochs";

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Tensor> grads;
  for (const auto& p : store) grads.emplace_back(p.value.shape());

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    const auto t0 = clock::now();
    std::mt19937_64 shuffle_rng = derive_rng({options.seed, epoch, 0x5eedULL});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      for (auto& g : grads) g.fill(0.0);
      for (std::size_t j = begin; j < end; ++j) {
        const std::size_t idx = order[j];
        const WindowedSample s = train.sample(idx);
        Rng dropout_rng = derive_rng({options.seed, epoch, idx, 0xd509ULL});
        Graph g(&store);
        Var out = model.forward(g, s.past, s.future, true, dropout_rng);
        Var loss = quantile_loss(g, out, s.target, levels);
        g.backward(loss);
        g.accumulate_parameter_grads(grads, inv_batch);
        epoch_loss += loss.value().item();
      }
      clip_global_norm(grads, options.clip_norm);
      adam_step(store, grads, opt);
      ++report.optimizer_steps;
    }

    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = epoch_loss / static_cast<double>(order.size());
    r.val_loss = evaluate_loss(model, validation);
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    report.epochs.push_back(r);

    const bool improved = r.val_loss < report.best_val_loss;
    if (improved) {
      report.best_val_loss = r.val_loss;
      report.best_epoch = epoch;
      best = snapshot();
      wait = 0;
    } else {
      ++wait;
    }
    if (on_epoch) on_epoch(r, model, improved);
    if (!improved && wait >= options.patience) {
      report.stop_reason = "early_stopping";
      break;
    }
  }

  for (std::size_t p = 0; p < store.size(); ++p) store[p].value = best[p];
  return report;
}

std::string epoch_log_line(const EpochRecord& r) {
  char buf[256];
  if (std::isnan(r.train_loss)) {
    std::snprintf(buf, sizeof buf, "{\"epoch\":%zu,\"train_loss\":null,\"val_loss\":%.17g,\"seconds\":%.3f}", r.epoch,
                  r.val_loss, r.seconds);
  } else {
    std::snprintf(buf, sizeof buf, "{\"epoch\":%zu,\"train_loss\":%.17g,\"val_loss\":%.17g,\"seconds\":%.3f}",
                  r.epoch, r.train_loss, r.val_loss, r.seconds);
  }
  return buf;
}

}  // namespace hvf
