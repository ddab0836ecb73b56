#include "hvf/model.hpp"

#include <algorithm>
#include <memory>

#include "hvf/errors.hpp"

namespace hvf {

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.n_past = 48;
  c.n_future = 12;
  c.units = 16;
  c.heads = 2;
  c.d_model = 32;
  c.dropout = 0.1;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(n_past, "n_past");
  positive(n_future, "n_future");
  positive(past_features, "past_features");
  positive(future_features, "future_features");
  positive(zones, "zones");
  positive(units, "units");
  positive(heads, "heads");
  positive(d_model, "d_model");
  if (d_model % heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) + ") must be divisible by model.heads (" +
                      std::to_string(heads) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (quantiles.empty()) throw ConfigError("model.quantiles must not be empty");
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) throw ConfigError("model.quantiles must lie in (0, 1)");
    if (i > 0 && !(quantiles[i] > quantiles[i - 1])) {
      throw ConfigError("model.quantiles must be strictly ascending");
    }
  }
  if (std::find(quantiles.begin(), quantiles.end(), 0.5) == quantiles.end()) {
    throw ConfigError("model.quantiles must contain 0.5");
  }
}

std::size_t ModelConfig::median_index() const {
  auto it = std::find(quantiles.begin(), quantiles.end(), 0.5);
  if (it == quantiles.end()) throw ConfigError("model.quantiles must contain 0.5");
  return static_cast<std::size_t>(it - quantiles.begin());
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  const std::size_t d = cfg_.d_model, u = cfg_.units;
  adapt_ = 2 * u != d;

  auto make_branch = [&](const std::string& name, std::size_t features) {
    Branch b;
    b.input = make_dense(store_, name + "/input", features, d, rng);
    b.attention = make_mha(store_, name + "/self_mha", d, cfg_.heads, rng);
    b.attention_grn = make_grn(store_, name + "/self_mha_grn", d, rng);
    b.lstm = make_bilstm(store_, name + "/bilstm", d, u, rng);
    if (adapt_) b.adapter = make_dense(store_, name + "/bilstm_adapter", 2 * u, d, rng);
    b.lstm_grn = make_grn(store_, name + "/bilstm_grn", d, rng);
    return b;
  };
  encoder_ = make_branch("encoder", cfg_.past_features);
  decoder_ = make_branch("decoder", cfg_.future_features);
  cross_ = make_mha(store_, "cross_mha", d, cfg_.heads, rng);
  cross_grn_ = make_grn(store_, "cross_mha_grn", d, rng);
  output_lstm_ = make_bilstm(store_, "output/bilstm", d, u, rng);
  if (adapt_) output_adapter_ = make_dense(store_, "output/bilstm_adapter", 2 * u, d, rng);
  output_grn_ = make_grn(store_, "output/bilstm_grn", d, rng);
  head_ = make_dense(store_, "head", d, cfg_.output_width(), rng);
}

Var Model::recurrent_block(Graph& g, Var x, const BiLstmWeights& lstm, const DenseWeights& adapter,
                           const GrnWeights& grn, bool training, Rng& rng) const {
  Var seq = bilstm_forward(g, x, lstm);
  if (adapt_) seq = dense_forward(g, seq, adapter);
  seq = dropout_apply(g, seq, cfg_.dropout, training, rng);
  return grn_forward(g, seq, x, grn);
}

Var Model::encode(Graph& g, Var x, const Branch& b, bool training, Rng& rng, std::vector<Tensor>* attn) const {
  Var projected = dense_forward(g, x, b.input);
  MhaResult self = mha_forward(g, projected, projected, b.attention);
  if (attn) *attn = std::move(self.attention);
  Var attended = dropout_apply(g, self.output, cfg_.dropout, training, rng);
  Var e1 = grn_forward(g, attended, projected, b.attention_grn);
  return recurrent_block(g, e1, b.lstm, b.adapter, b.lstm_grn, training, rng);
}

Var Model::forward(Graph& g, const Tensor& past, const Tensor& future, bool training, Rng& rng,
                   ForwardTrace* trace) const {
  auto check = [](const Tensor& t, std::size_t rows, std::size_t cols, const char* stage) {
    if (t.rank() != 2 || t.dim(0) != rows || t.dim(1) != cols) {
      throw DimensionError(std::string(stage) + ": expected [" + std::to_string(rows) + " x " +
                           std::to_string(cols) + "], got " + shape_string(t.shape()));
    }
  };
  check(past, cfg_.n_past, cfg_.past_features, "encoder input");
  check(future, cfg_.n_future, cfg_.future_features, "decoder input");

  Var enc = encode(g, g.constant(past), encoder_, training, rng, trace ? &trace->encoder_attention : nullptr);
  Var dec = encode(g, g.constant(future), decoder_, training, rng, trace ? &trace->decoder_attention : nullptr);

  MhaResult cross = mha_forward(g, dec, enc, cross_);
  if (trace) trace->cross_attention = std::move(cross.attention);
  Var c = dropout_apply(g, cross.output, cfg_.dropout, training, rng);
  Var x1 = grn_forward(g, c, dec, cross_grn_);

  Var x2 = recurrent_block(g, x1, output_lstm_, output_adapter_, output_grn_, training, rng);
  return dense_forward(g, x2, head_);
}

Tensor Model::infer(const Tensor& past, const Tensor& future, ForwardTrace* trace) const {
  Graph g(&store_);
  Rng unused(0);
  Var out = forward(g, past, future, false, unused, trace);
  return out.value().reshape({cfg_.n_future, cfg_.zones, cfg_.quantile_count()});
}

// ---------------------------------------------------------------------------

QuantileForecast forecast_sample(const Model& model, const ScalerSpec& scaler, const WindowedSample& sample) {
  const ModelConfig& cfg = model.config();
  if (cfg.zones != target_names().size()) {
    throw ConfigError("forecast: model zone count does not match the target layout");
  }
  QuantileForecast f;
  f.values = model.infer(sample.past, sample.future);
  f.levels = cfg.quantiles;
  f.origin = sample.origin;
  const std::size_t q = cfg.quantile_count();
  for (std::size_t z = 0; z < cfg.zones; ++z) {
    const FeatureRange& r = scaler.range(target_names()[z]);
    for (std::size_t t = 0; t < cfg.n_future; ++t) {
      for (std::size_t k = 0; k < q; ++k) {
        double& v = f.values[(t * cfg.zones + z) * q + k];
        v = minmax_inverse(v, r.min, r.max);
      }
    }
  }
  if (!f.values.all_finite()) throw NumericError("forecast contains non-finite values");
  return f;
}

QuantileForecast predict(const Model& model, const ScalerSpec& scaler, const SimulatedDataset& raw_window) {
  const ModelConfig& cfg = model.config();
  const std::size_t need = cfg.n_past + cfg.n_future;
  if (raw_window.rows() != need) {
    throw DimensionError("predict: raw window has " + std::to_string(raw_window.rows()) + " rows, expected " +
                         std::to_string(need));
  }
  SimulatedDataset window = raw_window;
  // Future targets are unknown at prediction time; any in-range value keeps the
  // encoder/decoder inputs unaffected.
  for (const auto& name : target_names()) {
    if (!window.has_column(name)) break;
    auto& col = window.column(name);
    const FeatureRange& r = scaler.range(name);
    for (std::size_t i = cfg.n_past; i < need; ++i) col[i] = std::clamp(col[i], r.min, r.max);
  }
  auto table = std::make_shared<const FeatureTable>(window, scaler);
  WindowOptions opts;
  opts.n_past = cfg.n_past;
  opts.n_future = cfg.n_future;
  opts.noise_sd = {0, 0, 0, 0, 0};
  WindowedSet set(table, 0, need, opts);
  QuantileForecast f = forecast_sample(model, scaler, set.sample(0));
  f.clamped_inputs = table->total_clamps();
  for (const auto& [name, count] : table->clamp_counts()) {
    f.warnings.push_back("input '" + name + "' clamped to its interval " + std::to_string(count) + " time(s)");
  }
  return f;
}

}  // namespace hvf
