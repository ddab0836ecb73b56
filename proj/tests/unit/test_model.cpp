#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <random>
#include <set>

#include "hvf/building_sim.hpp"
#include "hvf/checkpoint.hpp"
#include "hvf/errors.hpp"
#include "hvf/gradient_check.hpp"
#include "hvf/model.hpp"
#include "hvf/training.hpp"
#include "test_util.hpp"

namespace hvf {
namespace {

using namespace ops;

using test::random_tensor;

ModelConfig micro() {
  ModelConfig c;
  c.n_past = 8;
  c.n_future = 4;
  c.d_model = 8;
  c.units = 4;
  c.heads = 2;
  c.dropout = 0.3;
  return c;
}

std::size_t dense_n(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t lstm_n(std::size_t in, std::size_t u) { return in * 4 * u + u * 4 * u + 4 * u; }
std::size_t mha_n(std::size_t d) { return 4 * dense_n(d, d); }
std::size_t grn_n(std::size_t d) { return 2 * dense_n(d, d) + 2 * dense_n(d, d) + 2 * d; }

// Closed-form size from the layer shapes alone.
std::size_t expected_parameters(const ModelConfig& c) {
  const std::size_t d = c.d_model, u = c.units;
  const std::size_t adapter = 2 * u == d ? 0 : dense_n(2 * u, d);
  auto branch = [&](std::size_t f) { return dense_n(f, d) + mha_n(d) + grn_n(d) + 2 * lstm_n(d, u) + adapter + grn_n(d); };
  return branch(c.past_features) + branch(c.future_features) + mha_n(d) + grn_n(d) + 2 * lstm_n(d, u) + adapter +
         grn_n(d) + dense_n(d, c.zones * c.quantiles.size());
}

TEST(ModelConfig, DefaultsMatchFullProfile) {
  const ModelConfig c;
  EXPECT_EQ(c.n_past, 672u);
  EXPECT_EQ(c.n_future, 96u);
  EXPECT_EQ(c.units, 200u);
  EXPECT_EQ(c.heads, 4u);
  EXPECT_EQ(c.zones, 5u);
  EXPECT_DOUBLE_EQ(c.dropout, 0.3);
  EXPECT_EQ(c.d_model, 2 * c.units);
  EXPECT_EQ(c.quantiles[c.median_index()], 0.5);
}

TEST(ModelConfig, DivisibilityChecked) {
  ModelConfig c = micro();
  EXPECT_NO_THROW(Model{c});
  c.d_model = 10;
  c.heads = 4;
  try {
    Model m(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("model."), std::string::npos) << e.what();
  }
}

TEST(ModelConfig, QuantilesValidated) {
  ModelConfig c = micro();
  c.quantiles = {0.1, 0.9};  // no median
  EXPECT_THROW(c.validate(), ConfigError);
  c.quantiles = {0.5, 0.1};
  EXPECT_THROW(c.validate(), ConfigError);
  c.quantiles = {0.0, 0.5};
  EXPECT_THROW(c.validate(), ConfigError);
  c = micro();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, SameSeedSameParameters) {
  const Model a(micro()), b(micro());
  ASSERT_EQ(a.params().size(), b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params()[i].name, b.params()[i].name);
    EXPECT_EQ(a.params()[i].value, b.params()[i].value);
  }
}

TEST(Model, ParameterCountMatchesClosedForm) {
  for (ModelConfig c : {micro(), ModelConfig::tiny()}) {
    EXPECT_EQ(Model(c).parameter_count(), expected_parameters(c));
  }
  ModelConfig adapted = micro();
  adapted.units = 3;  // 2u != d
  EXPECT_EQ(Model(adapted).parameter_count(), expected_parameters(adapted));
}

TEST(Model, ParameterNamesUnique) {
  const Model m(ModelConfig::tiny());
  std::set<std::string> names;
  for (const auto& p : m.params()) {
    EXPECT_TRUE(names.insert(p.name).second) << p.name;
    EXPECT_EQ(p.grad.shape(), p.value.shape());
  }
}

TEST(Model, TinyShapes) {
  const ModelConfig c = ModelConfig::tiny();
  const Model m(c);
  Rng rng(1);
  ForwardTrace trace;
  const Tensor y = m.infer(random_tensor({c.n_past, c.past_features}, rng),
                           random_tensor({c.n_future, c.future_features}, rng), &trace);
  EXPECT_EQ(y.shape(), (Shape{12, 5, 7}));
  EXPECT_TRUE(y.all_finite());
  ASSERT_EQ(trace.cross_attention.size(), c.heads);
  for (const Tensor& a : trace.cross_attention) {
    ASSERT_EQ(a.shape(), (Shape{12, 48}));
    for (std::size_t r = 0; r < 12; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 48; ++k) s += a.at(r, k);
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
}

TEST(Model, StageNamedOnShapeMismatch) {
  const ModelConfig c = micro();
  const Model m(c);
  Rng rng(1);
  try {
    m.infer(Tensor({c.n_past, c.past_features + 1}), Tensor({c.n_future, c.future_features}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder"), std::string::npos) << e.what();
  }
  EXPECT_THROW(m.infer(Tensor({c.n_past, c.past_features}), Tensor({c.n_future + 1, c.future_features})),
               DimensionError);
}

TEST(Model, InferenceDeterministic) {
  const ModelConfig c = micro();
  const Model m(c);
  Rng rng(2);
  const Tensor p = random_tensor({c.n_past, c.past_features}, rng), f = random_tensor({c.n_future, c.future_features}, rng);
  EXPECT_EQ(m.infer(p, f), m.infer(p, f));
}

TEST(Model, TrainingModeReproducibleWithSeed) {
  const ModelConfig c = micro();
  const Model m(c);
  Rng data(3);
  const Tensor p = random_tensor({c.n_past, c.past_features}, data), f = random_tensor({c.n_future, c.future_features}, data);
  auto run = [&] {
    Graph g(&m.params());
    Rng rng(99);
    return m.forward(g, p, f, true, rng).value();
  };
  const Tensor a = run();
  EXPECT_EQ(a, run());
  Graph g(&m.params());
  Rng rng(99);
  EXPECT_NE(a, m.forward(g, p, f, false, rng).value());
}

TEST(Model, PinballGradientMatchesFiniteDifferences) {
  ModelConfig c = micro();
  Model m(c);
  Rng rng(4);
  const Tensor p = random_tensor({c.n_past, c.past_features}, rng), f = random_tensor({c.n_future, c.future_features}, rng);
  const Tensor y = random_tensor({c.n_future, c.zones}, rng);
  const auto r = gradient_check(
      [&](Graph& g) {
        Rng unused(0);
        return quantile_loss(g, m.forward(g, p, f, false, unused), y, c.quantiles);
      },
      m.params(), 1e-5, 1e-4);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
  EXPECT_EQ(r.coordinates, m.parameter_count());
}

TEST(Model, WindowSignalReachesOutput) {
  // One optimiser step away from initialisation, flipping a future window flag moves the forecast.
  const ModelConfig c = micro();
  Model m(c);
  Rng rng(5);
  const Tensor p = random_tensor({c.n_past, c.past_features}, rng);
  Tensor f = random_tensor({c.n_future, c.future_features}, rng);
  const Tensor y = random_tensor({c.n_future, c.zones}, rng);
  {
    Graph g(&m.params());
    Rng d(1);
    g.backward(quantile_loss(g, m.forward(g, p, f, true, d), y, c.quantiles));
    std::vector<Tensor> grads;
    for (const auto& prm : m.params()) grads.emplace_back(prm.value.shape());
    g.accumulate_parameter_grads(grads);
    auto state = OptimizerState::for_params(m.params());
    adam_step(m.params(), grads, state);
  }
  const auto& names = future_feature_names();
  for (const char* ws : {"ws_1", "ws_2", "ws_3", "ws_4"}) {
    const std::size_t col = std::find(names.begin(), names.end(), ws) - names.begin();
    ASSERT_LT(col, names.size());
    Tensor flipped = f;
    flipped.at(c.n_future - 1, col) = -f.at(c.n_future - 1, col) + 0.5;
    const Tensor a = m.infer(p, f), b = m.infer(p, flipped);
    double diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    EXPECT_GT(diff, 0.0) << ws;
  }
}

SimulatedDataset small_dataset(std::size_t days) {
  const Calendar cal(*parse_date("2021-03-01"), days);
  const sim::BuildingSpec spec = sim::default_building();
  sim::Rng r1(1), r2(2), r3(3), r4(4);
  const auto weather = sim::synth_weather(r1, cal);
  return sim::simulate(spec, cal, weather, sim::generate_schedules(r2, cal, spec), sim::generate_mprs_setpoints(r3, cal),
                       sim::generate_prbs_windows(r4, cal, 0.05));
}

TEST(Predict, ConstantInputsGiveFiniteForecast) {
  const ModelConfig c = micro();
  const Model m(c);
  SimulatedDataset raw = small_dataset(1).slice(0, c.n_past + c.n_future);
  for (const auto& name : raw.columns()) {
    auto& col = raw.column(name);
    std::fill(col.begin(), col.end(), col.front());
  }
  const QuantileForecast q = predict(m, ScalerSpec::defaults(), raw);
  EXPECT_EQ(q.values.shape(), (Shape{c.n_future, 5, 7}));
  EXPECT_TRUE(q.values.all_finite());
  EXPECT_EQ(q.clamped_inputs, 0u);
}

TEST(Predict, OutOfRangeInputsAreClampedAndReported) {
  const ModelConfig c = micro();
  const Model m(c);
  SimulatedDataset raw = small_dataset(1).slice(0, c.n_past + c.n_future);
  raw.column("t_out")[0] = 55.0;
  const QuantileForecast q = predict(m, ScalerSpec::defaults(), raw);
  EXPECT_EQ(q.clamped_inputs, 1u);
  ASSERT_FALSE(q.warnings.empty());
  EXPECT_NE(q.warnings.front().find("t_out"), std::string::npos);
}

TEST(Predict, WrongRowCountThrows) {
  const Model m(micro());
  EXPECT_THROW(predict(m, ScalerSpec::defaults(), small_dataset(1).slice(0, 5)), DimensionError);
}

TEST(Predict, CheckpointForecastIsBitwiseEqual) {
  const ModelConfig c = micro();
  const Model m(c);
  const SimulatedDataset raw = small_dataset(1).slice(0, c.n_past + c.n_future);
  const ScalerSpec scaler = ScalerSpec::defaults();
  const auto bytes = serialize_checkpoint(make_checkpoint(m, scaler, WindowOptions{}, SplitFractions{}, 42, {}));
  const Model restored = restore_model(deserialize_checkpoint(bytes));
  EXPECT_EQ(predict(m, scaler, raw).values, predict(restored, scaler, raw).values);
}

TEST(Model, FullProfileShapes) {
  const ModelConfig c;
  const Model m(c);
  Rng rng(6);
  ForwardTrace trace;
  const Tensor y = m.infer(random_tensor({672, c.past_features}, rng), random_tensor({96, c.future_features}, rng), &trace);
  EXPECT_EQ(y.shape(), (Shape{96, 5, 7}));
  EXPECT_TRUE(y.all_finite());
  ASSERT_EQ(trace.cross_attention.size(), 4u);
  for (const Tensor& a : trace.cross_attention) {
    EXPECT_EQ(a.shape(), (Shape{96, 672}));
    for (std::size_t r = 0; r < 96; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 672; ++k) s += a.at(r, k);
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
}

}  // namespace
}  // namespace hvf
