#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "hvf/checkpoint.hpp"
#include "hvf/errors.hpp"
#include "hvf/training.hpp"
#include "test_util.hpp"

namespace hvf {
namespace {

using namespace ops;

using test::random_tensor;

// ---------------------------------------------------------------------------
// losses

TEST(Pinball, ReferenceValues) {
  const std::vector<double> one{1.0}, zero{0.0};
  EXPECT_EQ(pinball_loss(one, one, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(pinball_loss(one, zero, 0.5), 0.5);
  EXPECT_NEAR(pinball_loss(zero, one, 0.9), 0.1, 1e-15);
}

TEST(Pinball, InvalidLevelOrLengths) {
  const std::vector<double> a{1.0, 2.0}, b{1.0};
  EXPECT_THROW(pinball_loss(a, a, 0.0), ConfigError);
  EXPECT_THROW(pinball_loss(a, a, 1.0), ConfigError);
  EXPECT_THROW(pinball_loss(a, b, 0.5), DimensionError);
}

TEST(Pinball, MedianIsHalfMae) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> y(37), p(37);
    double mae = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = u(rng);
      p[i] = u(rng);
      mae += std::abs(y[i] - p[i]) / y.size();
    }
    EXPECT_NEAR(pinball_loss(y, p, 0.5), 0.5 * mae, 1e-12);
  }
}

TEST(Pinball, ConvexInPrediction) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10, 10), lam(0, 1), lev(0.001, 0.999);
  for (int trial = 0; trial < 1000; ++trial) {
    const double y = u(rng), a = u(rng), b = u(rng), l = lam(rng), q = lev(rng);
    const double mix = l * a + (1 - l) * b;
    auto loss = [&](double x) { return pinball_loss(std::span<const double>(&y, 1), std::span<const double>(&x, 1), q); };
    EXPECT_LE(loss(mix), l * loss(a) + (1 - l) * loss(b) + 1e-12);
  }
}

TEST(TotalQuantileLoss, SingleMedianLevelIsHalfMae) {
  std::mt19937_64 rng(3);
  const Tensor y = random_tensor({6, 5}, rng), p = random_tensor({6, 5, 1}, rng);
  double mae = 0;
  for (std::size_t i = 0; i < y.size(); ++i) mae += std::abs(y[i] - p[i]) / y.size();
  const std::vector<double> levels{0.5};
  EXPECT_NEAR(total_quantile_loss(y, p, levels), 0.5 * mae, 1e-12);
}

TEST(TotalQuantileLoss, PerfectAndTranslationInvariant) {
  std::mt19937_64 rng(4);
  const std::vector<double> levels{0.05, 0.5, 0.95};
  const Tensor y = random_tensor({4, 5}, rng);
  Tensor perfect({4, 5, 3});
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t q = 0; q < 3; ++q) perfect[i * 3 + q] = y[i];
  }
  EXPECT_EQ(total_quantile_loss(y, perfect, levels), 0.0);

  const Tensor p = random_tensor({4, 5, 3}, rng);
  Tensor ys = y, ps = p;
  for (double& v : ys.values()) v += 7.25;
  for (double& v : ps.values()) v += 7.25;
  EXPECT_NEAR(total_quantile_loss(y, p, levels), total_quantile_loss(ys, ps, levels), 1e-12);
}

TEST(TotalQuantileLoss, LevelCountMismatch) {
  const std::vector<double> levels{0.1, 0.5};
  EXPECT_THROW(total_quantile_loss(Tensor({2, 5}), Tensor({2, 5, 3}), levels), DimensionError);
}

TEST(QuantileLossNode, MatchesScalarFunction) {
  std::mt19937_64 rng(5);
  const std::vector<double> levels{0.025, 0.5, 0.975};
  const Tensor y = random_tensor({3, 5}, rng), p = random_tensor({3, 15}, rng);
  Graph g;
  Var loss = quantile_loss(g, g.input(p), y, levels);
  EXPECT_NEAR(loss.value().item(), total_quantile_loss(y, p.reshape({3, 5, 3}), levels), 1e-15);
}

// ---------------------------------------------------------------------------
// optimiser

ParameterStore one_param(double v) {
  ParameterStore s;
  s.add("w", Tensor({1}, v));
  return s;
}

TEST(Adam, ZeroGradientLeavesParametersButCountsStep) {
  ParameterStore s = one_param(0.7);
  auto state = OptimizerState::for_params(s);
  adam_step(s, {Tensor({1}, 0.0)}, state);
  EXPECT_EQ(s[0].value[0], 0.7);
  EXPECT_EQ(state.t, 1u);
}

TEST(Adam, FirstStepHandFormula) {
  // At t = 1 the bias corrections cancel: Δ = −α·g/(|g| + ε).
  for (double g : {3.0, 1e-3, 250.0}) {
    ParameterStore s = one_param(0.0);
    AdamOptions o;
    o.learning_rate = 0.01;
    auto state = OptimizerState::for_params(s, o);
    adam_step(s, {Tensor({1}, g)}, state);
    EXPECT_NEAR(s[0].value[0], -o.learning_rate * g / (std::abs(g) + o.epsilon), 1e-15);
  }
}

TEST(Adam, ZeroBetasGiveNormalisedSignDescent) {
  ParameterStore s = one_param(1.0);
  AdamOptions o;
  o.beta1 = 0.0;
  o.beta2 = 0.0;
  o.learning_rate = 0.1;
  auto state = OptimizerState::for_params(s, o);
  double expected = 1.0;
  for (double g : {2.0, -0.5, 4.0}) {
    adam_step(s, {Tensor({1}, g)}, state);
    expected -= 0.1 * g / (std::abs(g) + o.epsilon);
    EXPECT_NEAR(s[0].value[0], expected, 1e-14);
  }
}

TEST(Adam, NanGradientAbortsAndNamesParameter) {
  ParameterStore s;
  s.add("good", Tensor({2}, 1.0));
  s.add("encoder/bad", Tensor({2}, 1.0));
  auto state = OptimizerState::for_params(s);
  try {
    adam_step(s, {Tensor({2}, 0.1), Tensor({2}, {0.0, std::nan("")})}, state);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder/bad"), std::string::npos) << e.what();
  }
  EXPECT_EQ(state.t, 0u);
  EXPECT_EQ(s[0].value[0], 1.0);
}

TEST(Adam, SecondMomentNonNegative) {
  ParameterStore s;
  s.add("w", Tensor({10}, 0.0));
  auto state = OptimizerState::for_params(s);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) adam_step(s, {random_tensor({10}, rng)}, state);
  for (double v : state.v[0].values()) EXPECT_GE(v, 0.0);
  EXPECT_EQ(state.m[0].shape(), s[0].value.shape());
}

TEST(ClipGlobalNorm, RescalesOnlyAboveLimit) {
  std::vector<Tensor> g{Tensor({1, 2}, {3.0, 0.0}), Tensor({1}, 4.0)};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[1][0], 0.8, 1e-15);
  std::vector<Tensor> small{Tensor({1}, 0.3)};
  clip_global_norm(small, 1.0);
  EXPECT_EQ(small[0][0], 0.3);
}

// ---------------------------------------------------------------------------
// fitting

ModelConfig micro() {
  ModelConfig c;
  c.n_past = 6;
  c.n_future = 3;
  c.d_model = 8;
  c.units = 4;
  c.heads = 2;
  c.dropout = 0.0;
  return c;
}

// Targets are a fixed linear map of the future inputs.
SampleVector linear_samples(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::mt19937_64 wrng(1234);
  const Tensor w = random_tensor({c.future_features, c.zones}, wrng, -0.2, 0.2);
  SampleVector out;
  for (std::size_t i = 0; i < n; ++i) {
    WindowedSample s;
    s.past = random_tensor({c.n_past, c.past_features}, rng);
    s.future = random_tensor({c.n_future, c.future_features}, rng);
    s.target = kernels::matmul(s.future, w);
    s.start_row = i;
    out.push_back(std::move(s));
  }
  return out;
}

TEST(Fit, LinearTargetTrainingLossDecreases) {
  const ModelConfig c = micro();
  Model m(c);
  FitOptions o;
  o.batch_size = 4;
  o.max_epochs = 3;
  o.adam.learning_rate = 3e-3;
  const TrainReport r = fit(m, linear_samples(c, 16, 1), linear_samples(c, 8, 2), o);
  ASSERT_EQ(r.epochs.size(), 4u);
  EXPECT_TRUE(std::isnan(r.epochs[0].train_loss));
  EXPECT_LT(r.epochs[2].train_loss, r.epochs[1].train_loss);
  EXPECT_LT(r.epochs[3].train_loss, r.epochs[2].train_loss);
}

TEST(Fit, OverfitsRepeatedBatch) {
  const ModelConfig c = micro();
  Model m(c);
  const SampleVector batch = linear_samples(c, 4, 3);
  SampleVector repeated;
  for (int k = 0; k < 25; ++k) {
    for (std::size_t i = 0; i < batch.size(); ++i) repeated.push_back(batch.sample(i));
  }
  FitOptions o;
  o.batch_size = 4;
  o.max_epochs = 20;  // 25 steps per epoch → 500 steps
  o.patience = 20;
  o.adam.learning_rate = 3e-3;
  const double initial = evaluate_loss(m, batch);
  const TrainReport r = fit(m, repeated, batch, o);
  EXPECT_LE(r.optimizer_steps, 500u);
  EXPECT_LT(evaluate_loss(m, batch), 0.05 * initial);
}

TEST(Fit, BestEpochHoldsMinimumAndIsRestored) {
  const ModelConfig c = micro();
  Model m(c);
  const SampleVector train = linear_samples(c, 12, 4), val = linear_samples(c, 6, 5);
  FitOptions o;
  o.batch_size = 3;
  o.max_epochs = 6;
  o.adam.learning_rate = 1e-2;
  const TrainReport r = fit(m, train, val, o);
  for (const auto& e : r.epochs) EXPECT_LE(r.best_val_loss, e.val_loss);
  EXPECT_EQ(r.epochs[r.best_epoch].val_loss, r.best_val_loss);
  EXPECT_DOUBLE_EQ(evaluate_loss(m, val), r.best_val_loss);
}

TEST(Fit, ZeroPatienceStopsAtFirstNonImprovingEpoch) {
  const ModelConfig c = micro();
  Model m(c);
  FitOptions o;
  o.batch_size = 2;
  o.max_epochs = 50;
  o.patience = 0;
  o.adam.learning_rate = 0.5;  // large steps make a non-improving epoch appear quickly
  const TrainReport r = fit(m, linear_samples(c, 8, 6), linear_samples(c, 4, 7), o);
  ASSERT_EQ(r.stop_reason, "early_stopping");
  const auto& last = r.epochs.back();
  EXPECT_GE(last.val_loss, r.best_val_loss);
  for (std::size_t e = 1; e + 1 < r.epochs.size(); ++e) {
    double best_before = r.epochs[0].val_loss;
    for (std::size_t k = 1; k < e; ++k) best_before = std::min(best_before, r.epochs[k].val_loss);
    EXPECT_LT(r.epochs[e].val_loss, best_before) << "epoch " << e << " did not improve yet training continued";
  }
}

TEST(Fit, DeterministicTrajectories) {
  const ModelConfig c = [] {
    ModelConfig x = micro();
    x.dropout = 0.3;
    return x;
  }();
  FitOptions o;
  o.batch_size = 3;
  o.max_epochs = 2;
  auto run = [&] {
    Model m(c);
    fit(m, linear_samples(c, 9, 8), linear_samples(c, 3, 9), o);
    return m;
  };
  const Model a = run(), b = run();
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
}

TEST(Fit, EmptySplitRejected) {
  const ModelConfig c = micro();
  Model m(c);
  EXPECT_THROW(fit(m, SampleVector{}, linear_samples(c, 2, 1), FitOptions{}), ConfigError);
  EXPECT_THROW(fit(m, linear_samples(c, 2, 1), SampleVector{}, FitOptions{}), ConfigError);
}

TEST(Fit, DefaultsDeclared) {
  const FitOptions o;
  EXPECT_EQ(o.batch_size, 256u);
  EXPECT_EQ(o.max_epochs, 100u);
  EXPECT_EQ(o.patience, 10u);
  EXPECT_DOUBLE_EQ(o.adam.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(o.clip_norm, 1.0);
}

TEST(EpochLog, JsonFields) {
  EpochRecord r;
  r.epoch = 0;
  r.val_loss = 0.25;
  r.seconds = 1.5;
  const std::string first = epoch_log_line(r);
  EXPECT_NE(first.find("\"train_loss\":null"), std::string::npos) << first;
  r.epoch = 3;
  r.train_loss = 0.5;
  const std::string later = epoch_log_line(r);
  EXPECT_NE(later.find("\"epoch\":3"), std::string::npos) << later;
  EXPECT_NE(later.find("\"val_loss\":0.25"), std::string::npos) << later;
}

// ---------------------------------------------------------------------------
// checkpoint

Checkpoint sample_checkpoint() {
  Model m(micro());
  std::mt19937_64 rng(10);
  for (auto& p : m.params()) p.value = random_tensor(p.value.shape(), rng, -1e3, 1e3);
  WindowOptions w;
  w.n_past = 6;
  w.n_future = 3;
  w.seed = 77;
  return make_checkpoint(m, ScalerSpec::defaults(), w, SplitFractions{}, 77, {{"best_epoch", "4"}});
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  test::TempDir dir("ckpt");
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(c, dir / "a.hvf");
  save_checkpoint(load_checkpoint(dir / "a.hvf"), dir / "b.hvf");
  EXPECT_EQ(test::slurp(dir / "a.hvf"), test::slurp(dir / "b.hvf"));
  EXPECT_FALSE(std::filesystem::exists(dir / "a.hvf.tmp"));
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const Checkpoint c = sample_checkpoint();
  const Checkpoint r = deserialize_checkpoint(serialize_checkpoint(c));
  EXPECT_EQ(r.config, c.config);
  ASSERT_EQ(r.tensors.size(), c.tensors.size());
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    EXPECT_EQ(r.tensors[i].first, c.tensors[i].first);
    EXPECT_EQ(r.tensors[i].second, c.tensors[i].second);
  }
  EXPECT_EQ(r.scaler, c.scaler);
  EXPECT_EQ(r.window.seed, 77u);
  EXPECT_EQ(r.metadata.at("best_epoch"), "4");
}

TEST(Checkpoint, StartsWithMagic) {
  const auto bytes = serialize_checkpoint(sample_checkpoint());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HVF1");
}

TEST(Checkpoint, CorruptionRejected) {
  const auto good = serialize_checkpoint(sample_checkpoint());
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_THROW(deserialize_checkpoint(truncated), ParseError);
  auto short_header = good;
  short_header.resize(30);
  EXPECT_THROW(deserialize_checkpoint(short_header), ParseError);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic), ParseError);
  auto version = good;
  version[4] = 9;
  try {
    deserialize_checkpoint(version);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(trailing), ParseError);
}

TEST(Checkpoint, MissingFileIsParseError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.hvf"), ParseError);
}

TEST(Checkpoint, MismatchedTensorRejected) {
  Checkpoint c = sample_checkpoint();
  c.tensors.back().second = Tensor({1});
  EXPECT_THROW(restore_model(c), ParseError);
  c = sample_checkpoint();
  c.tensors.pop_back();
  EXPECT_THROW(restore_model(c), ParseError);
}

}  // namespace
}  // namespace hvf
