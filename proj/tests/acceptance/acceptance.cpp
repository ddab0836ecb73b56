// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//
//   acceptance <work-dir> [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hvf/building_sim.hpp"
#include "hvf/checkpoint.hpp"
#include "hvf/errors.hpp"
#include "hvf/evaluation.hpp"
#include "hvf/gradient_check.hpp"
#include "hvf/layers.hpp"
#include "hvf/model.hpp"
#include "hvf/pipeline.hpp"
#include "hvf/random.hpp"
#include "hvf/training.hpp"

namespace fs = std::filesystem;
using namespace hvf;
using namespace hvf::ops;

namespace {

// Desk-scale training setup shared by criteria 4 and 5.
constexpr std::uint64_t kSeed = 42;
constexpr int kLearnDays = 60;
constexpr int kLearnEpochs = 30;
constexpr int kLearnStride = 1;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the command-line entry point in-process; throws on a non-zero exit.
std::string hvf_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) {
    std::string joined;
    for (const auto& a : args) joined += a + ' ';
    throw std::runtime_error("hvf " + joined + "exited " + std::to_string(code) + ": " + err.str());
  }
  return out.str();
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// ---------------------------------------------------------------------------
// 1. gradients

Verdict gradients() {
  const auto t0 = Clock::now();
  constexpr double kStep = 1e-5, kTol = 1e-4;
  const std::size_t T = 6, d = 8, u = 4;

  // Each case creates its parameters on first build, then reuses them.
  struct Built {
    ParameterStore store;
    std::function<Var(Graph&)> objective;
  };
  using Factory = std::function<Built(Rng&)>;
  std::vector<std::pair<std::string, Factory>> cases;

  auto add_case = [&](std::string name, Factory f) { cases.emplace_back(std::move(name), std::move(f)); };

  add_case("dense", [&](Rng& rng) {
    Built b;
    const DenseWeights w = make_dense(b.store, "dense", d, 5, rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({T, 5}, rng);
    b.objective = [=](Graph& g) { return sum(mul(dense_forward(g, g.param(x), w), g.constant(probe))); };
    return b;
  });
  add_case("lstm cell", [&](Rng& rng) {
    Built b;
    const LstmWeights w = make_lstm(b.store, "cell", d, u, rng);
    const ParamId x = b.store.add("input", random_tensor({1, d}, rng));
    const ParamId h = b.store.add("h0", random_tensor({1, u}, rng));
    const ParamId c = b.store.add("c0", random_tensor({1, u}, rng));
    const Tensor ph = random_tensor({1, u}, rng), pc = random_tensor({1, u}, rng);
    b.objective = [=](Graph& g) {
      const LstmState s = lstm_cell_step(g, g.param(x), LstmState{g.param(h), g.param(c)}, w);
      return add(sum(mul(s.h, g.constant(ph))), sum(mul(s.c, g.constant(pc))));
    };
    return b;
  });
  add_case("bilstm", [&](Rng& rng) {
    Built b;
    const BiLstmWeights w = make_bilstm(b.store, "bi", d, u, rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({T, 2 * u}, rng);
    b.objective = [=](Graph& g) { return sum(mul(bilstm_forward(g, g.param(x), w), g.constant(probe))); };
    return b;
  });
  add_case("self attention", [&](Rng& rng) {
    Built b;
    const MhaWeights w = make_mha(b.store, "mha", d, 2, rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({T, d}, rng);
    b.objective = [=](Graph& g) {
      return sum(mul(mha_forward(g, g.param(x), g.param(x), w).output, g.constant(probe)));
    };
    return b;
  });
  add_case("cross attention", [&](Rng& rng) {
    Built b;
    const MhaWeights w = make_mha(b.store, "mha", d, 2, rng);
    const ParamId q = b.store.add("query", random_tensor({3, d}, rng));
    const ParamId kv = b.store.add("memory", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({3, d}, rng);
    b.objective = [=](Graph& g) {
      return sum(mul(mha_forward(g, g.param(q), g.param(kv), w).output, g.constant(probe)));
    };
    return b;
  });
  add_case("glu", [&](Rng& rng) {
    Built b;
    const GluWeights w = make_glu(b.store, "glu", d, d, rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({T, d}, rng);
    b.objective = [=](Graph& g) { return sum(mul(glu_forward(g, g.param(x), w), g.constant(probe))); };
    return b;
  });
  add_case("layer norm", [&](Rng& rng) {
    Built b;
    const LayerNormWeights w = make_layer_norm(b.store, "ln", d);
    b.store[w.gain].value = random_tensor({d}, rng, 0.5, 1.5);
    b.store[w.bias].value = random_tensor({d}, rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({T, d}, rng);
    b.objective = [=](Graph& g) { return sum(mul(layer_norm_forward(g, g.param(x), w), g.constant(probe))); };
    return b;
  });
  add_case("grn", [&](Rng& rng) {
    Built b;
    const GrnWeights w = make_grn(b.store, "grn", d, rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const ParamId r = b.store.add("residual", random_tensor({T, d}, rng));
    const Tensor probe = random_tensor({T, d}, rng);
    b.objective = [=](Graph& g) {
      return sum(mul(grn_forward(g, g.param(x), g.param(r), w), g.constant(probe)));
    };
    return b;
  });
  add_case("quantile head", [&](Rng& rng) {
    Built b;
    const std::vector<double> levels = {0.05, 0.5, 0.95};
    const DenseWeights w = make_dense(b.store, "head", d, 5 * levels.size(), rng);
    const ParamId x = b.store.add("input", random_tensor({T, d}, rng));
    const Tensor y = random_tensor({T, 5}, rng);
    b.objective = [=](Graph& g) { return quantile_loss(g, dense_forward(g, g.param(x), w), y, levels); };
    return b;
  });

  std::ostringstream detail;
  bool ok = true;
  double worst_all = 0;
  for (const auto& [name, factory] : cases) {
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng = derive_rng({seed, 0x9c});
      Built b = factory(rng);
      const auto r = gradient_check(b.objective, b.store, kStep, kTol);
      worst = std::max(worst, r.max_rel_err);
      ok = ok && r.pass;
    }
    worst_all = std::max(worst_all, worst);
    detail << name << ' ' << fmt("%.1e", worst) << "; ";
  }

  // Full tiny-profile network: every 61st coordinate of each parameter tensor.
  ModelConfig mc = ModelConfig::tiny();
  double model_worst = 0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    mc.seed = seed;
    Model m(mc);
    Rng rng = derive_rng({seed, 0x90de1});
    const Tensor p = random_tensor({mc.n_past, mc.past_features}, rng);
    const Tensor f = random_tensor({mc.n_future, mc.future_features}, rng);
    const Tensor y = random_tensor({mc.n_future, mc.zones}, rng);
    const auto r = gradient_check(
        [&](Graph& g) {
          Rng unused(0);
          return quantile_loss(g, m.forward(g, p, f, false, unused), y, mc.quantiles);
        },
        m.params(), kStep, kTol, 61);
    model_worst = std::max(model_worst, r.max_rel_err);
    coords += r.coordinates;
    ok = ok && r.pass;
  }
  worst_all = std::max(worst_all, model_worst);
  const double secs = seconds_since(t0);
  detail << "tiny model " << fmt("%.1e", model_worst) << " over " << coords << " coordinates; max "
         << fmt("%.1e", worst_all) << " in " << fmt("%.0f", secs) << " s";
  return {ok && worst_all < kTol && secs < 120.0, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. shapes

Verdict shapes() {
  const auto t0 = Clock::now();
  std::ostringstream detail;
  bool ok = true;
  for (const bool tiny : {false, true}) {
    const ModelConfig c = tiny ? ModelConfig::tiny() : ModelConfig{};
    const Model m(c);
    Rng rng(1);
    const Tensor p = random_tensor({c.n_past, c.past_features}, rng);
    const Tensor f = random_tensor({c.n_future, c.future_features}, rng);
    ForwardTrace trace;
    const Tensor out = m.infer(p, f, &trace);
    const Shape want{c.n_future, c.zones, c.quantiles.size()};
    const bool good = out.shape() == want && out.all_finite() && !trace.cross_attention.empty() &&
                      trace.cross_attention[0].shape() == Shape{c.n_future, c.n_past};
    ok = ok && good;
    if (!tiny) ok = ok && c.n_past == 672 && c.n_future == 96 && c.zones == 5;
    detail << (tiny ? "tiny " : "full ") << c.n_past << "x" << c.past_features << " + " << c.n_future << "x"
           << c.future_features << " -> " << out.shape()[0] << "x" << out.shape()[1] << "x" << out.shape()[2]
           << "; ";
  }
  const double secs = seconds_since(t0);
  detail << fmt("%.1f", secs) << " s";
  return {ok && secs < 60.0, detail.str()};
}

// ---------------------------------------------------------------------------
// 3. loss identities

Verdict losses() {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5), lam(0, 1), lvl(0.01, 0.99);
  double worst_identity = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> y(17), p(17);
    for (auto& v : y) v = u(rng);
    for (auto& v : p) v = u(rng);
    double mae = 0;
    for (std::size_t i = 0; i < y.size(); ++i) mae += std::abs(y[i] - p[i]) / double(y.size());
    worst_identity = std::max(worst_identity, std::abs(pinball_loss(y, p, 0.5) - 0.5 * mae));
  }
  std::size_t violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const double y = u(rng), a = u(rng), b = u(rng), l = lam(rng), q = lvl(rng);
    const std::vector<double> yy{y}, pa{a}, pb{b}, pm{l * a + (1 - l) * b};
    const double lhs = pinball_loss(yy, pm, q);
    const double rhs = l * pinball_loss(yy, pa, q) + (1 - l) * pinball_loss(yy, pb, q);
    if (lhs > rhs + 1e-12) ++violations;
  }
  return {worst_identity <= 1e-12 && violations == 0,
          "max |pinball(0.5) - MAE/2| " + fmt("%.1e", worst_identity) + "; convexity violations " +
              std::to_string(violations) + "/1000"};
}

// ---------------------------------------------------------------------------
// 4 and 5. desk-scale learning and interval sanity (one training run)

struct LearnRun {
  bool ran = false;
  std::string error;
  double initial_val = 0, best_val = 0, reduction = 0, test_cvrmse = 0, seconds = 0;
  std::size_t epochs = 0;
  nlohmann::json summary;
};

LearnRun learn(const fs::path& dir) {
  LearnRun r;
  const auto t0 = Clock::now();
  try {
    fs::create_directories(dir);
    const std::string ds = (dir / "dataset.csv").string(), ck = (dir / "model.hvf").string();
    const std::vector<std::string> common = {"--profile", "tiny", "--seed", std::to_string(kSeed)};
    auto with = [&](std::vector<std::string> a) {
      a.insert(a.end(), common.begin(), common.end());
      return hvf_cli(a);
    };
    with({"generate", "--simulator.days", std::to_string(kLearnDays), "--out", ds});
    with({"train", "--dataset", ds, "--out", ck, "--training.max_epochs", std::to_string(kLearnEpochs),
          "--pipeline.stride", std::to_string(kLearnStride)});
    with({"predict", "--checkpoint", ck, "--dataset", ds, "--out", (dir / "forecast.csv").string()});
    with({"evaluate", "--forecast", (dir / "forecast.csv").string(), "--out", (dir / "metrics").string()});

    std::istringstream log(slurp(ck + ".log.jsonl"));
    std::string line;
    while (std::getline(log, line)) {
      const auto j = nlohmann::json::parse(line);
      if (j["epoch"] == 0) r.initial_val = j["val_loss"];
      ++r.epochs;
    }
    r.epochs -= 1;  // epoch 0 is the untrained evaluation
    const Checkpoint c = load_checkpoint(ck);
    r.best_val = std::stod(c.metadata.at("best_val_loss"));
    r.reduction = 1.0 - r.best_val / r.initial_val;
    r.summary = nlohmann::json::parse(slurp(dir / "metrics" / "summary.json"));
    r.test_cvrmse = r.summary["cvrmse_overall_pct"];
    r.ran = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

Verdict learning(const LearnRun& r) {
  if (!r.ran) return {false, "run failed: " + r.error};
  const bool ok = r.reduction >= 0.40 && r.test_cvrmse < 5.0 && r.epochs <= 30 && r.seconds < 15 * 60;
  return {ok, "val loss " + fmt("%.4f", r.initial_val) + " -> " + fmt("%.4f", r.best_val) + " (" +
                  fmt("%.1f", 100 * r.reduction) + "% lower) in " + std::to_string(r.epochs) +
                  " epochs; test CVRMSE " + fmt("%.2f", r.test_cvrmse) + "%; " + fmt("%.0f", r.seconds) + " s"};
}

Verdict intervals(const LearnRun& r) {
  if (!r.ran) return {false, "run failed: " + r.error};
  double cov90 = -1;
  std::ostringstream detail;
  for (const auto& e : r.summary["coverage"]) {
    const double n = e["level"];
    if (std::abs(n - 0.90) < 1e-9) cov90 = e["coverage"];
    detail << fmt("%.0f", 100 * n) << "% -> " << fmt("%.3f", e["coverage"].get<double>()) << "; ";
  }
  const double crossing = r.summary["crossing_freq"];
  detail << "quantile crossing frequency " << fmt("%.3f", crossing);
  return {cov90 >= 0.75 && cov90 <= 0.99, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. horizon curve

Verdict horizon(const fs::path& dir, const fs::path& learn_dir) {
  fs::create_directories(dir);
  // Tiny widths with the full 96-step horizon, trained briefly on the criterion-4 dataset.
  const std::string ds = (learn_dir / "dataset.csv").string(), ck = (dir / "model96.hvf").string();
  const std::vector<std::string> common = {"--profile", "tiny", "--seed", std::to_string(kSeed),
                                           "--model.n_past", "96", "--model.n_future", "96"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return hvf_cli(a);
  };
  with({"train", "--dataset", ds, "--out", ck, "--training.max_epochs", "3", "--pipeline.stride", "4"});
  with({"predict", "--checkpoint", ck, "--dataset", ds, "--pipeline.stride", "8", "--out",
        (dir / "forecast.csv").string()});
  with({"evaluate", "--forecast", (dir / "forecast.csv").string(), "--out", (dir / "metrics").string()});

  const auto rows = import_horizon_metrics(dir / "metrics" / "horizon_cvrmse.csv", ExportFormat::Csv);
  std::map<std::string, std::set<std::size_t>> steps;
  std::map<std::string, std::size_t> counts;
  bool finite = true;
  for (const auto& r : rows) {
    steps[r.zone].insert(r.step);
    ++counts[r.zone];
    finite = finite && std::isfinite(r.cvrmse_pct) && r.cvrmse_pct >= 0;
  }
  bool ok = finite && counts.size() == 6;
  for (const auto& [zone, n] : counts) {
    ok = ok && n == 96 && steps[zone].size() == 96 && *steps[zone].begin() == 1 && *steps[zone].rbegin() == 96;
  }
  const auto s = nlohmann::json::parse(slurp(dir / "metrics" / "summary.json"));
  std::string plateau = "plateau not reported";
  const auto& po = s["plateau_observation"];
  if (po.value("available", false)) {
    plateau = std::string("plateau after step 24: ") + (po["plateau_after_24"].get<bool>() ? "yes" : "no") +
              " (max relative change " + fmt("%.2f", po["max_relative_change_after_24"].get<double>()) +
              ")";
  }
  return {ok, std::to_string(rows.size()) + " rows, 96 per zone for zones 1-5 and mean; " + plateau};
}

// ---------------------------------------------------------------------------
// 7. simulator physics

Verdict physics() {
  using namespace hvf::sim;
  const BuildingSpec spec = default_building();
  Rng rng(7);
  std::uniform_real_distribution<double> tin(15, 30), gap(0.5, 20), wind(0, 10), neigh(15, 28), gain(0, 3000);
  int sharper = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ZoneDrivers d;
    const double t = tin(rng);
    d.t_out = t - gap(rng);
    d.wind = wind(rng);
    d.solar_gain_w = gain(rng);
    d.internal_gain_w = gain(rng);
    for (double& n : d.neighbor_t) n = neigh(rng);
    ZoneDrivers open = d;
    open.window_open = true;
    const std::size_t z = trial % kWindows;
    if (zone_derivative(spec, z, t, open) < zone_derivative(spec, z, t, d)) ++sharper;
  }
  const double q = ventilation_flow(1.0, 2.0, 22.0, 10.0, 0.3, 0.6, 0.8);

  const Calendar cal(*parse_date("2021-02-01"), 30);
  auto w = derive_rng({13, 1}), s = derive_rng({13, 2}), p = derive_rng({13, 3}), o = derive_rng({13, 4});
  const auto weather = synth_weather(w, cal);
  const auto sched = generate_schedules(s, cal, spec);
  const auto sp = generate_mprs_setpoints(p, cal);
  const auto win = generate_prbs_windows(o, cal, 0.05);
  SimulationOptions fine;
  fine.inner_step_s = 30;
  const auto a = simulate(spec, cal, weather, sched, sp, win);
  const auto b = simulate(spec, cal, weather, sched, sp, win, fine);
  double worst = 0;
  for (const auto& n : target_names()) {
    const auto &x = a.column(n), &y = b.column(n);
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
  }
  const bool ok = sharper == 100 && std::abs(q - 0.768) < 1e-3 && worst < 0.05;
  return {ok, "(a) window-open dT/dt lower in " + std::to_string(sharper) + "/100 states; (b) Q = " +
                  fmt("%.4f", q) + " m3/s; (c) max |dT_in| 60 s vs 30 s inner step " + fmt("%.4f", worst) +
                  " C over 30 days"};
}

// ---------------------------------------------------------------------------
// 8. excitation signals

Verdict excitation() {
  using namespace hvf::sim;
  const Calendar cal(*parse_date("2021-01-01"), 365);
  Rng rp = derive_rng({8, 1});
  const SetpointSeries sp = generate_mprs_setpoints(rp, cal);
  std::size_t bad_level = 0, bad_setback = 0, bad_offset = 0;
  for (std::size_t z = 0; z < kZones; ++z) {
    for (std::size_t k = 0; k < cal.steps(); ++k) {
      const double h = sp.heating[z][k], c = sp.cooling[z][k];
      if (cal.is_occupied(k)) {
        if (h < 18.0 || h > 22.0 || h * 2 != std::round(h * 2)) ++bad_level;
        if (c - h != 5.0) ++bad_offset;
      } else if (h != 15.0 || c != 30.0) {
        ++bad_setback;
      }
    }
  }
  const Calendar long_cal(*parse_date("2021-01-01"), 1042);
  Rng rw = derive_rng({8, 2});
  const WindowSignals w = generate_prbs_windows(rw, long_cal, 0.05);
  std::size_t short_events = 0;
  double worst_rate_gap = 0;
  for (std::size_t i = 0; i < kWindows; ++i) {
    for (std::size_t e : w.events[i]) {
      if (e + 1 < long_cal.steps() && !(w.open[i][e] && w.open[i][e + 1])) ++short_events;
    }
    const double rate = double(w.events[i].size()) / double(w.eligible_steps[i]);
    worst_rate_gap = std::max(worst_rate_gap, std::abs(rate - 0.05));
  }
  const bool ok = bad_level == 0 && bad_setback == 0 && bad_offset == 0 && short_events == 0 && worst_rate_gap <= 0.005;
  return {ok, "mPRS off-grid " + std::to_string(bad_level) + ", setback errors " + std::to_string(bad_setback) +
                  ", cooling offset errors " + std::to_string(bad_offset) + "; PRBS events shorter than 2 steps " +
                  std::to_string(short_events) + ", max |rate - 0.05| " + fmt("%.4f", worst_rate_gap) +
                  " over ~1e5 steps"};
}

// ---------------------------------------------------------------------------
// 9. pipeline exactness

Verdict pipeline_exactness() {
  const ScalerSpec s = ScalerSpec::defaults();
  std::size_t endpoint_errors = 0;
  for (const auto& r : s.features()) {
    if (s.scale(r.name, r.min) != -1.0 || s.scale(r.name, r.max) != 1.0) ++endpoint_errors;
  }
  Rng rng(9);
  double worst_round = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& r = s.features()[rng() % s.features().size()];
    const double v = std::uniform_real_distribution<double>(r.min, r.max)(rng);
    worst_round = std::max(worst_round, std::abs(s.inverse_scale(r.name, s.scale(r.name, v)) - v));
  }
  double worst_circle = 0;
  const Timestamp start = *parse_date("2021-01-01");
  for (std::size_t k = 0; k < 35040; ++k) {
    const auto f = encode_time_features(start + std::chrono::seconds(k * kStepSeconds), {});
    for (double e : {f.hour_sin * f.hour_sin + f.hour_cos * f.hour_cos, f.dow_sin * f.dow_sin + f.dow_cos * f.dow_cos,
                     f.month_sin * f.month_sin + f.month_cos * f.month_cos}) {
      worst_circle = std::max(worst_circle, std::abs(e - 1.0));
    }
  }

  const Calendar cal(start, 365);
  const sim::BuildingSpec spec = sim::default_building();
  auto w = derive_rng({9, 1}), sc = derive_rng({9, 2}), p = derive_rng({9, 3}), o = derive_rng({9, 4});
  const SimulatedDataset ds = sim::simulate(spec, cal, sim::synth_weather(w, cal), sim::generate_schedules(sc, cal, spec),
                                            sim::generate_mprs_setpoints(p, cal), sim::generate_prbs_windows(o, cal, 0.05));
  auto table = std::make_shared<const FeatureTable>(ds, s);
  const DatasetSplits splits = split_chronological(table, WindowOptions{});
  std::size_t crossing = 0;
  for (const WindowedSet* set : {&splits.train, &splits.validation, &splits.test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      const std::size_t a = set->start_row(i), b = a + 768;
      for (std::size_t boundary : {splits.train_end, splits.validation_end}) {
        if (a < boundary && b > boundary) ++crossing;
      }
    }
  }
  const bool split_ok = splits.train_end == 21024 && splits.validation_end == 28032 && crossing == 0;

  std::size_t count_errors = 0;
  std::ostringstream counts;
  for (std::size_t n : {768u, 770u, 1000u, 4321u, 35040u}) {
    const std::size_t formula = (n - 672 - 96) / 1 + 1;
    const auto sub = std::make_shared<const FeatureTable>(ds.slice(0, n), s);
    const WindowedSet windows = build_windows(sub, WindowOptions{});
    if (windows.size() != formula || window_count(n, 672, 96, 1) != formula) ++count_errors;
    counts << n << "->" << windows.size() << ' ';
  }
  const bool ok = endpoint_errors == 0 && worst_round <= 1e-12 && worst_circle <= 1e-12 && split_ok && count_errors == 0;
  return {ok, "endpoint errors " + std::to_string(endpoint_errors) + ", round trip " + fmt("%.1e", worst_round) +
                  ", |sin2+cos2-1| " + fmt("%.1e", worst_circle) + "; split at " + std::to_string(splits.train_end) +
                  "/" + std::to_string(splits.validation_end) + " with " + std::to_string(crossing) +
                  " cross-boundary windows; counts " + counts.str()};
}

// ---------------------------------------------------------------------------
// 10. end-to-end determinism

Verdict determinism(const fs::path& dir) {
  std::vector<std::map<std::string, std::string>> files(2);
  for (int run = 0; run < 2; ++run) {
    const fs::path d = dir / ("run" + std::to_string(run));
    fs::create_directories(d);
    const std::vector<std::string> common = {"--profile", "tiny", "--seed", "77"};
    auto with = [&](std::vector<std::string> a) {
      a.insert(a.end(), common.begin(), common.end());
      return hvf_cli(a);
    };
    const std::string ds = (d / "data.csv").string(), ck = (d / "m.hvf").string(), fc = (d / "f.csv").string();
    with({"generate", "--simulator.days", "20", "--out", ds});
    with({"train", "--dataset", ds, "--out", ck, "--training.max_epochs", "3", "--pipeline.stride", "4"});
    with({"predict", "--checkpoint", ck, "--dataset", ds, "--out", fc});
    with({"evaluate", "--forecast", fc, "--out", (d / "metrics").string()});
    for (const auto& e : fs::directory_iterator(d / "metrics")) files[run][e.path().filename().string()] = slurp(e.path());
    files[run]["dataset"] = slurp(ds);
    files[run]["forecast"] = slurp(fc);
  }
  std::size_t differing = 0;
  for (const auto& [name, body] : files[0]) {
    const auto it = files[1].find(name);
    if (it == files[1].end() || it->second != body) ++differing;
  }
  const bool ok = differing == 0 && files[0].size() == files[1].size() && files[0].size() >= 5;
  return {ok, std::to_string(files[0].size()) + " artifacts compared (dataset, forecast, 3 metrics files); " +
                  std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "hvf_acceptance";
  std::set<int> only;
  for (int i = 2; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--only") {
      std::stringstream ss(argv[i + 1]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    }
  }
  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);

  const std::vector<std::string> names = {
      "gradient correctness",  "shape fidelity",     "loss identities",    "desk-scale learning",
      "interval sanity",       "horizon curve",      "simulator physics",  "excitation signals",
      "pipeline exactness",    "end-to-end determinism"};

  LearnRun learned;
  const bool need_learning = only.empty() || only.count(4) || only.count(5) || only.count(6);
  if (need_learning) learned = learn(work / "learning");

  std::vector<std::function<Verdict()>> checks = {
      gradients,
      shapes,
      losses,
      [&] { return learning(learned); },
      [&] { return intervals(learned); },
      [&] { return horizon(work / "horizon", work / "learning"); },
      physics,
      excitation,
      pipeline_exactness,
      [&] { return determinism(work / "determinism"); },
  };

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = checks[i]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << names[i] << "): " << v.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion/criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
