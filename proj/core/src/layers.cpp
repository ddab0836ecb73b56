#include "hvf/layers.hpp"

#include <cmath>
#include <memory>

#include "hvf/errors.hpp"

namespace hvf {
namespace {

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void require_cols(const Tensor& t, std::size_t cols, const char* where) {
  if (t.rank() != 2 || t.dim(1) != cols) {
    throw DimensionError(std::string(where) + ": expected [T x " + std::to_string(cols) + "], got " +
                         shape_string(t.shape()));
  }
}

}  // namespace

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

DenseWeights make_dense(ParameterStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseWeights w;
  w.in = in;
  w.out = out;
  w.kernel = store.add(prefix + "/kernel", uniform_tensor({in, out}, bound, rng));
  w.bias = store.add(prefix + "/bias", Tensor(Shape{out}));
  return w;
}

LstmWeights make_lstm(ParameterStore& store, const std::string& prefix, std::size_t in,
                      std::size_t units, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(units));
  LstmWeights w;
  w.in = in;
  w.units = units;
  w.input_kernel = store.add(prefix + "/input_kernel", uniform_tensor({in, 4 * units}, bound, rng));
  w.recurrent_kernel =
      store.add(prefix + "/recurrent_kernel", uniform_tensor({units, 4 * units}, bound, rng));
  Tensor bias(Shape{4 * units});
  for (std::size_t j = units; j < 2 * units; ++j) bias[j] = 1.0;
  w.bias = store.add(prefix + "/bias", std::move(bias));
  return w;
}

BiLstmWeights make_bilstm(ParameterStore& store, const std::string& prefix, std::size_t in,
                          std::size_t units, Rng& rng) {
  BiLstmWeights w;
  w.forward = make_lstm(store, prefix + "/fw", in, units, rng);
  w.backward = make_lstm(store, prefix + "/bw", in, units, rng);
  return w;
}

MhaWeights make_mha(ParameterStore& store, const std::string& prefix, std::size_t d_model,
                    std::size_t heads, Rng& rng) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  MhaWeights w;
  w.d_model = d_model;
  w.heads = heads;
  w.query = make_dense(store, prefix + "/query", d_model, d_model, rng);
  w.key = make_dense(store, prefix + "/key", d_model, d_model, rng);
  w.value = make_dense(store, prefix + "/value", d_model, d_model, rng);
  w.output = make_dense(store, prefix + "/output", d_model, d_model, rng);
  return w;
}

GluWeights make_glu(ParameterStore& store, const std::string& prefix, std::size_t in,
                    std::size_t out, Rng& rng) {
  return GluWeights{make_dense(store, prefix + "/value", in, out, rng),
                    make_dense(store, prefix + "/gate", in, out, rng)};
}

LayerNormWeights make_layer_norm(ParameterStore& store, const std::string& prefix, std::size_t dim,
                                 double eps) {
  LayerNormWeights w;
  w.dim = dim;
  w.eps = eps;
  w.gain = store.add(prefix + "/gain", Tensor(Shape{dim}, 1.0));
  w.bias = store.add(prefix + "/bias", Tensor(Shape{dim}));
  return w;
}

GrnWeights make_grn(ParameterStore& store, const std::string& prefix, std::size_t dim, Rng& rng) {
  GrnWeights w;
  w.hidden = make_dense(store, prefix + "/hidden", dim, dim, rng);
  w.project = make_dense(store, prefix + "/project", dim, dim, rng);
  w.gate = make_glu(store, prefix + "/glu", dim, dim, rng);
  w.norm = make_layer_norm(store, prefix + "/norm", dim);
  return w;
}

Var dense_forward(Graph& g, Var x, const DenseWeights& w) {
  require_cols(x.value(), w.in, "dense");
  return ops::add_row_bias(ops::matmul(x, g.param(w.kernel)), g.param(w.bias));
}

// ---------------------------------------------------------------------------
// LSTM

LstmState lstm_zero_state(Graph& g, std::size_t units) {
  return LstmState{g.constant(Tensor(Shape{1, units})), g.constant(Tensor(Shape{1, units}))};
}

LstmState lstm_cell_step(Graph& g, Var x, const LstmState& state, const LstmWeights& w) {
  const Tensor& X = x.value();
  if (X.rank() != 2 || X.dim(0) != 1 || X.dim(1) != w.in) {
    throw DimensionError("lstm_cell_step: input " + shape_string(X.shape()) + " does not match [1 x " +
                         std::to_string(w.in) + "]");
  }
  const Shape unit_shape{1, w.units};
  if (state.h.shape() != unit_shape || state.c.shape() != unit_shape) {
    throw DimensionError("lstm_cell_step: state extents " + shape_string(state.h.shape()) + "/" +
                         shape_string(state.c.shape()) + " do not match units " +
                         std::to_string(w.units));
  }
  const std::size_t u = w.units;
  Var z = ops::add_row_bias(
      ops::add(ops::matmul(x, g.param(w.input_kernel)), ops::matmul(state.h, g.param(w.recurrent_kernel))),
      g.param(w.bias));
  Var i = ops::sigmoid(ops::slice_cols(z, 0, u));
  Var f = ops::sigmoid(ops::slice_cols(z, u, 2 * u));
  Var cand = ops::tanh(ops::slice_cols(z, 2 * u, 3 * u));
  Var o = ops::sigmoid(ops::slice_cols(z, 3 * u, 4 * u));
  Var c = ops::add(ops::mul(f, state.c), ops::mul(i, cand));
  Var h = ops::mul(o, ops::tanh(c));
  return LstmState{h, c};
}

namespace {

struct LstmTape {
  std::size_t steps = 0, in = 0, units = 0;
  bool reverse = false;
  std::vector<double> gates;  // [T × 4u] post-activation, indexed by input time
  std::vector<double> cells;  // [T × u]
  std::vector<double> tanh_cells;
};

}  // namespace

Var lstm_sequence(Graph& g, Var seq, const LstmWeights& w, bool reverse) {
  // Parameter leaves first: creating nodes may move earlier node values.
  Var wi = g.param(w.input_kernel);
  Var wr = g.param(w.recurrent_kernel);
  Var wb = g.param(w.bias);
  const Tensor& X = seq.value();
  if (X.rank() != 2 || X.dim(0) == 0) throw ContractViolation("lstm_sequence: empty sequence");
  require_cols(X, w.in, "lstm_sequence");
  const Tensor& W = wi.value();
  const Tensor& U = wr.value();
  const Tensor& B = wb.value();

  const std::size_t T = X.dim(0), in = w.in, u = w.units, G4 = 4 * u;
  auto tape = std::make_shared<LstmTape>();
  tape->steps = T;
  tape->in = in;
  tape->units = u;
  tape->reverse = reverse;
  tape->gates.assign(T * G4, 0.0);
  tape->cells.assign(T * u, 0.0);
  tape->tanh_cells.assign(T * u, 0.0);

  // Pre-activations from the input path for every step at once.
  std::vector<double> z(T * G4);
  kernels::gemm(X.data(), W.data(), z.data(), T, in, G4, false);
  Tensor H(Shape{T, u});
  std::vector<double> h_prev(u, 0.0), c_prev(u, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    double* zt = z.data() + t * G4;
    for (std::size_t j = 0; j < G4; ++j) zt[j] += B[j];
    kernels::gemm(h_prev.data(), U.data(), zt, 1, u, G4, true);
    double* gt = tape->gates.data() + t * G4;
    double* ct = tape->cells.data() + t * u;
    double* tct = tape->tanh_cells.data() + t * u;
    for (std::size_t j = 0; j < u; ++j) {
      const double ig = sigmoid(zt[j]);
      const double fg = sigmoid(zt[u + j]);
      const double cg = std::tanh(zt[2 * u + j]);
      const double og = sigmoid(zt[3 * u + j]);
      gt[j] = ig;
      gt[u + j] = fg;
      gt[2 * u + j] = cg;
      gt[3 * u + j] = og;
      ct[j] = fg * c_prev[j] + ig * cg;
      tct[j] = std::tanh(ct[j]);
      H[t * u + j] = og * tct[j];
    }
    std::copy_n(H.data() + t * u, u, h_prev.data());
    std::copy_n(ct, u, c_prev.data());
  }

  return g.record("lstm_sequence", {seq, wi, wr, wb}, std::move(H), [tape](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0), iw = g.parent(self, 1), iu = g.parent(self, 2),
                      ib = g.parent(self, 3);
    const std::size_t T = tape->steps, in = tape->in, u = tape->units, G4 = 4 * u;
    const Tensor& dH = g.grad_buffer(self);
    const Tensor& Hv = g.value(self);
    const Tensor& U = g.value(iu);
    std::vector<double> dz(T * G4, 0.0);
    std::vector<double> dh_next(u, 0.0), dc_next(u, 0.0);
    for (std::size_t s = T; s-- > 0;) {
      const std::size_t t = tape->reverse ? T - 1 - s : s;
      const bool has_prev = s > 0;
      const std::size_t tp = tape->reverse ? t + 1 : t - 1;  // valid only if has_prev
      const double* gt = tape->gates.data() + t * G4;
      const double* tct = tape->tanh_cells.data() + t * u;
      double* dzt = dz.data() + t * G4;
      for (std::size_t j = 0; j < u; ++j) {
        const double ig = gt[j], fg = gt[u + j], cg = gt[2 * u + j], og = gt[3 * u + j];
        const double dh = dH[t * u + j] + dh_next[j];
        const double c_prev = has_prev ? tape->cells[tp * u + j] : 0.0;
        const double dc = dh * og * (1.0 - tct[j] * tct[j]) + dc_next[j];
        dzt[j] = dc * cg * ig * (1.0 - ig);
        dzt[u + j] = dc * c_prev * fg * (1.0 - fg);
        dzt[2 * u + j] = dc * ig * (1.0 - cg * cg);
        dzt[3 * u + j] = dh * tct[j] * og * (1.0 - og);
        dc_next[j] = dc * fg;
      }
      // dh_prev = dz · Uᵀ ; dU += h_prevᵀ · dz
      kernels::gemm_nt(dzt, U.data(), dh_next.data(), 1, G4, u, false);
      if (has_prev && g.needs_grad(iu)) {
        kernels::gemm_tn(Hv.data() + tp * u, dzt, g.grad_buffer(iu).data(), 1, u, G4, true);
      }
    }
    const Tensor& X = g.value(ix);
    if (g.needs_grad(iw)) kernels::gemm_tn(X.data(), dz.data(), g.grad_buffer(iw).data(), T, in, G4, true);
    if (g.needs_grad(ib)) {
      Tensor& db = g.grad_buffer(ib);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < G4; ++j) db[j] += dz[t * G4 + j];
    }
    if (g.needs_grad(ix)) {
      kernels::gemm_nt(dz.data(), g.value(iw).data(), g.grad_buffer(ix).data(), T, G4, in, true);
    }
  });
}

Var bilstm_forward(Graph& g, Var seq, const BiLstmWeights& w) {
  if (seq.value().rank() != 2 || seq.value().dim(0) == 0) {
    throw ContractViolation("bilstm_forward: empty sequence");
  }
  Var fw = lstm_sequence(g, seq, w.forward, false);
  Var bw = lstm_sequence(g, seq, w.backward, true);
  return ops::concat_cols({fw, bw});
}

// ---------------------------------------------------------------------------
// attention

MhaResult mha_forward(Graph& g, Var q_seq, Var kv_seq, const MhaWeights& w) {
  if (w.heads == 0 || w.d_model % w.heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(w.d_model) +
                      " is not divisible by heads " + std::to_string(w.heads));
  }
  require_cols(q_seq.value(), w.d_model, "mha query");
  require_cols(kv_seq.value(), w.d_model, "mha key/value");
  const std::size_t dh = w.d_model / w.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = dense_forward(g, q_seq, w.query);
  Var k = dense_forward(g, kv_seq, w.key);
  Var v = dense_forward(g, kv_seq, w.value);

  MhaResult result;
  std::vector<Var> heads;
  heads.reserve(w.heads);
  for (std::size_t h = 0; h < w.heads; ++h) {
    Var qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
    Var weights = ops::softmax_last_axis(ops::scale(ops::matmul_nt(qh, kh), inv_sqrt));
    result.attention.push_back(weights.value());
    heads.push_back(ops::matmul(weights, vh));
  }
  Var merged = w.heads == 1 ? heads.front() : ops::concat_cols(heads);
  result.output = dense_forward(g, merged, w.output);
  return result;
}

// ---------------------------------------------------------------------------
// gating, normalisation

Var glu_pair(Graph&, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("glu: value " + shape_string(a.shape()) + " and gate " +
                         shape_string(b.shape()) + " differ");
  }
  return ops::mul(a, ops::sigmoid(b));
}

Var glu_forward(Graph& g, Var x, const GluWeights& w) {
  if (w.value.in != w.gate.in || w.value.out != w.gate.out) {
    throw DimensionError("glu: value and gate projections have different extents");
  }
  return glu_pair(g, dense_forward(g, x, w.value), dense_forward(g, x, w.gate));
}

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  const std::size_t d = X.cols(), rows = X.rows();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: gain/bias extent does not match " + shape_string(X.shape()));
  }
  if (!(eps > 0)) throw ConfigError("layer_norm: eps must be positive");
  const Tensor& Gm = gain.value();
  const Tensor& Bt = bias.value();
  Tensor out(X.shape());
  auto xhat = std::make_shared<std::vector<double>>(X.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (xr[c] - mu) * is;
      (*xhat)[r * d + c] = xh;
      out[r * d + c] = Gm[c] * xh + Bt[c];
    }
  }
  return g.record("layer_norm", {x, gain, bias}, std::move(out),
                  [xhat, inv_std, d, rows](Graph& g, std::size_t self) {
                    const std::size_t ix = g.parent(self, 0), ig = g.parent(self, 1),
                                      ib = g.parent(self, 2);
                    const Tensor& dY = g.grad_buffer(self);
                    const Tensor& Gm = g.value(ig);
                    if (g.needs_grad(ig)) {
                      Tensor& dg = g.grad_buffer(ig);
                      for (std::size_t i = 0; i < dY.size(); ++i) dg[i % d] += dY[i] * (*xhat)[i];
                    }
                    if (g.needs_grad(ib)) {
                      Tensor& db = g.grad_buffer(ib);
                      for (std::size_t i = 0; i < dY.size(); ++i) db[i % d] += dY[i];
                    }
                    if (g.needs_grad(ix)) {
                      Tensor& dx = g.grad_buffer(ix);
                      std::vector<double> dxh(d);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t c = 0; c < d; ++c) {
                          dxh[c] = dY[r * d + c] * Gm[c];
                          m1 += dxh[c];
                          m2 += dxh[c] * (*xhat)[r * d + c];
                        }
                        m1 /= static_cast<double>(d);
                        m2 /= static_cast<double>(d);
                        for (std::size_t c = 0; c < d; ++c) {
                          dx[r * d + c] += (*inv_std)[r] * (dxh[c] - m1 - (*xhat)[r * d + c] * m2);
                        }
                      }
                    }
                  });
}

Var layer_norm_forward(Graph& g, Var x, const LayerNormWeights& w) {
  if (x.value().cols() != w.dim) {
    throw DimensionError("layer_norm: input " + shape_string(x.shape()) + " does not match dim " +
                         std::to_string(w.dim));
  }
  return layer_norm(g, x, g.param(w.gain), g.param(w.bias), w.eps);
}

Var grn_forward(Graph& g, Var x, Var residual, const GrnWeights& w) {
  if (x.shape() != residual.shape()) {
    throw DimensionError("grn: input " + shape_string(x.shape()) + " and residual " +
                         shape_string(residual.shape()) + " differ");
  }
  Var hidden = ops::elu(dense_forward(g, x, w.hidden));
  Var projected = dense_forward(g, hidden, w.project);
  Var gated = glu_forward(g, projected, w.gate);
  return layer_norm_forward(g, ops::add(residual, gated), w.norm);
}

Var dropout_apply(Graph& g, Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  Tensor m(x.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  for (auto& v : m.values()) v = keep(rng) ? s : 0.0;
  (void)g;
  return ops::mask(x, m);
}

}  // namespace hvf
