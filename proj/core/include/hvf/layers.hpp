#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hvf/autodiff.hpp"

namespace hvf {

using Rng = std::mt19937_64;

/// Uniform samples in [-bound, bound].
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

// Weight bundles hold ids into a ParameterStore, so copying a model (store +
// bundles) keeps them valid.

struct DenseWeights {
  ParamId kernel = 0;  // [in × out]
  ParamId bias = 0;    // [out]
  std::size_t in = 0, out = 0;
};

/// Gates are laid out [input | forget | candidate | output] along the 4·units axis.
struct LstmWeights {
  ParamId input_kernel = 0;      // [in × 4u]
  ParamId recurrent_kernel = 0;  // [u × 4u]
  ParamId bias = 0;              // [4u]
  std::size_t in = 0, units = 0;
};

struct BiLstmWeights {
  LstmWeights forward, backward;
};

struct MhaWeights {
  DenseWeights query, key, value, output;  // each [d × d]; heads are column blocks
  std::size_t d_model = 0, heads = 0;
};

struct GluWeights {
  DenseWeights value, gate;
};

struct LayerNormWeights {
  ParamId gain = 0, bias = 0;
  std::size_t dim = 0;
  double eps = 1e-8;
};

/// dense → elu → dense → GLU, added to a residual and layer-normalised.
struct GrnWeights {
  DenseWeights hidden, project;
  GluWeights gate;
  LayerNormWeights norm;
};

/// Row-vector state ([1 × units] each).
struct LstmState {
  Var h, c;
};

DenseWeights make_dense(ParameterStore& store, const std::string& prefix, std::size_t in,
                        std::size_t out, Rng& rng);
/// Forget-gate bias 1, other weights uniform in ±1/√units.
LstmWeights make_lstm(ParameterStore& store, const std::string& prefix, std::size_t in,
                      std::size_t units, Rng& rng);
BiLstmWeights make_bilstm(ParameterStore& store, const std::string& prefix, std::size_t in,
                          std::size_t units, Rng& rng);
/// Throws ConfigError unless d_model is divisible by heads.
MhaWeights make_mha(ParameterStore& store, const std::string& prefix, std::size_t d_model,
                    std::size_t heads, Rng& rng);
GluWeights make_glu(ParameterStore& store, const std::string& prefix, std::size_t in,
                    std::size_t out, Rng& rng);
LayerNormWeights make_layer_norm(ParameterStore& store, const std::string& prefix, std::size_t dim,
                                 double eps = 1e-8);
GrnWeights make_grn(ParameterStore& store, const std::string& prefix, std::size_t dim, Rng& rng);

Var dense_forward(Graph& g, Var x, const DenseWeights& w);

/// One LSTM step on a [1 × in] input, composed from primitive ops.
LstmState lstm_cell_step(Graph& g, Var x, const LstmState& state, const LstmWeights& w);
LstmState lstm_zero_state(Graph& g, std::size_t units);

/// Whole-sequence LSTM from a zero state as a single fused node. Output row t is
/// the hidden state after consuming x[t]; with `reverse` the sequence is
/// consumed from T−1 down to 0 and the outputs stay aligned to input time.
Var lstm_sequence(Graph& g, Var seq, const LstmWeights& w, bool reverse);

/// [T × in] → [T × 2·units]: forward outputs, then time-aligned backward outputs.
Var bilstm_forward(Graph& g, Var seq, const BiLstmWeights& w);

struct MhaResult {
  Var output;                      // [Tq × d]
  std::vector<Tensor> attention;   // per head, [Tq × Tk]
};

/// Scaled dot-product attention per head, heads concatenated and projected.
MhaResult mha_forward(Graph& g, Var q_seq, Var kv_seq, const MhaWeights& w);

/// value(x) ⊙ sigmoid(gate(x)).
Var glu_forward(Graph& g, Var x, const GluWeights& w);
/// a ⊙ sigmoid(b) for a pre-computed pair.
Var glu_pair(Graph& g, Var a, Var b);

Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps);
Var layer_norm_forward(Graph& g, Var x, const LayerNormWeights& w);

/// LayerNorm(residual + GLU(dense(elu(dense(x))))).
Var grn_forward(Graph& g, Var x, Var residual, const GrnWeights& w);
inline Var grn_forward(Graph& g, Var x, const GrnWeights& w) { return grn_forward(g, x, x, w); }

/// Inverted dropout; identity when !training or rate == 0. Throws ConfigError
/// for rate outside [0, 1).
Var dropout_apply(Graph& g, Var x, double rate, bool training, Rng& rng);

}  // namespace hvf
