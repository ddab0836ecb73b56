#include "hvf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hvf/errors.hpp"

namespace hvf {

// ---------------------------------------------------------------------------
// ParameterStore

ParamId ParameterStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  const ParamId id = params_.size();
  index_.emplace(name, id);
  Tensor grad(init.shape());
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
  return id;
}

std::size_t ParameterStore::element_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

ParamId ParameterStore::id_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

// ---------------------------------------------------------------------------
// Graph

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.kind = "input";
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Graph::param(ParamId id) {
  if (params_ == nullptr || id >= params_->size()) {
    throw ContractViolation("graph has no parameter with id " + std::to_string(id));
  }
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) return Var(this, it->second);
  param_nodes_.emplace(id, nodes_.size());
  Node n;
  n.kind = "param";
  n.ref = &(*params_)[id].value;
  n.needs_grad = true;
  n.param = id;
  return push(std::move(n));
}

Var Graph::record(std::string_view kind, std::span<const Var> parents, Tensor value,
                  BackwardFn fn) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.graph() != this) throw ContractViolation("operand belongs to a different graph");
    n.parents.push_back(p.id());
    n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad_ready) {
    n.grad = Tensor(value(id).shape());
    n.grad_ready = true;
  }
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.grad_ready ? n.grad : Tensor(value(v.id()).shape());
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor& buf = grad_buffer(id);
  if (buf.size() != g.size()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) + " does not match node " +
                         shape_string(buf.shape()));
  }
  double* d = buf.data();
  const double* s = g.data();
  for (std::size_t i = 0; i < buf.size(); ++i) d[i] += s[i];
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw ContractViolation("loss belongs to a different graph");
  if (value(loss.id()).size() != 1) {
    throw ContractViolation("backward requires a scalar loss, got shape " +
                            shape_string(value(loss.id()).shape()));
  }
  for (auto& n : nodes_) {
    n.grad_ready = false;
  }
  visits_.assign(nodes_.size(), 0);
  grad_buffer(loss.id()).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    ++visits_[id];
    Node& n = nodes_[id];
    if (!n.grad_ready || !n.needs_grad || !n.backward) continue;
    n.backward(*this, id);
  }
}

void Graph::accumulate_parameter_grads(std::vector<Tensor>& acc, double scale) const {
  for (const Node& n : nodes_) {
    if (n.param == static_cast<ParamId>(-1) || !n.grad_ready) continue;
    Tensor& dst = acc.at(n.param);
    const double* s = n.grad.data();
    double* d = dst.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += scale * s[i];
  }
}

void Graph::write_parameter_grads(ParameterStore& store) const {
  store.zero_grad();
  for (const Node& n : nodes_) {
    if (n.param == static_cast<ParamId>(-1) || !n.grad_ready) continue;
    Tensor& dst = store[n.param].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

// ---------------------------------------------------------------------------
// ops

namespace ops {
namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

enum class Binary { Add, Sub, Mul };

Var binary(Binary kind, Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool same = A.shape() == B.shape();
  if (!same && !is_scalar(A) && !is_scalar(B)) {
    throw DimensionError("elementwise op: shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()) + " differ");
  }
  const Shape out_shape = same ? A.shape() : (is_scalar(A) ? B.shape() : A.shape());
  Tensor out(out_shape);
  const std::size_t n = out.size();
  const std::size_t sa = A.size() == n ? 1 : 0;
  const std::size_t sb = B.size() == n ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = A[i * sa], y = B[i * sb];
    out[i] = kind == Binary::Add ? x + y : kind == Binary::Sub ? x - y : x * y;
  }
  Graph& g = a.graph();
  const char* name = kind == Binary::Add ? "add" : kind == Binary::Sub ? "sub" : "mul";
  return g.record(name, {a, b}, std::move(out), [kind, sa, sb](Graph& g, std::size_t self) {
    const std::size_t ia = g.parent(self, 0), ib = g.parent(self, 1);
    const Tensor& G = g.grad_buffer(self);
    const std::size_t n = G.size();
    if (g.needs_grad(ia)) {
      Tensor& da = g.grad_buffer(ia);
      const Tensor& B = g.value(ib);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = kind == Binary::Mul ? G[i] * B[i * sb] : G[i];
        da[i * sa] += d;
      }
    }
    if (g.needs_grad(ib)) {
      Tensor& db = g.grad_buffer(ib);
      const Tensor& A = g.value(ia);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = kind == Binary::Mul ? G[i] * A[i * sa] : (kind == Binary::Sub ? -G[i] : G[i]);
        db[i * sb] += d;
      }
    }
  });
}

template <class Fwd, class Deriv>
Var unary(const char* name, Var x, Fwd fwd, Deriv deriv) {
  const Tensor& X = x.value();
  Tensor out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = fwd(X[i]);
  return x.graph().record(name, {x}, std::move(out), [deriv](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const Tensor& G = g.grad_buffer(self);
    const Tensor& X = g.value(ix);
    const Tensor& Y = g.value(self);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < G.size(); ++i) dx[i] += G[i] * deriv(X[i], Y[i]);
  });
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double elu_scalar(double v) { return v > 0 ? v : std::expm1(v); }

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()));
  }
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out(Shape{m, n});
  kernels::gemm(A.data(), B.data(), out.data(), m, k, n, false);
  return a.graph().record("matmul", {a, b}, std::move(out), [m, k, n](Graph& g, std::size_t self) {
    const std::size_t ia = g.parent(self, 0), ib = g.parent(self, 1);
    const Tensor& G = g.grad_buffer(self);
    if (g.needs_grad(ia)) {
      kernels::gemm_nt(G.data(), g.value(ib).data(), g.grad_buffer(ia).data(), m, n, k, true);
    }
    if (g.needs_grad(ib)) {
      kernels::gemm_tn(g.value(ia).data(), G.data(), g.grad_buffer(ib).data(), m, k, n, true);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(1)) {
    throw DimensionError("matmul_nt: incompatible shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()) + "ᵀ");
  }
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(0);
  Tensor out(Shape{m, n});
  kernels::gemm_nt(A.data(), B.data(), out.data(), m, k, n, false);
  return a.graph().record("matmul_nt", {a, b}, std::move(out), [m, k, n](Graph& g, std::size_t self) {
    const std::size_t ia = g.parent(self, 0), ib = g.parent(self, 1);
    const Tensor& G = g.grad_buffer(self);
    if (g.needs_grad(ia)) {
      kernels::gemm(G.data(), g.value(ib).data(), g.grad_buffer(ia).data(), m, n, k, true);
    }
    if (g.needs_grad(ib)) {
      kernels::gemm_tn(G.data(), g.value(ia).data(), g.grad_buffer(ib).data(), m, n, k, true);
    }
  });
}

Var transpose(Var a) {
  require_matrix(a.value(), "transpose");
  return a.graph().record("transpose", {a}, kernels::transpose(a.value()),
                          [](Graph& g, std::size_t self) {
                            const std::size_t ia = g.parent(self, 0);
                            const Tensor gt = kernels::transpose(g.grad_buffer(self));
                            g.accumulate(ia, gt);
                          });
}

Var add(Var a, Var b) { return binary(Binary::Add, a, b); }
Var sub(Var a, Var b) { return binary(Binary::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Binary::Mul, a, b); }

Var scale(Var a, double s) {
  return unary("scale", a, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Var add_row_bias(Var x, Var bias) {
  const Tensor& X = x.value();
  const Tensor& B = bias.value();
  if (B.rank() != 1 || B.dim(0) != X.cols()) {
    throw DimensionError("add_row_bias: bias " + shape_string(B.shape()) + " does not match rows of " +
                         shape_string(X.shape()));
  }
  Tensor out = X;
  const std::size_t rows = X.rows(), cols = X.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += B[c];
  return x.graph().record("add_row_bias", {x, bias}, std::move(out),
                          [rows, cols](Graph& g, std::size_t self) {
                            const std::size_t ix = g.parent(self, 0), ib = g.parent(self, 1);
                            const Tensor& G = g.grad_buffer(self);
                            g.accumulate(ix, G);
                            if (g.needs_grad(ib)) {
                              Tensor& db = g.grad_buffer(ib);
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c) db[c] += G[r * cols + c];
                            }
                          });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var elu(Var x) {
  return unary("elu", x, elu_scalar, [](double v, double y) { return v > 0 ? 1.0 : y + 1.0; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var softmax_last_axis(Var x) {
  Tensor out = hvf::softmax_last_axis(x.value());
  return x.graph().record("softmax", {x}, std::move(out), [](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const Tensor& G = g.grad_buffer(self);
    const Tensor& Y = g.value(self);
    Tensor& dx = g.grad_buffer(ix);
    const std::size_t cols = Y.cols(), rows = Y.rows();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = Y.data() + r * cols;
      const double* gr = G.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * y[c];
      double* d = dx.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) d[c] += y[c] * (gr[c] - dot);
    }
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.graph().record("sum", {x}, Tensor::scalar(s), [](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const double gv = g.grad_buffer(self)[0];
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gv;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& X = x.value();
  require_matrix(X, "slice_cols");
  if (begin >= end || end > X.dim(1)) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(X.shape()));
  }
  const std::size_t rows = X.dim(0), cols = X.dim(1), w = end - begin;
  Tensor out(Shape{rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(X.data() + r * cols + begin, w, out.data() + r * w);
  return x.graph().record("slice_cols", {x}, std::move(out),
                          [rows, cols, begin, w](Graph& g, std::size_t self) {
                            const std::size_t ix = g.parent(self, 0);
                            const Tensor& G = g.grad_buffer(self);
                            Tensor& dx = g.grad_buffer(ix);
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < w; ++c) dx[r * cols + begin + c] += G[r * w + c];
                          });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = parts.front().value().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().dim(0) != rows) {
      throw DimensionError("concat_cols: row counts differ (" + shape_string(p.value().shape()) + ")");
    }
    widths.push_back(p.value().dim(1));
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& P = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(P.data() + r * widths[k], widths[k], out.data() + r * total + off);
    off += widths[k];
  }
  return parts.front().graph().record(
      "concat_cols", parts, std::move(out), [rows, total, widths](Graph& g, std::size_t self) {
        const Tensor& G = g.grad_buffer(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          const std::size_t ip = g.parent(self, k);
          if (g.needs_grad(ip)) {
            Tensor& dp = g.grad_buffer(ip);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[k]; ++c) dp[r * widths[k] + c] += G[r * total + off + c];
          }
          off += widths[k];
        }
      });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& X = x.value();
  require_matrix(X, "slice_rows");
  if (begin >= end || end > X.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_string(X.shape()));
  }
  const std::size_t cols = X.dim(1);
  Tensor out(Shape{end - begin, cols});
  std::copy_n(X.data() + begin * cols, (end - begin) * cols, out.data());
  return x.graph().record("slice_rows", {x}, std::move(out), [begin, cols](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const Tensor& G = g.grad_buffer(self);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < G.size(); ++i) dx[begin * cols + i] += G[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  const std::size_t cols = parts.front().value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_rows");
    if (p.value().dim(1) != cols) {
      throw DimensionError("concat_rows: column counts differ (" + shape_string(p.value().shape()) + ")");
    }
    rows += p.value().dim(0);
    sizes.push_back(p.value().size());
  }
  Tensor out(Shape{rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return parts.front().graph().record("concat_rows", parts, std::move(out),
                                      [sizes](Graph& g, std::size_t self) {
                                        const Tensor& G = g.grad_buffer(self);
                                        std::size_t off = 0;
                                        for (std::size_t k = 0; k < sizes.size(); ++k) {
                                          const std::size_t ip = g.parent(self, k);
                                          if (g.needs_grad(ip)) {
                                            Tensor& dp = g.grad_buffer(ip);
                                            for (std::size_t i = 0; i < sizes[k]; ++i) dp[i] += G[off + i];
                                          }
                                          off += sizes[k];
                                        }
                                      });
}

Var reverse_rows(Var x) {
  const Tensor& X = x.value();
  require_matrix(X, "reverse_rows");
  const std::size_t rows = X.dim(0), cols = X.dim(1);
  Tensor out(X.shape());
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(X.data() + (rows - 1 - r) * cols, cols, out.data() + r * cols);
  return x.graph().record("reverse_rows", {x}, std::move(out), [rows, cols](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const Tensor& G = g.grad_buffer(self);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) dx[(rows - 1 - r) * cols + c] += G[r * cols + c];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshape(std::move(shape));
  return x.graph().record("reshape", {x}, std::move(out), [](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const Tensor& G = g.grad_buffer(self);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < G.size(); ++i) dx[i] += G[i];
  });
}

Var mask(Var x, const Tensor& m) {
  const Tensor& X = x.value();
  if (m.shape() != X.shape()) {
    throw DimensionError("mask: shape " + shape_string(m.shape()) + " does not match " +
                         shape_string(X.shape()));
  }
  Tensor out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] * m[i];
  return x.graph().record("mask", {x}, std::move(out), [m](Graph& g, std::size_t self) {
    const std::size_t ix = g.parent(self, 0);
    const Tensor& G = g.grad_buffer(self);
    Tensor& dx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < G.size(); ++i) dx[i] += G[i] * m[i];
  });
}

}  // namespace ops

// ---------------------------------------------------------------------------
// untaped helpers

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  Graph g;
  Var x = g.constant(a);
  switch (op) {
    case Elementwise::Add: return ops::add(x, g.constant(b)).value();
    case Elementwise::Sub: return ops::sub(x, g.constant(b)).value();
    case Elementwise::Mul: return ops::mul(x, g.constant(b)).value();
    case Elementwise::Tanh: return ops::tanh(x).value();
    case Elementwise::Sigmoid: return ops::sigmoid(x).value();
    case Elementwise::Elu: return ops::elu(x).value();
    case Elementwise::Exp: return ops::exp(x).value();
  }
  throw ContractViolation("unknown elementwise op");
}

Tensor softmax_last_axis(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t cols = x.cols(), rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      s += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= s;
  }
  return out;
}

}  // namespace hvf
