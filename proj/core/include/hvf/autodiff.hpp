#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Graph records every operation in creation order, which is already a
// topological order: a node's parents always have smaller ids. backward()
// walks the tape once in reverse and sums gradient contributions from every
// consumer of a node.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hvf/tensor.hpp"

namespace hvf {

using ParamId = std::size_t;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Owns the learned tensors of a model. Ids are stable for the store's lifetime.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor init);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t element_count() const noexcept;
  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  const Parameter* find(std::string_view name) const;
  ParamId id_of(std::string_view name) const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, ParamId> index_;
};

class Graph;

/// Handle to a node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  /// Called with (graph, own node id); adds into parents' gradient buffers.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  explicit Graph(const ParameterStore* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Differentiable leaf.
  Var input(Tensor value);
  /// Leaf bound to a parameter of the store given at construction. The value is
  /// referenced, not copied; the store must outlive the graph.
  Var param(ParamId id);

  Var record(std::string_view kind, std::span<const Var> parents, Tensor value, BackwardFn fn);
  Var record(std::string_view kind, std::initializer_list<Var> parents, Tensor value,
             BackwardFn fn) {
    return record(kind, std::span<const Var>(parents.begin(), parents.size()), std::move(value),
                  std::move(fn));
  }

  const Tensor& value(std::size_t id) const;
  std::string_view kind(std::size_t id) const { return nodes_[id].kind; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t parent(std::size_t id, std::size_t k) const { return nodes_[id].parents[k]; }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad_buffer(std::size_t id);
  /// Gradient of a node after backward (zeros when unreached).
  Tensor grad(Var v) const;
  bool has_grad(std::size_t id) const { return nodes_[id].grad_ready; }

  /// Adds `g` into the gradient of node `id` if that node needs one.
  void accumulate(std::size_t id, const Tensor& g);

  /// Reverse pass from a scalar node. Throws ContractViolation otherwise.
  void backward(Var loss);

  /// acc[p] += scale * dLoss/dParam_p for every parameter leaf of this graph.
  /// acc must be sized like the store; untouched parameters stay unchanged.
  void accumulate_parameter_grads(std::vector<Tensor>& acc, double scale = 1.0) const;
  /// Writes gradients into ParameterStore::grad (zero for unreachable parameters).
  void write_parameter_grads(ParameterStore& store) const;

  /// Number of times backward has executed each node's rule (testing aid).
  const std::vector<int>& visit_counts() const noexcept { return visits_; }

 private:
  struct Node {
    std::string_view kind;
    std::vector<std::size_t> parents;
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool grad_ready = false;
    BackwardFn backward;
    bool needs_grad = false;
    ParamId param = static_cast<ParamId>(-1);
  };

  const ParameterStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<ParamId, std::size_t> param_nodes_;
  std::vector<int> visits_;

  Var push(Node node);
};

/// Shorthand for the differentiable ops below.
namespace ops {

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// x[..×n] + b[n] applied to every row.
Var add_row_bias(Var x, Var bias);

Var tanh(Var x);
Var sigmoid(Var x);
/// α(eˣ−1) for x<0, x otherwise, α = 1.
Var elu(Var x);
Var exp(Var x);

Var softmax_last_axis(Var x);

Var sum(Var x);
Var mean(Var x);

/// Columns [begin, end) of a matrix.
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
/// Rows [begin, end) of a matrix.
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var reverse_rows(Var x);
Var reshape(Var x, Shape shape);
/// Multiplies by a constant mask of the same shape.
Var mask(Var x, const Tensor& m);

}  // namespace ops

/// Elementwise operator selector for the tensor-level evaluate().
enum class Elementwise { Add, Sub, Mul, Tanh, Sigmoid, Elu, Exp };

/// Plain (untaped) evaluation of an elementwise operator. Binary operators take
/// equal shapes or one scalar operand.
Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b = Tensor::scalar(0.0));

Tensor softmax_last_axis(const Tensor& x);

}  // namespace hvf
