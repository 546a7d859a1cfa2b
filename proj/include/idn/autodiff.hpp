#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "idn/params.hpp"
#include "idn/tensor.hpp"

namespace idn {

class Graph;

// Handle to a node recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the tape is
// already topologically sorted and backward is a single reverse sweep.
//
// A Graph optionally binds a ParamSet; param(name) returns a leaf whose
// gradient is reported by backward() under the same name.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(const ParamSet* params = nullptr) : params_(params) { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Same name yields the same leaf within one graph.
  Var param(const std::string& name);

  const Tensor& value(Var v) const { return nodes_.at(v.id).get(); }
  Real scalar(Var v) const;

  // Gradient of a 1x1 (or single-element) loss w.r.t. every parameter of the
  // bound ParamSet. Parameters the loss does not reach get zero tensors.
  Gradients backward(Var loss);

  // Low-level interface used by op implementations.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);
  const Tensor& node_value(std::size_t id) const { return nodes_[id].get(); }
  const Tensor& node_grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t node_input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Zero-initialized on first access.
  Tensor& grad_buffer(std::size_t id);

  // Bookkeeping for finite-difference checks. note_kink takes the signed
  // argument of a piecewise op (ReLU input, hinge margin); note_branch records
  // a discrete choice (which entry a threshold follows); note_singular takes a
  // distance to a point where no piece is smooth (a Euclidean distance at 0).
  // Two evaluations with equal kink_signature() lie on the same smooth piece.
  Real kink_margin() const { return kink_margin_; }
  Real singular_margin() const { return singular_margin_; }
  std::uint64_t kink_signature() const { return signature_; }
  void note_kink(Real distance);
  void note_branch(std::size_t choice);
  void note_singular(Real distance);

  std::size_t node_count() const { return nodes_.size(); }
  // Names of the parameters requested through param() so far.
  std::vector<std::string> touched_parameters() const;
  // Names of the parameters v depends on, sorted.
  std::vector<std::string> parameters_reaching(Var v) const;

 private:
  struct Node {
    Tensor value;
    // Parameters are read in place from the bound ParamSet.
    const Tensor* borrowed = nullptr;
    const Tensor& get() const { return borrowed != nullptr ? *borrowed : value; }
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::string param;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> param_ids_;
  const ParamSet* params_;
  Real kink_margin_ = std::numeric_limits<Real>::infinity();
  Real singular_margin_ = std::numeric_limits<Real>::infinity();
  std::uint64_t signature_ = 14695981039346656037ull;
};

// x [B x in] times w^T for w [out x in].
Var matmul_t(Var x, Var w);
// Broadcast a rank-1 (or 1 x n) bias across rows.
Var add_row_bias(Var x, Var bias);
Var linear(Var x, Var weight, Var bias);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var square(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, Real factor);
Var add_scalar(Var x, Real value);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

Var sum_all(Var x);
Var mean_all(Var x);

// Per-row Euclidean distance, [B x k] x [B x k] -> [B x 1].
Var row_distance(Var a, Var b);
// Mean squared error over all entries, 1 x 1.
Var mse(Var a, Var b);
// Mean binary cross-entropy of sigmoid(logits) against constant targets, 1 x 1.
Var bce_with_logits(Var logits, const Tensor& targets);
// Mean binary cross-entropy of p = exp(-d) against constant targets, for
// distances d >= 0. See kExpBceFloor for the d -> 0 guard on target 0.
inline constexpr Real kExpBceFloor = 1e-3;
Var bce_exp_distance(Var distances, const Tensor& targets);

}  // namespace idn
