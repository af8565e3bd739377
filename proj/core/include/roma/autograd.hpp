// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "roma/param_set.hpp"
#include "roma/tensor.hpp"

namespace roma {

// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Append-only record of executed ops. Backward sweeps nodes in exact reverse
// execution order. Constructed with gradients disabled, the same op code runs
// value-only (no closures recorded), which keeps inference and training
// forwards bitwise identical.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  // Leaf bound to a named parameter; gradients from backward() accumulate
  // into the ParamSet the binding came from.
  Var param(const ParamSet& ps, const std::string& name);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() w.r.t. v; zeros if v was unreachable.
  Tensor grad(Var v) const;

  // Reverse sweep from a scalar loss. Node gradients are reset per call;
  // gradients for bound parameters are added into `into` (repeated calls
  // accumulate additively).
  void backward(Var loss);
  void backward(Var loss, ParamSet& into);

  size_t node_count() const { return nodes_.size(); }

  // --- ops ---------------------------------------------------------------
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);            // same shape
  Var add_row(Var a, Var bias);     // [m,n] + [n]
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);            // elementwise
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var exp(Var a);
  Var log(Var a);
  Var gelu(Var a);                  // exact erf form
  Var rms_norm(Var a, Var gain);    // rows of [m,n] (or a [n] vector), gain [n]
  Var embed(Var table, std::span<const int> ids);
  Var softmax(Var a);               // over last axis
  Var log_softmax(Var a);           // over last axis
  Var sum(Var a);
  Var mean(Var a);
  Var pick(Var a, int64_t row, int64_t col);
  Var gather_rows(Var a, std::span<const int> cols);  // out[i] = a(i, cols[i])
  Var minimum(Var a, Var b);        // elementwise; ties take a
  Var clamp(Var a, double lo, double hi);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, int64_t start, int64_t n);
  Var slice_cols(Var a, int64_t start, int64_t n);
  Var concat_cols(std::span<const Var> parts);
  Var detach(Var a);

  // softmax(q kᵀ / sqrt(d) + causal mask) v, composed from the primitives
  // above. Shapes: q,k,v are [t, d_head].
  Var causal_attention(Var q, Var k, Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::vector<int> inputs;
    std::function<void(Tape&, int)> back;  // pulls grad(self), pushes to inputs
    const char* op = "leaf";
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_buf(int id);
  void add_grad(int id, const Tensor& g);

  int push(Tensor value, const char* op, std::initializer_list<Var> inputs,
           std::function<void(Tape&, int)> back);
  void check_on_tape(Var v, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, int>> bindings_;
  bool grad_enabled_;
};

}  // namespace roma
