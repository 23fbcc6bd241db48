// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ltok/tensor.hpp"

namespace ltok::nn {

using NodeId = int;

// Reverse-mode autodiff over a per-step graph. Nodes are created in forward
// order, so walking ids in reverse is a valid topological order for backward.
// Every op validates shapes and rejects non-finite outputs.
class Tape {
 public:
  // Leaves. Constants never receive gradients; variables do; params are
  // variables bound to external storage (read at creation, written by the
  // optimizer outside the tape).
  NodeId constant(TensorF v);
  NodeId variable(TensorF v);
  NodeId param(TensorF* storage, const std::string& name);

  // y = a @ b, [N x I] @ [I x O]
  NodeId matmul(NodeId a, NodeId b);
  // y = a @ b^T, [N x I] @ [M x I]^T
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);               // same shape
  NodeId add_bias(NodeId x, NodeId b);          // [N x O] + [O]
  NodeId scale(NodeId x, float s);
  NodeId slice_cols(NodeId x, int c0, int c1);  // [c0, c1)
  NodeId concat_cols(const std::vector<NodeId>& xs);
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, float eps = 1e-5f);
  NodeId gelu(NodeId x);  // tanh approximation
  // Row-wise softmax; masked-out key columns (mask[j] == 0) get probability 0.
  NodeId softmax_rows(NodeId x, const std::vector<uint8_t>* key_mask = nullptr);
  // out[i] = table[idx[i]]; backward scatter-adds into the table rows.
  NodeId gather_rows(NodeId table, std::vector<int> idx);
  // Straight-through: forward takes the given value, backward is identity
  // into x. Shapes must match.
  NodeId replace_value(NodeId x, TensorF v);
  // [T x p*p*C] patch matrix -> [H x W x C] grid layout (pure permutation).
  NodeId unpatchify(NodeId x, int H, int W, int C, int p);

  // Scalar losses. Sums are accumulated in double and the exact double is
  // kept alongside the f32 node value (scalar_value) for finite differences.
  // Constant operands are taken by value: node storage may move when the op
  // is pushed, so callers can safely pass views of earlier node values.
  NodeId bce_with_logits(NodeId logits, TensorF targets);
  NodeId cross_entropy(NodeId logits, std::vector<int> targets,
                       std::vector<uint8_t> mask, float label_smoothing = 0.0f);
  NodeId mse_vs_const(NodeId a, TensorF b);

  void backward(NodeId root);  // root must be scalar

  const TensorF& value(NodeId id) const { return nodes_[id].value; }
  double scalar_value(NodeId id) const;  // double-precision when available
  bool has_grad(NodeId id) const {
    return id < static_cast<int>(grads_.size()) && !grads_[id].data.empty();
  }
  const TensorF& grad(NodeId id) const;

  struct Binding {
    NodeId node;
    TensorF* storage;
    std::string name;
  };
  const std::vector<Binding>& bindings() const { return bindings_; }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorF value;
    double dval = 0.0;       // double shadow for scalar nodes
    bool has_dval = false;
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  NodeId push(TensorF value, bool needs_grad, std::function<void(Tape&)> bw);
  TensorF& grad_acc(NodeId id);  // allocate-on-first-touch accumulator
  void ensure_finite(NodeId id, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<TensorF> grads_;
  std::vector<Binding> bindings_;
};

}  // namespace ltok::nn
