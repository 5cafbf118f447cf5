#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "galforge/tensor.hpp"

namespace galforge {

using NodeId = std::size_t;

// Gradient map produced by Tape::backward. Nodes that require grad but do
// not influence the root hold exact zeros.
class Gradients {
 public:
  explicit Gradients(std::size_t n) : grads_(n) {}
  bool has(NodeId id) const { return id < grads_.size() && grads_[id].has_value(); }
  const Tensor& at(NodeId id) const;
  Tensor& slot(NodeId id, const Tensor& like);

 private:
  std::vector<std::optional<Tensor>> grads_;
};

// Records primitive ops in execution order. Each op stores its output value,
// so the structure is acyclic by construction and a forward replay of the
// recorded ops must reproduce every stored value bit-exactly.
class Tape {
 public:
  NodeId leaf(Tensor value, bool requires_grad = false);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId relu(NodeId a);
  NodeId tanh(NodeId a);
  NodeId softmax(NodeId a);
  NodeId log(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId mean(NodeId a);
  NodeId sum(NodeId a);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId a, std::size_t start, std::size_t len);
  NodeId dropout_apply(NodeId x, NodeId mask);

  const Tensor& value(NodeId id) const;
  bool requires_grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a rank-0 root; visits each recorded op once in
  // reverse order. Non-scalar root throws std::invalid_argument.
  Gradients backward(NodeId root) const;

  // Recomputes every non-leaf value from its recorded inputs and compares
  // bit-for-bit with what the tape stored.
  bool replay_matches() const;

 private:
  enum class Op {
    leaf, matmul, add, sub, mul, scale, add_bias, relu, tanh, softmax,
    log, sqrt, mean, sum, concat, slice, dropout
  };

  struct Node {
    Op op = Op::leaf;
    Tensor value;
    NodeId in0 = 0;
    NodeId in1 = 0;
    double factor = 0.0;      // scale
    std::size_t start = 0;    // slice
    std::size_t len = 0;      // slice
    bool requires_grad = false;
  };

  NodeId push_unary(Op op, NodeId a, Tensor value);
  NodeId push_binary(Op op, NodeId a, NodeId b, Tensor value);
  Tensor recompute(const Node& node) const;
  void check_id(NodeId id, const char* who) const;

  std::vector<Node> nodes_;
};

}  // namespace galforge
