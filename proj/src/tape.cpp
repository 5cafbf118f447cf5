#include "galforge/tape.hpp"

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace galforge {

const Tensor& Gradients::at(NodeId id) const {
  if (!has(id)) {
    throw std::out_of_range("Gradients: no gradient recorded for node " + std::to_string(id));
  }
  return *grads_[id];
}

Tensor& Gradients::slot(NodeId id, const Tensor& like) {
  if (!grads_[id].has_value()) grads_[id] = Tensor::zeros(like.shape);
  return *grads_[id];
}

void Tape::check_id(NodeId id, const char* who) const {
  if (id >= nodes_.size()) {
    throw std::out_of_range(std::string(who) + ": node id " + std::to_string(id) +
                            " not on tape of size " + std::to_string(nodes_.size()));
  }
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::push_unary(Op op, NodeId a, Tensor value) {
  check_id(a, "tape op");
  Node n;
  n.op = op;
  n.in0 = a;
  n.in1 = a;
  n.value = std::move(value);
  n.requires_grad = nodes_[a].requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::push_binary(Op op, NodeId a, NodeId b, Tensor value) {
  check_id(a, "tape op");
  check_id(b, "tape op");
  Node n;
  n.op = op;
  n.in0 = a;
  n.in1 = b;
  n.value = std::move(value);
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  return push_binary(Op::matmul, a, b, ops::matmul(value(a), value(b)));
}
NodeId Tape::add(NodeId a, NodeId b) {
  return push_binary(Op::add, a, b, ops::add(value(a), value(b)));
}
NodeId Tape::sub(NodeId a, NodeId b) {
  return push_binary(Op::sub, a, b, ops::sub(value(a), value(b)));
}
NodeId Tape::mul(NodeId a, NodeId b) {
  return push_binary(Op::mul, a, b, ops::mul(value(a), value(b)));
}
NodeId Tape::scale(NodeId a, double c) {
  NodeId id = push_unary(Op::scale, a, ops::scale(value(a), c));
  nodes_[id].factor = c;
  return id;
}
NodeId Tape::add_bias(NodeId x, NodeId bias) {
  return push_binary(Op::add_bias, x, bias, ops::add_bias(value(x), value(bias)));
}
NodeId Tape::relu(NodeId a) { return push_unary(Op::relu, a, ops::relu(value(a))); }
NodeId Tape::tanh(NodeId a) { return push_unary(Op::tanh, a, ops::tanh(value(a))); }
NodeId Tape::softmax(NodeId a) { return push_unary(Op::softmax, a, ops::softmax(value(a))); }
NodeId Tape::log(NodeId a) { return push_unary(Op::log, a, ops::log(value(a))); }
NodeId Tape::sqrt(NodeId a) { return push_unary(Op::sqrt, a, ops::sqrt(value(a))); }
NodeId Tape::mean(NodeId a) { return push_unary(Op::mean, a, ops::mean(value(a))); }
NodeId Tape::sum(NodeId a) { return push_unary(Op::sum, a, ops::sum(value(a))); }
NodeId Tape::concat(NodeId a, NodeId b) {
  return push_binary(Op::concat, a, b, ops::concat(value(a), value(b)));
}
NodeId Tape::slice(NodeId a, std::size_t start, std::size_t len) {
  NodeId id = push_unary(Op::slice, a, ops::slice(value(a), start, len));
  nodes_[id].start = start;
  nodes_[id].len = len;
  return id;
}
NodeId Tape::dropout_apply(NodeId x, NodeId mask) {
  return push_binary(Op::dropout, x, mask, ops::dropout_apply(value(x), value(mask)));
}

const Tensor& Tape::value(NodeId id) const {
  check_id(id, "Tape::value");
  return nodes_[id].value;
}

bool Tape::requires_grad(NodeId id) const {
  check_id(id, "Tape::requires_grad");
  return nodes_[id].requires_grad;
}

Tensor Tape::recompute(const Node& node) const {
  const Tensor& a = nodes_[node.in0].value;
  const Tensor& b = nodes_[node.in1].value;
  switch (node.op) {
    case Op::leaf: return node.value;
    case Op::matmul: return ops::matmul(a, b);
    case Op::add: return ops::add(a, b);
    case Op::sub: return ops::sub(a, b);
    case Op::mul: return ops::mul(a, b);
    case Op::scale: return ops::scale(a, node.factor);
    case Op::add_bias: return ops::add_bias(a, b);
    case Op::relu: return ops::relu(a);
    case Op::tanh: return ops::tanh(a);
    case Op::softmax: return ops::softmax(a);
    case Op::log: return ops::log(a);
    case Op::sqrt: return ops::sqrt(a);
    case Op::mean: return ops::mean(a);
    case Op::sum: return ops::sum(a);
    case Op::concat: return ops::concat(a, b);
    case Op::slice: return ops::slice(a, node.start, node.len);
    case Op::dropout: return ops::dropout_apply(a, b);
  }
  throw std::logic_error("Tape::recompute: unknown op");
}

bool Tape::replay_matches() const {
  for (const Node& node : nodes_) {
    if (node.op == Op::leaf) continue;
    Tensor again = recompute(node);
    if (again.shape != node.value.shape) return false;
    for (std::size_t i = 0; i < again.data.size(); ++i) {
      // bit comparison, so NaN == NaN and -0.0 != 0.0
      if (std::bit_cast<std::uint64_t>(again.data[i]) !=
          std::bit_cast<std::uint64_t>(node.value.data[i])) {
        return false;
      }
    }
  }
  return true;
}

Gradients Tape::backward(NodeId root) const {
  check_id(root, "Tape::backward");
  if (nodes_[root].value.rank() != 0) {
    throw std::invalid_argument("Tape::backward: root must be rank-0, got shape " +
                                nodes_[root].value.shape_str());
  }
  Gradients grads(nodes_.size());
  // every grad-requiring node gets a slot, so leaves that never influence
  // the root still report exact-zero gradients
  for (NodeId id = 0; id < nodes_.size(); ++id)
    if (nodes_[id].requires_grad) grads.slot(id, nodes_[id].value);
  grads.slot(root, nodes_[root].value).data[0] = 1.0;

  for (NodeId id = root + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (node.op == Op::leaf || !node.requires_grad || !grads.has(id)) continue;
    const Tensor& g = grads.at(id);
    const Node& na = nodes_[node.in0];
    const Node& nb = nodes_[node.in1];
    const bool wa = na.requires_grad;
    const bool wb = nb.requires_grad;

    switch (node.op) {
      case Op::matmul: {
        const Tensor& a = na.value;
        const Tensor& b = nb.value;
        if (a.rank() == 1) {
          const std::size_t k = b.shape[0], m = b.shape[1];
          if (wa) {
            Tensor& da = grads.slot(node.in0, a);
            for (std::size_t l = 0; l < k; ++l) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) acc += g.data[j] * b.data[l * m + j];
              da.data[l] += acc;
            }
          }
          if (wb) {
            Tensor& db = grads.slot(node.in1, b);
            for (std::size_t l = 0; l < k; ++l) {
              for (std::size_t j = 0; j < m; ++j) db.data[l * m + j] += a.data[l] * g.data[j];
            }
          }
        } else {
          const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
          if (wa) {
            Tensor& da = grads.slot(node.in0, a);
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t l = 0; l < k; ++l) {
                double acc = 0.0;
                const double* grow = g.data.data() + i * m;
                const double* brow = b.data.data() + l * m;
                for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                da.data[i * k + l] += acc;
              }
            }
          }
          if (wb) {
            Tensor& db = grads.slot(node.in1, b);
            for (std::size_t i = 0; i < n; ++i) {
              const double* arow = a.data.data() + i * k;
              const double* grow = g.data.data() + i * m;
              for (std::size_t l = 0; l < k; ++l) {
                double* drow = db.data.data() + l * m;
                const double av = arow[l];
                for (std::size_t j = 0; j < m; ++j) drow[j] += av * grow[j];
              }
            }
          }
        }
        break;
      }
      case Op::add: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
        }
        if (wb) {
          Tensor& db = grads.slot(node.in1, nb.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i];
        }
        break;
      }
      case Op::sub: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
        }
        if (wb) {
          Tensor& db = grads.slot(node.in1, nb.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] -= g.data[i];
        }
        break;
      }
      case Op::mul: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] * nb.value.data[i];
        }
        if (wb) {
          Tensor& db = grads.slot(node.in1, nb.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) db.data[i] += g.data[i] * na.value.data[i];
        }
        break;
      }
      case Op::scale: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += node.factor * g.data[i];
        }
        break;
      }
      case Op::add_bias: {
        const std::size_t n = na.value.shape[0], m = na.value.shape[1];
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i];
        }
        if (wb) {
          Tensor& db = grads.slot(node.in1, nb.value);
          for (std::size_t i = 0; i < n; ++i) {
            const double* grow = g.data.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) db.data[j] += grow[j];
          }
        }
        break;
      }
      case Op::relu: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) {
            if (na.value.data[i] > 0.0) da.data[i] += g.data[i];
          }
        }
        break;
      }
      case Op::tanh: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double y = node.value.data[i];
            da.data[i] += g.data[i] * (1.0 - y * y);
          }
        }
        break;
      }
      case Op::softmax: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          const std::size_t cols = node.value.shape.back();
          const std::size_t rows = node.value.numel() / cols;
          for (std::size_t i = 0; i < rows; ++i) {
            const double* y = node.value.data.data() + i * cols;
            const double* grow = g.data.data() + i * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += grow[j] * y[j];
            double* drow = da.data.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) drow[j] += y[j] * (grow[j] - dot);
          }
        }
        break;
      }
      case Op::log: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] / na.value.data[i];
        }
        break;
      }
      case Op::sqrt: {
        // subgradient 0 at x == 0, mirroring relu's kink convention
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double y = node.value.data[i];
            if (y > 0.0) da.data[i] += g.data[i] * 0.5 / y;
          }
        }
        break;
      }
      case Op::mean: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          const double gv = g.data[0] / static_cast<double>(na.value.numel());
          for (double& v : da.data) v += gv;
        }
        break;
      }
      case Op::sum: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (double& v : da.data) v += g.data[0];
        }
        break;
      }
      case Op::concat: {
        if (na.value.rank() == 1) {
          const std::size_t la = na.value.shape[0];
          if (wa) {
            Tensor& da = grads.slot(node.in0, na.value);
            for (std::size_t i = 0; i < la; ++i) da.data[i] += g.data[i];
          }
          if (wb) {
            Tensor& db = grads.slot(node.in1, nb.value);
            for (std::size_t i = 0; i < db.data.size(); ++i) db.data[i] += g.data[la + i];
          }
        } else {
          const std::size_t n = na.value.shape[0], ma = na.value.shape[1], mb = nb.value.shape[1];
          if (wa) {
            Tensor& da = grads.slot(node.in0, na.value);
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < ma; ++j) {
                da.data[i * ma + j] += g.data[i * (ma + mb) + j];
              }
            }
          }
          if (wb) {
            Tensor& db = grads.slot(node.in1, nb.value);
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < mb; ++j) {
                db.data[i * mb + j] += g.data[i * (ma + mb) + ma + j];
              }
            }
          }
        }
        break;
      }
      case Op::slice: {
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          if (na.value.rank() == 1) {
            for (std::size_t j = 0; j < node.len; ++j) da.data[node.start + j] += g.data[j];
          } else {
            const std::size_t n = na.value.shape[0], cols = na.value.shape[1];
            for (std::size_t i = 0; i < n; ++i) {
              for (std::size_t j = 0; j < node.len; ++j) {
                da.data[i * cols + node.start + j] += g.data[i * node.len + j];
              }
            }
          }
        }
        break;
      }
      case Op::dropout: {
        // mask input carries no gradient by contract
        if (wa) {
          Tensor& da = grads.slot(node.in0, na.value);
          for (std::size_t i = 0; i < g.data.size(); ++i) da.data[i] += g.data[i] * nb.value.data[i];
        }
        break;
      }
      case Op::leaf:
        break;
    }
  }
  return grads;
}

}  // namespace galforge
