#include "galforge/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace galforge {

Mlp Mlp::make(std::vector<std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) {
    throw std::invalid_argument("Mlp::make: need at least input and output widths");
  }
  Mlp net;
  net.widths = std::move(widths);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    const std::size_t fan_in = net.widths[l];
    const std::size_t fan_out = net.widths[l + 1];
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w = Tensor::zeros({fan_in, fan_out});
    for (double& v : w.data) v = rng.normal(0.0, std_dev);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Tensor::zeros({fan_out}));
  }
  return net;
}

Tensor Mlp::forward(const Tensor& x, const std::vector<Tensor>* hidden_masks) const {
  if (hidden_masks && hidden_masks->size() != layers() - 1) {
    throw std::invalid_argument("Mlp::forward: expected " + std::to_string(layers() - 1) +
                                " dropout masks, got " + std::to_string(hidden_masks->size()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < layers(); ++l) {
    Tensor z = ops::matmul(h, weights[l]);
    z = z.rank() == 1 ? ops::add(z, biases[l]) : ops::add_bias(z, biases[l]);
    if (l + 1 < layers()) {
      z = ops::tanh(z);
      if (hidden_masks) z = ops::dropout_apply(z, (*hidden_masks)[l]);
    }
    h = std::move(z);
  }
  return h;
}

Tensor Mlp::penultimate(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l + 1 < layers(); ++l) {
    Tensor z = ops::matmul(h, weights[l]);
    z = z.rank() == 1 ? ops::add(z, biases[l]) : ops::add_bias(z, biases[l]);
    h = ops::tanh(z);
  }
  return h;
}

Mlp::TapeNodes Mlp::bind(Tape& tape, bool requires_grad) const {
  TapeNodes nodes;
  for (std::size_t l = 0; l < layers(); ++l) {
    nodes.w.push_back(tape.leaf(weights[l], requires_grad));
    nodes.b.push_back(tape.leaf(biases[l], requires_grad));
  }
  return nodes;
}

NodeId Mlp::forward_on_tape(Tape& tape, const TapeNodes& nodes, NodeId x,
                            const std::vector<NodeId>* hidden_mask_nodes) const {
  if (hidden_mask_nodes && hidden_mask_nodes->size() != layers() - 1) {
    throw std::invalid_argument("Mlp::forward_on_tape: wrong dropout mask count");
  }
  NodeId h = x;
  for (std::size_t l = 0; l < layers(); ++l) {
    NodeId z = tape.matmul(h, nodes.w[l]);
    z = tape.value(z).rank() == 1 ? tape.add(z, nodes.b[l]) : tape.add_bias(z, nodes.b[l]);
    if (l + 1 < layers()) {
      z = tape.tanh(z);
      if (hidden_mask_nodes) z = tape.dropout_apply(z, (*hidden_mask_nodes)[l]);
    }
    h = z;
  }
  return h;
}

std::vector<ParamRef> Mlp::param_refs(const std::string& prefix) {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < layers(); ++l) {
    refs.push_back({prefix + ".w" + std::to_string(l), &weights[l]});
    refs.push_back({prefix + ".b" + std::to_string(l), &biases[l]});
  }
  return refs;
}

Tensor make_dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("make_dropout_mask: rate must be in [0, 1), got " +
                                std::to_string(rate));
  }
  Tensor mask = Tensor::zeros(shape);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

}  // namespace galforge
