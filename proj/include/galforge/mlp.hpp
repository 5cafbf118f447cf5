#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "galforge/optim.hpp"
#include "galforge/rng.hpp"
#include "galforge/tape.hpp"
#include "galforge/tensor.hpp"

namespace galforge {

// Fully connected net with tanh on every hidden layer and a linear head.
// Used for both the denoiser and the classifiers; runs untaped for inference
// and on a Tape for gradient work, with identical math.
struct Mlp {
  std::vector<std::size_t> widths;  // input, hidden..., output
  std::vector<Tensor> weights;      // layer l: (widths[l], widths[l+1])
  std::vector<Tensor> biases;       // layer l: (widths[l+1])

  // scaled-normal init, std 1/sqrt(fan_in), zero biases
  static Mlp make(std::vector<std::size_t> widths, std::uint64_t seed);

  std::size_t layers() const { return weights.size(); }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }

  // x: (n, input_dim) or (input_dim). hidden_masks, when given, holds one
  // dropout mask per hidden layer, shaped like that layer's activation.
  Tensor forward(const Tensor& x, const std::vector<Tensor>* hidden_masks = nullptr) const;

  // activation of the last hidden layer (the feature map); linear nets
  // return the input unchanged
  Tensor penultimate(const Tensor& x) const;

  struct TapeNodes {
    std::vector<NodeId> w, b;
  };
  TapeNodes bind(Tape& tape, bool requires_grad) const;
  NodeId forward_on_tape(Tape& tape, const TapeNodes& nodes, NodeId x,
                         const std::vector<NodeId>* hidden_mask_nodes = nullptr) const;

  std::vector<ParamRef> param_refs(const std::string& prefix);
};

// 0 with probability rate, 1/(1-rate) otherwise; rate outside [0, 1) throws
Tensor make_dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng);

}  // namespace galforge
