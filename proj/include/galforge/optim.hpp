#pragma once

#include <span>
#include <string>
#include <vector>

#include "galforge/tensor.hpp"

namespace galforge {

struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
};

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Stateful update rule over a fixed parameter list. Parameter order must not
// change between steps; a non-finite gradient aborts the step and names the
// offending parameter.
class Optimizer {
 public:
  static Optimizer sgd(SgdConfig cfg);
  static Optimizer adam(AdamConfig cfg);

  void step(std::span<const ParamRef> params, std::span<const Tensor* const> grads);

 private:
  enum class Kind { sgd, adam };
  Kind kind_ = Kind::sgd;
  SgdConfig sgd_{};
  AdamConfig adam_{};
  std::vector<std::vector<double>> velocity_;  // sgd momentum
  std::vector<std::vector<double>> m_;         // adam first moment
  std::vector<std::vector<double>> v_;         // adam second moment
  std::size_t t_ = 0;
};

}  // namespace galforge
