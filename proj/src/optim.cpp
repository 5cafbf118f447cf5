#include "galforge/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace galforge {

Optimizer Optimizer::sgd(SgdConfig cfg) {
  Optimizer o;
  o.kind_ = Kind::sgd;
  o.sgd_ = cfg;
  return o;
}

Optimizer Optimizer::adam(AdamConfig cfg) {
  Optimizer o;
  o.kind_ = Kind::adam;
  o.adam_ = cfg;
  return o;
}

void Optimizer::step(std::span<const ParamRef> params, std::span<const Tensor* const> grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("Optimizer::step: " + std::to_string(params.size()) +
                                " params vs " + std::to_string(grads.size()) + " grads");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& g = *grads[p];
    if (!g.same_shape(*params[p].value)) {
      throw std::invalid_argument("Optimizer::step: gradient shape " + g.shape_str() +
                                  " does not match parameter '" + params[p].name + "' " +
                                  params[p].value->shape_str());
    }
    if (!g.all_finite()) {
      throw std::runtime_error("Optimizer::step: non-finite gradient for parameter '" +
                               params[p].name + "'");
    }
  }

  if (kind_ == Kind::sgd) {
    if (sgd_.momentum != 0.0 && velocity_.empty()) {
      velocity_.resize(params.size());
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity_[p].assign(params[p].value->data.size(), 0.0);
      }
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      std::vector<double>& w = params[p].value->data;
      const std::vector<double>& g = grads[p]->data;
      if (sgd_.momentum == 0.0) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= sgd_.lr * g[i];
      } else {
        std::vector<double>& vel = velocity_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          vel[i] = sgd_.momentum * vel[i] + g[i];
          w[i] -= sgd_.lr * vel[i];
        }
      }
    }
    return;
  }

  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      m_[p].assign(params[p].value->data.size(), 0.0);
      v_[p].assign(params[p].value->data.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& w = params[p].value->data;
    const std::vector<double>& g = grads[p]->data;
    std::vector<double>& m = m_[p];
    std::vector<double>& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = adam_.beta1 * m[i] + (1.0 - adam_.beta1) * g[i];
      v[i] = adam_.beta2 * v[i] + (1.0 - adam_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= adam_.lr * mhat / (std::sqrt(vhat) + adam_.eps);
    }
  }
}

}  // namespace galforge
