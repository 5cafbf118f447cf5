#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace galforge {

// Dense row-major f64 tensor. Rank 0 (shape {}) is a scalar with one element.
// All training math runs in f64 so finite-difference checks are tight.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shp, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shp);
  static Tensor full(std::vector<std::size_t> shp, double v);
  static Tensor scalar(double v);
  static Tensor row(std::span<const double> values);           // shape {1, n}
  static Tensor vec(std::span<const double> values);           // shape {n}

  std::size_t rank() const { return shape.size(); }
  std::size_t numel() const;
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_str() const;

  // rank-2 element access
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  std::span<const double> row_span(std::size_t i) const;
  bool all_finite() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// Forward kernels shared by the untaped fast path and the tape. Shape errors
// throw std::invalid_argument naming the op and both shapes.
namespace ops {

// (n,k)x(k,m)->(n,m) or (k)x(k,m)->(m)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// x: (n,m), bias: (m); adds bias to every row. The only broadcast allowed.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
// rows of rank-2 (or a rank-1 vector) mapped to a probability simplex;
// max-subtracted for stability
Tensor softmax(const Tensor& a);
// elementwise natural log; any element <= 0 throws std::domain_error
Tensor log(const Tensor& a);
// elementwise sqrt; negative elements throw std::domain_error
Tensor sqrt(const Tensor& a);
Tensor mean(const Tensor& a);  // all elements -> rank-0
Tensor sum(const Tensor& a);   // all elements -> rank-0
// join along the last axis; leading dimensions must match
Tensor concat(const Tensor& a, const Tensor& b);
// contiguous [start, start+len) window of the last axis
Tensor slice(const Tensor& a, std::size_t start, std::size_t len);
// elementwise product with a fixed 0/(1/keep) mask; mask carries no gradient
Tensor dropout_apply(const Tensor& x, const Tensor& mask);

}  // namespace ops

}  // namespace galforge
