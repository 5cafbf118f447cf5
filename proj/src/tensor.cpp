#include "galforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace galforge {

namespace {

std::string describe(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": unsupported shape " + a.shape_str());
}

}  // namespace

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("Tensor: data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shp) {
  Tensor t;
  t.shape = std::move(shp);
  t.data.assign(shape_numel(t.shape), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shp, double v) {
  Tensor t = zeros(std::move(shp));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  Tensor t;
  t.shape = {1, values.size()};
  t.data.assign(values.begin(), values.end());
  return t;
}

Tensor Tensor::vec(std::span<const double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data.assign(values.begin(), values.end());
  return t;
}

std::size_t Tensor::numel() const { return shape_numel(shape); }

std::string Tensor::shape_str() const { return describe(shape); }

double& Tensor::at(std::size_t i, std::size_t j) {
  return data[i * shape[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data[i * shape[1] + j];
}

std::span<const double> Tensor::row_span(std::size_t i) const {
  const std::size_t cols = shape.back();
  return {data.data() + i * cols, cols};
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2) shape_error("matmul", a, b);
  if (a.rank() == 1) {
    if (a.shape[0] != b.shape[0]) shape_error("matmul", a, b);
    const std::size_t k = b.shape[0], m = b.shape[1];
    Tensor out = Tensor::zeros({m});
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a.data[l];
      const double* brow = b.data.data() + l * m;
      for (std::size_t j = 0; j < m; ++j) out.data[j] += av * brow[j];
    }
    return out;
  }
  if (a.rank() != 2 || a.shape[1] != b.shape[0]) shape_error("matmul", a, b);
  const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    double* crow = out.data.data() + i * m;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = b.data.data() + l * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error("add", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error("sub", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error("mul", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data) v *= c;
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || x.shape[1] != bias.shape[0]) {
    shape_error("add_bias", x, bias);
  }
  Tensor out = x;
  const std::size_t n = x.shape[0], m = x.shape[1];
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += bias.data[j];
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor tanh(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = std::tanh(v);
  return out;
}

Tensor softmax(const Tensor& a) {
  if (a.rank() != 1 && a.rank() != 2) shape_error("softmax", a);
  const std::size_t cols = a.shape.back();
  if (cols == 0) shape_error("softmax", a);
  const std::size_t rows = a.numel() / cols;
  Tensor out = a;
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = out.data.data() + i * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= total;
  }
  return out;
}

Tensor log(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) {
    if (!(v > 0.0)) {
      throw std::domain_error("log: non-positive element " + std::to_string(v));
    }
    v = std::log(v);
  }
  return out;
}

Tensor sqrt(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) {
    if (v < 0.0) {
      throw std::domain_error("sqrt: negative element " + std::to_string(v));
    }
    v = std::sqrt(v);
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) shape_error("mean", a);
  double total = 0.0;
  for (double v : a.data) total += v;
  return Tensor::scalar(total / static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data) total += v;
  return Tensor::scalar(total);
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 || a.rank() > 2) shape_error("concat", a, b);
  if (a.rank() == 1) {
    Tensor out = Tensor::zeros({a.shape[0] + b.shape[0]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
  }
  if (a.shape[0] != b.shape[0]) shape_error("concat", a, b);
  const std::size_t n = a.shape[0], ma = a.shape[1], mb = b.shape[1];
  Tensor out = Tensor::zeros({n, ma + mb});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data.data() + i * ma, ma, out.data.data() + i * (ma + mb));
    std::copy_n(b.data.data() + i * mb, mb, out.data.data() + i * (ma + mb) + ma);
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t start, std::size_t len) {
  if (a.rank() == 0 || a.rank() > 2) shape_error("slice", a);
  const std::size_t cols = a.shape.back();
  if (start + len > cols) {
    throw std::invalid_argument("slice: window [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") exceeds axis of size " +
                                std::to_string(cols));
  }
  if (a.rank() == 1) {
    Tensor out = Tensor::zeros({len});
    std::copy_n(a.data.data() + start, len, out.data.data());
    return out;
  }
  const std::size_t n = a.shape[0];
  Tensor out = Tensor::zeros({n, len});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data.data() + i * cols + start, len, out.data.data() + i * len);
  }
  return out;
}

Tensor dropout_apply(const Tensor& x, const Tensor& mask) {
  if (!x.same_shape(mask)) shape_error("dropout_apply", x, mask);
  return mul(x, mask);
}

}  // namespace ops

}  // namespace galforge
