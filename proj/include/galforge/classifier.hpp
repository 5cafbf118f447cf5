#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "galforge/mlp.hpp"
#include "galforge/tensor.hpp"

namespace galforge {

// "mlp-<w1>x<w2>..." -> hidden widths; anything else throws
std::vector<std::size_t> parse_architecture(const std::string& architecture_id);

struct ClassifierSpec {
  std::string architecture_id = "mlp-64x64";
  double dropout_rate = 0.1;
  std::size_t input_dim = 0;
  std::size_t classes = 0;
};

struct LabeledSet {
  std::vector<double> xs;  // row-major n x d
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<int> ys;

  void append(std::span<const double> x, int y);
  Tensor features_tensor() const;  // (n, d)
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

struct ClassifierModel {
  ClassifierSpec spec;
  Mlp net;
  double initial_loss = 0.0;  // mean cross-entropy over the set before training
  double final_loss = 0.0;    // and after

  // softmax probabilities, dropout off; xs is (n, input_dim)
  Tensor predict_proba(const Tensor& xs) const;
  // `passes` stochastic forward passes with seeded dropout masks; requires
  // dropout_rate > 0
  std::vector<Tensor> mc_predict(const Tensor& xs, std::size_t passes, std::uint64_t seed) const;
  // the exact masks mc_predict draws for one pass, one per hidden layer
  std::vector<Tensor> mc_masks(std::size_t rows, std::size_t pass, std::uint64_t seed) const;
  // last hidden activations, dropout off
  Tensor features(const Tensor& xs) const;
  // argmax with ties to the lowest class id
  std::vector<int> predict_labels(const Tensor& xs) const;
  double accuracy(const Tensor& xs, std::span<const int> ys) const;
};

// fresh random-initialized model (the cycle-1 scorer)
ClassifierModel init_classifier(const ClassifierSpec& spec, std::uint64_t seed);

// From-scratch Adam training with cross-entropy, seeded shuffles and seeded
// dropout masks; (seed, dataset order) fully determine the result. Empty
// dataset, out-of-range labels, or a non-finite loss throw.
ClassifierModel train_classifier(const ClassifierSpec& spec, const LabeledSet& data,
                                 const TrainConfig& config);

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_classifier(const std::filesystem::path& path);

std::size_t argmax_lowest(std::span<const double> row);

}  // namespace galforge
