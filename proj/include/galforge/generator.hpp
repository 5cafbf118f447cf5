#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "galforge/embedding.hpp"
#include "galforge/mlp.hpp"
#include "galforge/tape.hpp"
#include "galforge/tensor.hpp"

namespace galforge {

// Variance schedule over T denoising steps. betas[t-1] is beta_t for
// t in [1, T]; alpha_bar[t] is the running product of (1 - beta), with
// alpha_bar[0] == 1.
struct NoiseSchedule {
  std::size_t steps = 0;
  std::vector<double> betas;
  std::vector<double> alpha_bar;

  // beta rises linearly from 1e-4 to 0.02 scaled by 1000/T, clamped to
  // (0, 0.999] so short test schedules stay valid
  static NoiseSchedule linear(std::size_t T);

  double beta(std::size_t t) const { return betas[t - 1]; }
  double abar(std::size_t t) const { return alpha_bar[t]; }
  void validate() const;
};

// 8 sinusoidal features of t/T at doubling frequencies
std::array<double, 8> time_features(std::size_t t, std::size_t T);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise
std::vector<double> forward_diffuse(const NoiseSchedule& schedule, std::span<const double> x0,
                                    std::size_t t, std::span<const double> noise);

// copyable atomic counter so models stay value types
struct CallCounter {
  std::atomic<std::uint64_t> value{0};
  CallCounter() = default;
  CallCounter(const CallCounter& o) : value(o.value.load()) {}
  CallCounter& operator=(const CallCounter& o) {
    value.store(o.value.load());
    return *this;
  }
};

struct GeneratorModel {
  Mlp noise_net;  // input: data_dim + 8 + cond_dim, output: data_dim
  NoiseSchedule schedule;
  std::size_t data_dim = 0;
  std::size_t cond_dim = 0;
  EmbeddingTable table;
  double heldout_mse_before = 0.0;
  double heldout_mse = 0.0;
  mutable CallCounter sample_calls;  // reverse_sample invocations, for audits
};

// All stochastic draws of one reverse trajectory, in draw order: x_T first,
// then the injected noise for each step t = T .. 2 (the final step is
// deterministic). Exposed so reference implementations can replay the same
// trajectory.
struct ReverseNoise {
  std::vector<double> x_start;              // x_T
  std::vector<std::vector<double>> z;       // z[T - t] is the noise used at step t
};
ReverseNoise reverse_noise(std::uint64_t seed, std::size_t T, std::size_t dim);

// The taped tail of a trajectory: condition leaf -> noise net -> x0.
struct LastStepGraph {
  Tape tape;
  NodeId s_node = 0;
  NodeId x0_node = 0;
};

struct SampleResult {
  std::vector<double> x0;
  std::optional<LastStepGraph> graph;  // present iff differentiable_last
};

// Ancestral sampling with sigma_t^2 = beta_t and a deterministic final step
// (posterior mean only). Pure function of (model, condition.vector, seed).
// With differentiable_last the final step runs on a tape whose condition
// leaf requires grad; the untaped and taped paths produce identical x0.
// Non-finite values during denoising throw naming the step.
SampleResult reverse_sample(const GeneratorModel& model, const Condition& condition,
                            std::uint64_t seed, bool differentiable_last);

struct PretrainSet {
  std::vector<double> xs;  // row-major n x d
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<int> labels;
  std::vector<int> templates;
};

struct GenPretrainConfig {
  std::size_t steps = 6000;
  std::size_t batch = 128;
  double lr = 1e-3;
  double cond_jitter = 0.1;        // std of the condition noise during training
  double holdout_fraction = 0.05;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t T = 50;
  std::uint64_t seed = 1;
};

// Denoising-MSE training of the noise net on (x, class, template) triples,
// conditions jittered with N(0, jitter^2 I). Reports held-out MSE before and
// after training on the model.
GeneratorModel pretrain_generator(const PretrainSet& data, const EmbeddingTable& table,
                                  const GenPretrainConfig& config);

// GLT1 round-trip of net, schedule and embedding table
void save_generator(const std::filesystem::path& path, const GeneratorModel& model);
GeneratorModel load_generator(const std::filesystem::path& path);

}  // namespace galforge
