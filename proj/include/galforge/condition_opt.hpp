#pragma once

#include <cstdint>
#include <vector>

#include "galforge/acquisition.hpp"
#include "galforge/classifier.hpp"
#include "galforge/embedding.hpp"
#include "galforge/generator.hpp"

namespace galforge {

struct TextOptConfig {
  double epsilon = 0.0;       // ball radius around the anchor
  double alpha_ratio = 0.2;   // step size alpha = epsilon * alpha_ratio
  std::size_t steps = 10;     // ascent iterations
  std::size_t samples = 6;    // trajectories per gradient estimate
  AcquisitionFn sigma;        // must be a score kind (or random, which skips)
  // The chain-rule constant T from the single-step estimator. Positive, so
  // it never changes the sign pattern; kept switchable to verify that.
  bool apply_chain_factor = true;
};

// Trajectory seed of gradient sample j: a counter split of the call seed, so
// growing the sample count keeps earlier samples. Part of the contract so
// reference implementations can replay the exact trajectories.
std::uint64_t grad_sample_seed(std::uint64_t seed, std::size_t j);

// Per-trajectory gradients of sigma(classifier(x0)) with respect to the
// condition, via the taped final denoising step. Sample j runs at
// grad_sample_seed(seed, j). No chain factor applied here.
std::vector<std::vector<double>> estimate_grad_samples(const std::vector<double>& s,
                                                       const GeneratorModel& generator,
                                                       const ClassifierModel& classifier,
                                                       const AcquisitionFn& sigma,
                                                       std::size_t samples, std::uint64_t seed);

// Mean of estimate_grad_samples scaled by T (when apply_chain_factor).
std::vector<double> estimate_grad(const std::vector<double>& s, const GeneratorModel& generator,
                                  const ClassifierModel& classifier, const TextOptConfig& config,
                                  std::uint64_t seed);

// Projected sign-ascent on sigma over the epsilon-ball around the anchor of
// `predefined`. epsilon == 0 or sigma == random returns the anchor condition
// untouched without sampling. Every iterate stays inside the ball.
Condition text_opt(const Condition& predefined, const TextOptConfig& config,
                   const GeneratorModel& generator, const ClassifierModel& classifier,
                   std::uint64_t seed);

// Linear ramp 0 -> eps_max over cycles 1..N; cycle outside [1, N] throws.
double epsilon_schedule(std::size_t cycle, std::size_t total_cycles, double eps_max);

// sigma of one generated point under the scoring rules text_opt maximizes
// (predict_proba for plain kinds, seeded mc_predict for MC kinds)
double sigma_of_point(const AcquisitionFn& sigma, const ClassifierModel& classifier,
                      const std::vector<double>& x, std::uint64_t seed);

}  // namespace galforge
