#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "galforge/classifier.hpp"
#include "galforge/tensor.hpp"

namespace galforge {

// Scores are oriented so higher always means more informative; margin and
// confidence are negated internally to keep that true.
enum class AcqKind {
  random,
  entropy,
  margin,
  least_confidence,
  var_ratio,
  mean_std,
  bald,
  kmeans,
  coreset,
};

AcqKind parse_acq_kind(const std::string& name);
std::string acq_kind_name(AcqKind kind);

// single-distribution kinds: entropy, margin, least_confidence;
// MC kinds (need a stack of passes): var_ratio, mean_std, bald
bool is_score_kind(AcqKind kind);
bool is_mc_kind(AcqKind kind);

struct AcquisitionFn {
  AcqKind kind = AcqKind::entropy;
  std::size_t mc_passes = 10;
  std::uint64_t seed = 0;
};

// entropy with the 0 log 0 = 0 convention; probabilities must be a
// distribution (each in [0,1], summing to 1 within 1e-6)
double score_distribution(AcqKind kind, std::span<const double> p);

// stack[pass][class]; MC kinds need at least 2 passes
double score_mc_stack(AcqKind kind, const std::vector<std::vector<double>>& stack);

// Scores every pool row under fn: single-distribution kinds use
// predict_proba, MC kinds use mc_predict(fn.mc_passes, fn.seed).
std::vector<double> score_pool(const AcquisitionFn& fn, const ClassifierModel& model,
                               const Tensor& pool_xs);

// Returns batch_size row indices of pool_xs in pick order. Score kinds pick
// the highest scores with ties broken toward the lower index; random is a
// seeded uniform draw without replacement; kmeans picks the pool points
// nearest the k-means++/Lloyd centroids of the feature map; coreset runs
// k-center greedy on features seeded from labeled_features (empty labeled
// set: the first pick is seeded-random). batch_size > pool size throws.
std::vector<std::size_t> select_top(const AcquisitionFn& fn, const ClassifierModel& model,
                                    const Tensor& pool_xs, std::size_t batch_size,
                                    const Tensor* labeled_features);

}  // namespace galforge
