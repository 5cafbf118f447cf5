#include "galforge/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "galforge/rng.hpp"

namespace galforge {

namespace {

void check_distribution(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0 + 1e-9)) {
      throw std::invalid_argument("acquisition: probability " + std::to_string(v) +
                                  " outside [0, 1]");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("acquisition: probabilities sum to " + std::to_string(total));
  }
}

double entropy_of(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

// squared euclidean between feature rows
double dist_sq(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

std::vector<std::size_t> top_by_score(const std::vector<double>& scores, std::size_t batch_size) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(batch_size);
  return order;
}

std::vector<std::size_t> pick_random(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed_mix(seed, 0x7273));
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch_size);
  return pool;
}

std::vector<std::size_t> pick_kmeans(const Tensor& features, std::size_t batch_size,
                                     std::uint64_t seed) {
  const std::size_t n = features.shape[0];
  const std::size_t f = features.shape[1];
  Rng rng(seed_mix(seed, 0x6b6d));

  // k-means++ seeding
  std::vector<std::vector<double>> centroids;
  centroids.reserve(batch_size);
  {
    const std::size_t first = rng.uniform_int(n);
    centroids.emplace_back(features.row_span(first).begin(), features.row_span(first).end());
  }
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = dist_sq(features.row_span(i), centroids[0]);
  while (centroids.size() < batch_size) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(n);
    }
    centroids.emplace_back(features.row_span(pick).begin(), features.row_span(pick).end());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], dist_sq(features.row_span(i), centroids.back()));
    }
  }

  // Lloyd iterations until assignments settle
  std::vector<std::size_t> assignment(n, 0);
  constexpr int kMaxIters = 30;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < centroids.size(); ++k) {
        const double d = dist_sq(features.row_span(i), centroids[k]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<std::vector<double>> sums(centroids.size(), std::vector<double>(f, 0.0));
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = features.row_span(i);
      for (std::size_t j = 0; j < f; ++j) sums[assignment[i]][j] += row[j];
      ++counts[assignment[i]];
    }
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      if (counts[k] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < f; ++j) {
        centroids[k][j] = sums[k][j] / static_cast<double>(counts[k]);
      }
    }
  }

  // nearest pool point per centroid, skipping already-picked points
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> picks;
  picks.reserve(batch_size);
  for (const auto& centroid : centroids) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = dist_sq(features.row_span(i), centroid);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    taken[best] = true;
    picks.push_back(best);
  }
  return picks;
}

std::vector<std::size_t> pick_coreset(const Tensor& features, std::size_t batch_size,
                                      const Tensor* labeled_features, std::uint64_t seed) {
  const std::size_t n = features.shape[0];
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  bool have_centers = false;
  if (labeled_features && labeled_features->numel() > 0) {
    if (labeled_features->shape[1] != features.shape[1]) {
      throw std::invalid_argument("select_top: labeled feature dim " +
                                  std::to_string(labeled_features->shape[1]) +
                                  " does not match pool feature dim " +
                                  std::to_string(features.shape[1]));
    }
    have_centers = true;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < labeled_features->shape[0]; ++c) {
        min_d[i] = std::min(min_d[i], dist_sq(features.row_span(i), labeled_features->row_span(c)));
      }
    }
  }

  std::vector<bool> taken(n, false);
  std::vector<std::size_t> picks;
  picks.reserve(batch_size);
  for (std::size_t round = 0; round < batch_size; ++round) {
    std::size_t pick = n;
    if (!have_centers && round == 0) {
      Rng rng(seed_mix(seed, 0x6373));
      pick = rng.uniform_int(n);
    } else {
      double best_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (min_d[i] > best_d) {
          best_d = min_d[i];
          pick = i;
        }
      }
    }
    taken[pick] = true;
    picks.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], dist_sq(features.row_span(i), features.row_span(pick)));
    }
  }
  return picks;
}

}  // namespace

AcqKind parse_acq_kind(const std::string& name) {
  if (name == "random") return AcqKind::random;
  if (name == "entropy") return AcqKind::entropy;
  if (name == "margin") return AcqKind::margin;
  if (name == "least_confidence") return AcqKind::least_confidence;
  if (name == "var_ratio") return AcqKind::var_ratio;
  if (name == "mean_std") return AcqKind::mean_std;
  if (name == "bald") return AcqKind::bald;
  if (name == "kmeans") return AcqKind::kmeans;
  if (name == "coreset") return AcqKind::coreset;
  throw std::invalid_argument("parse_acq_kind: unknown kind '" + name + "'");
}

std::string acq_kind_name(AcqKind kind) {
  switch (kind) {
    case AcqKind::random: return "random";
    case AcqKind::entropy: return "entropy";
    case AcqKind::margin: return "margin";
    case AcqKind::least_confidence: return "least_confidence";
    case AcqKind::var_ratio: return "var_ratio";
    case AcqKind::mean_std: return "mean_std";
    case AcqKind::bald: return "bald";
    case AcqKind::kmeans: return "kmeans";
    case AcqKind::coreset: return "coreset";
  }
  throw std::logic_error("acq_kind_name: unknown kind");
}

bool is_score_kind(AcqKind kind) {
  switch (kind) {
    case AcqKind::entropy:
    case AcqKind::margin:
    case AcqKind::least_confidence:
    case AcqKind::var_ratio:
    case AcqKind::mean_std:
    case AcqKind::bald:
      return true;
    default:
      return false;
  }
}

bool is_mc_kind(AcqKind kind) {
  return kind == AcqKind::var_ratio || kind == AcqKind::mean_std || kind == AcqKind::bald;
}

double score_distribution(AcqKind kind, std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("score_distribution: empty distribution");
  check_distribution(p);
  switch (kind) {
    case AcqKind::entropy:
      return entropy_of(p);
    case AcqKind::margin: {
      if (p.size() < 2) throw std::invalid_argument("score_distribution: margin needs >= 2 classes");
      double top1 = -1.0, top2 = -1.0;
      for (double v : p) {
        if (v > top1) {
          top2 = top1;
          top1 = v;
        } else if (v > top2) {
          top2 = v;
        }
      }
      return -(top1 - top2);
    }
    case AcqKind::least_confidence:
      return 1.0 - *std::max_element(p.begin(), p.end());
    case AcqKind::var_ratio:
    case AcqKind::mean_std:
    case AcqKind::bald:
      throw std::invalid_argument("score_distribution: " + acq_kind_name(kind) +
                                  " needs a stack of MC passes");
    default:
      throw std::invalid_argument("score_distribution: " + acq_kind_name(kind) +
                                  " is not a score kind");
  }
}

double score_mc_stack(AcqKind kind, const std::vector<std::vector<double>>& stack) {
  if (!is_score_kind(kind)) {
    throw std::invalid_argument("score_mc_stack: " + acq_kind_name(kind) + " is not a score kind");
  }
  if (!is_mc_kind(kind)) {
    if (stack.size() != 1) {
      throw std::invalid_argument("score_mc_stack: " + acq_kind_name(kind) +
                                  " takes a single distribution");
    }
    return score_distribution(kind, stack.front());
  }
  if (stack.size() < 2) {
    throw std::invalid_argument("score_mc_stack: " + acq_kind_name(kind) +
                                " needs at least 2 MC passes");
  }
  const std::size_t passes = stack.size();
  const std::size_t classes = stack.front().size();
  for (const auto& p : stack) {
    if (p.size() != classes) throw std::invalid_argument("score_mc_stack: ragged stack");
    check_distribution(p);
  }
  std::vector<double> mean_p(classes, 0.0);
  for (const auto& p : stack) {
    for (std::size_t c = 0; c < classes; ++c) mean_p[c] += p[c];
  }
  for (double& v : mean_p) v /= static_cast<double>(passes);

  switch (kind) {
    case AcqKind::var_ratio:
      return 1.0 - *std::max_element(mean_p.begin(), mean_p.end());
    case AcqKind::mean_std: {
      double acc = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        double sq = 0.0;
        for (const auto& p : stack) sq += p[c] * p[c];
        sq /= static_cast<double>(passes);
        const double var = sq - mean_p[c] * mean_p[c];
        acc += std::sqrt(std::max(var, 0.0));
      }
      return acc / static_cast<double>(classes);
    }
    case AcqKind::bald: {
      double mean_h = 0.0;
      for (const auto& p : stack) mean_h += entropy_of(p);
      mean_h /= static_cast<double>(passes);
      return entropy_of(mean_p) - mean_h;
    }
    default:
      throw std::logic_error("score_mc_stack: unreachable");
  }
}

std::vector<double> score_pool(const AcquisitionFn& fn, const ClassifierModel& model,
                               const Tensor& pool_xs) {
  if (!is_score_kind(fn.kind)) {
    throw std::invalid_argument("score_pool: " + acq_kind_name(fn.kind) + " is not a score kind");
  }
  const std::size_t n = pool_xs.shape[0];
  std::vector<double> scores(n);
  if (!is_mc_kind(fn.kind)) {
    const Tensor probs = model.predict_proba(pool_xs);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = score_distribution(fn.kind, probs.row_span(i));
    }
    return scores;
  }
  const std::vector<Tensor> passes = model.mc_predict(pool_xs, fn.mc_passes, fn.seed);
  std::vector<std::vector<double>> stack(passes.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t pass = 0; pass < passes.size(); ++pass) {
      const auto row = passes[pass].row_span(i);
      stack[pass].assign(row.begin(), row.end());
    }
    scores[i] = score_mc_stack(fn.kind, stack);
  }
  return scores;
}

std::vector<std::size_t> select_top(const AcquisitionFn& fn, const ClassifierModel& model,
                                    const Tensor& pool_xs, std::size_t batch_size,
                                    const Tensor* labeled_features) {
  if (pool_xs.rank() != 2) {
    throw std::invalid_argument("select_top: pool must be rank-2, got " + pool_xs.shape_str());
  }
  const std::size_t n = pool_xs.shape[0];
  if (batch_size > n) {
    throw std::invalid_argument("select_top: batch " + std::to_string(batch_size) +
                                " exceeds pool of " + std::to_string(n));
  }
  if (batch_size == 0) return {};
  switch (fn.kind) {
    case AcqKind::random:
      return pick_random(n, batch_size, fn.seed);
    case AcqKind::kmeans:
      return pick_kmeans(model.features(pool_xs), batch_size, fn.seed);
    case AcqKind::coreset:
      return pick_coreset(model.features(pool_xs), batch_size, labeled_features, fn.seed);
    default:
      return top_by_score(score_pool(fn, model, pool_xs), batch_size);
  }
}

}  // namespace galforge
