#include "galforge/embedding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "galforge/rng.hpp"

namespace galforge {

namespace {

// cos of the minimum angular separation enforced between class embeddings;
// |dot| above this triggers a resample
constexpr double kMaxAbsDot = 0.9;
constexpr int kMaxRejections = 100000;

std::vector<double> unit_vector(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm_sq += x * x;
    }
  } while (norm_sq == 0.0);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("l2_distance: dimension mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

EmbeddingTable EmbeddingTable::build(std::size_t classes, std::size_t cond_dim,
                                     std::size_t templates, std::uint64_t seed) {
  if (classes == 0 || cond_dim == 0 || templates == 0) {
    throw std::invalid_argument("EmbeddingTable::build: classes, cond_dim and templates must be positive");
  }
  EmbeddingTable table;
  Rng class_rng(seed_mix(seed, 0x7761));
  int rejections = 0;
  while (table.class_embeddings.size() < classes) {
    std::vector<double> candidate = unit_vector(cond_dim, class_rng);
    bool separated = true;
    for (const auto& existing : table.class_embeddings) {
      if (std::abs(dot(candidate, existing)) > kMaxAbsDot) {
        separated = false;
        break;
      }
    }
    if (separated) {
      table.class_embeddings.push_back(std::move(candidate));
    } else if (++rejections > kMaxRejections) {
      throw std::runtime_error("EmbeddingTable::build: cannot separate " +
                               std::to_string(classes) + " classes in dimension " +
                               std::to_string(cond_dim));
    }
  }

  double mean_dist = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < classes; ++i) {
    for (std::size_t j = i + 1; j < classes; ++j) {
      mean_dist += l2_distance(table.class_embeddings[i], table.class_embeddings[j]);
      ++pairs;
    }
  }
  mean_dist = pairs ? mean_dist / static_cast<double>(pairs) : 0.0;

  Rng offset_rng(seed_mix(seed, 0x7462));
  const double base_norms[] = {0.0, 0.1, 0.3};
  for (std::size_t k = 0; k < templates; ++k) {
    // beyond the stock three, keep growing the norm ladder by 0.2 steps
    const double rel = k < 3 ? base_norms[k] : 0.3 + 0.2 * static_cast<double>(k - 2);
    if (rel == 0.0) {
      table.template_offsets.emplace_back(cond_dim, 0.0);
      continue;
    }
    std::vector<double> direction = unit_vector(cond_dim, offset_rng);
    for (double& x : direction) x *= rel * mean_dist;
    table.template_offsets.push_back(std::move(direction));
  }
  return table;
}

Condition predefined_condition(const EmbeddingTable& table, int class_id, int template_id) {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= table.classes()) {
    throw std::out_of_range("predefined_condition: class_id " + std::to_string(class_id) +
                            " outside [0, " + std::to_string(table.classes()) + ")");
  }
  if (template_id < 0 || static_cast<std::size_t>(template_id) >= table.templates()) {
    throw std::out_of_range("predefined_condition: template_id " + std::to_string(template_id) +
                            " outside [0, " + std::to_string(table.templates()) + ")");
  }
  Condition c;
  c.class_id = class_id;
  c.template_id = template_id;
  c.anchor = table.class_embeddings[static_cast<std::size_t>(class_id)];
  const auto& offset = table.template_offsets[static_cast<std::size_t>(template_id)];
  for (std::size_t i = 0; i < c.anchor.size(); ++i) c.anchor[i] += offset[i];
  c.vector = c.anchor;
  return c;
}

std::vector<double> project_to_ball(const std::vector<double>& s,
                                    const std::vector<double>& center, double epsilon) {
  if (s.size() != center.size()) {
    throw std::invalid_argument("project_to_ball: dimension mismatch " +
                                std::to_string(s.size()) + " vs " + std::to_string(center.size()));
  }
  if (!(epsilon >= 0.0)) {
    throw std::invalid_argument("project_to_ball: epsilon must be >= 0, got " +
                                std::to_string(epsilon));
  }
  double dist_sq = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s[i] - center[i];
    dist_sq += d * d;
  }
  if (dist_sq <= epsilon * epsilon) return s;
  if (epsilon == 0.0) return center;

  double factor = epsilon / std::sqrt(dist_sq);
  std::vector<double> out(s.size());
  // shrink by ulps until the rounded result lands inside the ball, so a
  // second projection returns it unchanged bit-for-bit
  while (true) {
    double check = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      out[i] = center[i] + (s[i] - center[i]) * factor;
      const double d = out[i] - center[i];
      check += d * d;
    }
    if (check <= epsilon * epsilon) return out;
    factor = std::nextafter(factor, 0.0);
  }
}

}  // namespace galforge
