#pragma once

#include <cstdint>
#include <vector>

namespace galforge {

// A generator condition: the live vector plus the anchor it is tethered to
// and the (class, template) pair that produced the anchor.
struct Condition {
  std::vector<double> vector;
  std::vector<double> anchor;
  int class_id = -1;
  int template_id = -1;
};

// Frozen condition vocabulary: one unit-norm embedding per class plus a
// small set of shared template offsets. Built once per world and persisted
// with the generator so optimized conditions stay on its learned manifold.
struct EmbeddingTable {
  std::vector<std::vector<double>> class_embeddings;  // C x cond_dim
  std::vector<std::vector<double>> template_offsets;  // K x cond_dim

  std::size_t classes() const { return class_embeddings.size(); }
  std::size_t templates() const { return template_offsets.size(); }
  std::size_t cond_dim() const {
    return class_embeddings.empty() ? 0 : class_embeddings.front().size();
  }

  // Class rows are rejection-sampled on the unit hypersphere so no two are
  // closer than a fixed angular floor. Offset k has norm
  // {0, 0.1, 0.3, ...}[k] times the mean inter-class distance, in a seeded
  // random direction; offset 0 is exactly zero.
  static EmbeddingTable build(std::size_t classes, std::size_t cond_dim, std::size_t templates,
                              std::uint64_t seed);
};

// anchor for class y under template tau: e_y + t_tau
Condition predefined_condition(const EmbeddingTable& table, int class_id, int template_id);

// Euclidean projection of s onto the closed ball of radius epsilon around
// center. Idempotent bit-for-bit: the result re-projects to itself.
// epsilon < 0 or dimension mismatch throws.
std::vector<double> project_to_ball(const std::vector<double>& s,
                                    const std::vector<double>& center, double epsilon);

double l2_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace galforge
