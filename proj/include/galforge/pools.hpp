#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "galforge/classifier.hpp"
#include "galforge/embedding.hpp"
#include "galforge/tensor.hpp"

namespace galforge {

// One line of the dataset snapshot format:
// "x0,...,x{d-1},label,provenance,cycle" with shortest round-trip decimals.
struct SnapshotRow {
  std::vector<double> x;
  int label = 0;
  std::string provenance;
  int cycle = 0;
};

std::string snapshot_csv(std::span<const SnapshotRow> rows, std::size_t dim);
std::vector<SnapshotRow> parse_snapshot_csv(const std::string& text);
std::size_t snapshot_dim(const std::string& header_line);

struct LabeledEntry {
  std::size_t pool_id = 0;
  int label = 0;
  int cycle = 0;
};

struct GeneratedEntry {
  std::vector<double> x;
  int pseudo_label = 0;
  int cycle = 0;
  std::vector<double> condition;  // the optimized condition that produced x
  int template_id = 0;
  double epsilon = 0.0;
};

// Unlabeled pool U, cumulative labeled set L, generated set G. Selection only
// ever sees U's features; labels enter L through the oracle callback.
class Pools {
 public:
  Pools(std::vector<double> xs, std::size_t n, std::size_t d);

  std::size_t dim() const { return d_; }
  std::size_t pool_size() const { return n_; }
  std::size_t unlabeled_count() const { return n_ - taken_count_; }
  std::size_t labeled_count() const { return labeled_.size(); }
  std::size_t generated_count() const { return generated_.size(); }
  std::size_t annotations() const { return annotations_; }

  // features of U, rows ordered by ascending pool id
  Tensor unlabeled_features() const;
  std::size_t pool_id_at(std::size_t row) const;
  std::span<const double> pool_row(std::size_t pool_id) const;

  // Labels the given U rows (indices into unlabeled_features' current order)
  // through the oracle and moves them into L. Duplicates and out-of-range
  // rows are hard errors; the annotation counter grows by rows.size().
  void move_selected(std::span<const std::size_t> rows,
                     const std::function<int(std::span<const double>)>& oracle, int cycle);

  // Appends a generated sample; its pseudo-label is the condition's class id
  // and the annotation counter is untouched.
  void append_generated(std::span<const double> x, const Condition& condition, double epsilon,
                        int cycle);

  void clear_generated();
  // keeps annotation accounting and U membership, drops L's entries; supports
  // the variant where the labeled set is rebuilt each cycle
  void drop_labeled_entries();

  const std::vector<LabeledEntry>& labeled() const { return labeled_; }
  const std::vector<GeneratedEntry>& generated() const { return generated_; }

  LabeledSet labeled_set() const;
  LabeledSet generated_set() const;
  LabeledSet combined_set(bool include_labeled, bool include_generated) const;

  // L rows then G rows, in append order
  std::vector<SnapshotRow> snapshot_rows() const;

 private:
  std::vector<double> xs_;
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<bool> taken_;
  std::size_t taken_count_ = 0;
  std::vector<LabeledEntry> labeled_;
  std::vector<GeneratedEntry> generated_;
  std::size_t annotations_ = 0;
};

}  // namespace galforge
