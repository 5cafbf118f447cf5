#include "galforge/pools.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

#include "galforge/io_util.hpp"

namespace galforge {

namespace {

int parse_int_field(std::string_view text, const std::string& what) {
  int value = 0;
  const auto* begin = text.data();
  const auto* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw std::invalid_argument("snapshot: bad " + what + " field '" + std::string(text) + "'");
  return value;
}

}  // namespace

std::string snapshot_csv(std::span<const SnapshotRow> rows, std::size_t dim) {
  std::ostringstream out;
  for (std::size_t j = 0; j < dim; ++j) out << "x" << j << ",";
  out << "label,provenance,cycle\n";
  for (const auto& row : rows) {
    if (row.x.size() != dim) throw std::invalid_argument("snapshot: row dimension mismatch");
    for (double v : row.x) out << format_double(v) << ",";
    out << row.label << "," << row.provenance << "," << row.cycle << "\n";
  }
  return out.str();
}

std::size_t snapshot_dim(const std::string& header_line) {
  const auto fields = split(header_line, ',');
  if (fields.size() < 4 || fields[fields.size() - 3] != "label" ||
      fields[fields.size() - 2] != "provenance" || fields[fields.size() - 1] != "cycle")
    throw std::invalid_argument("snapshot: malformed header '" + header_line + "'");
  const std::size_t dim = fields.size() - 3;
  for (std::size_t j = 0; j < dim; ++j)
    if (fields[j] != "x" + std::to_string(j))
      throw std::invalid_argument("snapshot: malformed header '" + header_line + "'");
  return dim;
}

std::vector<SnapshotRow> parse_snapshot_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("snapshot: empty file");
  const std::size_t dim = snapshot_dim(line);
  std::vector<SnapshotRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (fields.size() != dim + 3)
      throw std::invalid_argument("snapshot: wrong field count in line '" + line + "'");
    SnapshotRow row;
    row.x.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) row.x[j] = parse_double(fields[j]);
    row.label = parse_int_field(fields[dim], "label");
    row.provenance = std::string(fields[dim + 1]);
    row.cycle = parse_int_field(fields[dim + 2], "cycle");
    rows.push_back(std::move(row));
  }
  return rows;
}

Pools::Pools(std::vector<double> xs, std::size_t n, std::size_t d)
    : xs_(std::move(xs)), n_(n), d_(d), taken_(n, false) {
  if (d_ == 0) throw std::invalid_argument("pools: zero dimension");
  if (xs_.size() != n_ * d_) throw std::invalid_argument("pools: feature buffer size mismatch");
}

Tensor Pools::unlabeled_features() const {
  Tensor features = Tensor::zeros({unlabeled_count(), d_});
  std::size_t row = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (taken_[i]) continue;
    std::copy_n(xs_.data() + i * d_, d_, features.data.data() + row * d_);
    ++row;
  }
  return features;
}

std::size_t Pools::pool_id_at(std::size_t row) const {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (taken_[i]) continue;
    if (seen == row) return i;
    ++seen;
  }
  throw std::out_of_range("pools: unlabeled row " + std::to_string(row) + " out of range");
}

std::span<const double> Pools::pool_row(std::size_t pool_id) const {
  if (pool_id >= n_) throw std::out_of_range("pools: pool id out of range");
  return {xs_.data() + pool_id * d_, d_};
}

void Pools::move_selected(std::span<const std::size_t> rows,
                          const std::function<int(std::span<const double>)>& oracle, int cycle) {
  if (!oracle) throw std::invalid_argument("pools: null oracle");
  // Resolve every row against the same pre-move view of U, then commit.
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  std::unordered_set<std::size_t> seen;
  for (std::size_t row : rows) {
    const std::size_t id = pool_id_at(row);
    if (!seen.insert(id).second)
      throw std::invalid_argument("pools: duplicate selection of pool id " + std::to_string(id));
    ids.push_back(id);
  }
  for (std::size_t id : ids) {
    taken_[id] = true;
    ++taken_count_;
    labeled_.push_back({id, oracle(pool_row(id)), cycle});
    ++annotations_;
  }
}

void Pools::append_generated(std::span<const double> x, const Condition& condition,
                             double epsilon, int cycle) {
  if (x.size() != d_) throw std::invalid_argument("pools: generated sample dimension mismatch");
  GeneratedEntry entry;
  entry.x.assign(x.begin(), x.end());
  entry.pseudo_label = condition.class_id;
  entry.cycle = cycle;
  entry.condition = condition.vector;
  entry.template_id = condition.template_id;
  entry.epsilon = epsilon;
  generated_.push_back(std::move(entry));
}

void Pools::clear_generated() { generated_.clear(); }

void Pools::drop_labeled_entries() { labeled_.clear(); }

LabeledSet Pools::labeled_set() const {
  LabeledSet set;
  set.d = d_;
  for (const auto& entry : labeled_) set.append(pool_row(entry.pool_id), entry.label);
  return set;
}

LabeledSet Pools::generated_set() const {
  LabeledSet set;
  set.d = d_;
  for (const auto& entry : generated_) set.append(entry.x, entry.pseudo_label);
  return set;
}

LabeledSet Pools::combined_set(bool include_labeled, bool include_generated) const {
  LabeledSet set;
  set.d = d_;
  if (include_labeled)
    for (const auto& entry : labeled_) set.append(pool_row(entry.pool_id), entry.label);
  if (include_generated)
    for (const auto& entry : generated_) set.append(entry.x, entry.pseudo_label);
  return set;
}

std::vector<SnapshotRow> Pools::snapshot_rows() const {
  std::vector<SnapshotRow> rows;
  rows.reserve(labeled_.size() + generated_.size());
  for (const auto& entry : labeled_) {
    SnapshotRow row;
    const auto x = pool_row(entry.pool_id);
    row.x.assign(x.begin(), x.end());
    row.label = entry.label;
    row.provenance = "pool";
    row.cycle = entry.cycle;
    rows.push_back(std::move(row));
  }
  for (const auto& entry : generated_) {
    SnapshotRow row;
    row.x = entry.x;
    row.label = entry.pseudo_label;
    row.provenance = "generated";
    row.cycle = entry.cycle;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace galforge
