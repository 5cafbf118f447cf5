#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "galforge/embedding.hpp"
#include "galforge/generator.hpp"

namespace galforge {

struct WorldSpec {
  std::string name = "default";
  std::size_t classes = 10;
  std::size_t subclusters = 3;  // islands per class, interleaved on the layout
  std::size_t dim = 6;
  std::string layout = "ring";  // ring | grid, occupying the first two coords
  double class_std = 0.04;      // isotropic per-island std before z-scoring
  double overlap = 1.0;         // multiplies class_std
  std::size_t pretrain_n = 20000;
  std::size_t pool_n = 4000;
  std::size_t test_n = 2000;
  std::size_t cond_dim = 8;
  std::size_t templates = 3;
  std::uint64_t seed = 1;

  // "default": 10-class ring in 6-D; "hard100": 100-class grid in 8-D
  static WorldSpec stock(const std::string& name);
};

struct DataSplit {
  std::vector<double> xs;  // row-major n x d
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<int> ys;
  std::vector<int> taus;  // template assignment, pretrain split only

  std::span<const double> row(std::size_t i) const { return {xs.data() + i * d, d}; }
};

// Equal-weight gaussian mixture world. All coordinates are z-scored by the
// pretrain split's statistics; `means` and `coord_std` live in that z-scored
// space, which makes the true posterior exactly computable. Component k
// belongs to class k % classes: consecutive layout positions cycle through
// the classes, so one class occupies `subclusters` separated islands.
struct World {
  WorldSpec spec;
  std::vector<std::vector<double>> means;  // (classes * subclusters) x d
  std::vector<double> coord_std;           // per-coordinate, shared by components
  DataSplit pretrain;
  DataSplit pool;
  DataSplit test;
  EmbeddingTable table;
  double bayes_ceiling = 0.0;  // oracle accuracy on the test split

  // Bayes-optimal label under the mixture; ties go to the lowest class id.
  // This is the annotation oracle: selection never sees split labels.
  int oracle_label(std::span<const double> x) const;

  std::uint64_t digest() const;  // content hash of spec, parameters and splits
};

World make_world(const WorldSpec& spec);

// argmax_c of the posterior for equal-weight gaussians with shared diagonal
// covariance; ties to the lowest id
int gaussian_posterior_argmax(const std::vector<std::vector<double>>& means,
                              std::span<const double> coord_std, std::span<const double> x);

// class posterior argmax when component k of `component_means` belongs to
// class k % classes; equal component weights, shared diagonal covariance
int mixture_class_argmax(const std::vector<std::vector<double>>& component_means,
                         std::size_t classes, std::span<const double> coord_std,
                         std::span<const double> x);

PretrainSet pretrain_set(const World& world);

// key = value sidecar describing the mixture (spec fields, means, stds,
// bayes ceiling) for human inspection
std::string world_metadata(const World& world);

void save_world(const World& world, const std::filesystem::path& path);
World load_world(const std::filesystem::path& path);

}  // namespace galforge
