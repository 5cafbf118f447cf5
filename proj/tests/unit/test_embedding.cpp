#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "galforge/embedding.hpp"
#include "galforge/rng.hpp"

using namespace galforge;

namespace {

double norm_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE_BEGIN("embedding");

TEST_CASE("build is deterministic in the seed") {
  const EmbeddingTable a = EmbeddingTable::build(5, 6, 3, 99);
  const EmbeddingTable b = EmbeddingTable::build(5, 6, 3, 99);
  CHECK(a.class_embeddings == b.class_embeddings);
  CHECK(a.template_offsets == b.template_offsets);
  const EmbeddingTable c = EmbeddingTable::build(5, 6, 3, 100);
  CHECK(a.class_embeddings != c.class_embeddings);
}

TEST_CASE("class embeddings are unit norm and separated") {
  const EmbeddingTable table = EmbeddingTable::build(8, 8, 2, 1);
  CHECK(table.classes() == 8);
  CHECK(table.cond_dim() == 8);
  for (const auto& e : table.class_embeddings)
    CHECK(norm_of(e) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j) {
      double dist = 0.0;
      for (std::size_t k = 0; k < 8; ++k) {
        const double d = table.class_embeddings[i][k] - table.class_embeddings[j][k];
        dist += d * d;
      }
      CHECK(std::sqrt(dist) > 0.1);
    }
}

TEST_CASE("template offset zero is exactly zero") {
  const EmbeddingTable table = EmbeddingTable::build(4, 5, 3, 2);
  CHECK(table.templates() == 3);
  for (double v : table.template_offsets[0]) CHECK(v == 0.0);
  CHECK(norm_of(table.template_offsets[1]) > 0.0);
}

TEST_CASE("predefined_condition sums class embedding and offset") {
  const EmbeddingTable table = EmbeddingTable::build(4, 5, 2, 3);
  const Condition c = predefined_condition(table, 2, 1);
  CHECK(c.class_id == 2);
  CHECK(c.template_id == 1);
  CHECK(c.vector == c.anchor);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(c.anchor[k] ==
          doctest::Approx(table.class_embeddings[2][k] + table.template_offsets[1][k])
              .epsilon(1e-15));
  CHECK_THROWS_AS(predefined_condition(table, 4, 0), std::out_of_range);
  CHECK_THROWS_AS(predefined_condition(table, 0, 2), std::out_of_range);
  CHECK_THROWS_AS(predefined_condition(table, -1, 0), std::out_of_range);
}

TEST_CASE("projection leaves interior points untouched bit-for-bit") {
  const std::vector<double> center{1.0, -2.0, 0.5};
  const std::vector<double> inside{1.05, -2.05, 0.55};
  CHECK(project_to_ball(inside, center, 1.0) == inside);
}

TEST_CASE("projection lands on the sphere for outside points") {
  const std::vector<double> center{0.0, 0.0};
  const std::vector<double> outside{3.0, 4.0};
  const std::vector<double> projected = project_to_ball(outside, center, 1.0);
  CHECK(l2_distance(projected, center) == doctest::Approx(1.0).epsilon(1e-12));
  // direction preserved
  CHECK(projected[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(projected[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("projection fuzz: contraction and bit-exact idempotence") {
  Rng rng(123);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t dim = 1 + rng.uniform_int(8);
    std::vector<double> center(dim), point(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      center[k] = rng.uniform(-5.0, 5.0);
      point[k] = rng.uniform(-5.0, 5.0);
    }
    const double eps = rng.uniform_int(10) == 0 ? 0.0 : rng.uniform(0.0, 3.0);
    const std::vector<double> once = project_to_ball(point, center, eps);
    CHECK(l2_distance(once, center) <= eps + 1e-9);
    CHECK(project_to_ball(once, center, eps) == once);
  }
}

TEST_CASE("projection rejects bad inputs") {
  CHECK_THROWS_AS(project_to_ball({1.0}, {0.0}, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(project_to_ball({1.0, 2.0}, {0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("epsilon zero collapses to the center") {
  const std::vector<double> center{2.0, 3.0};
  const std::vector<double> away{10.0, -10.0};
  CHECK(project_to_ball(away, center, 0.0) == center);
}

TEST_SUITE_END();
