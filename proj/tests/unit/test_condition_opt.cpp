#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "galforge/condition_opt.hpp"
#include "galforge/rng.hpp"
#include "support/oracles.hpp"
#include "support/tiny_fixture.hpp"

using namespace galforge;

namespace {

TextOptConfig opt_config(double epsilon) {
  TextOptConfig config;
  config.epsilon = epsilon;
  config.steps = 6;
  config.samples = 4;
  config.sigma = AcquisitionFn{AcqKind::entropy, 5, 0};
  return config;
}

// generator with a very short chain, where the final step carries most of
// the signal, so the single-step estimator should track the full gradient
const GeneratorModel& t3_generator() {
  static const GeneratorModel model = [] {
    GenPretrainConfig config;
    config.steps = 400;
    config.batch = 64;
    config.hidden = {24, 24};
    config.T = 3;
    config.cond_jitter = 0.05;
    config.seed = 13;
    return pretrain_generator(pretrain_set(fixture::tiny_world()), fixture::tiny_world().table,
                              config);
  }();
  return model;
}

// mean over trajectories of sigma(classifier(x0(s))) for the same seeds the
// estimator consumes, evaluated by re-sampling at a shifted condition
double mc_objective(const std::vector<double>& s, const GeneratorModel& generator,
                    const ClassifierModel& classifier, const AcquisitionFn& sigma,
                    std::size_t samples, std::uint64_t seed) {
  Condition condition;
  condition.vector = s;
  condition.anchor = s;
  condition.class_id = 0;
  condition.template_id = 0;
  double total = 0.0;
  for (std::size_t j = 0; j < samples; ++j) {
    const SampleResult out =
        reverse_sample(generator, condition, grad_sample_seed(seed, j), false);
    const Tensor p = classifier.predict_proba(Tensor::row(out.x0));
    std::vector<double> row(p.data.begin(), p.data.end());
    total += score_distribution(sigma.kind, row);
  }
  return total / static_cast<double>(samples);
}

}  // namespace

TEST_SUITE_BEGIN("condition_opt");

TEST_CASE("epsilon schedule ramps 0 -> eps_max and validates the cycle") {
  CHECK(epsilon_schedule(1, 10, 0.5) == 0.0);
  CHECK(epsilon_schedule(5, 10, 0.5) == doctest::Approx(0.5 * 4.0 / 9.0).epsilon(1e-12));
  CHECK(epsilon_schedule(10, 10, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(epsilon_schedule(1, 1, 0.5) == 0.0);
  CHECK(epsilon_schedule(3, 4, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(epsilon_schedule(0, 10, 0.5), std::out_of_range);
  CHECK_THROWS_AS(epsilon_schedule(11, 10, 0.5), std::out_of_range);
}

TEST_CASE("estimator direction tracks full-chain finite differences at T=3") {
  // The estimator differentiates sigma over only the final denoising step;
  // the oracle differentiates the whole chain by central differences with
  // identical noise seeds. At T=3 the directions should mostly agree.
  const GeneratorModel& generator = t3_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  AcquisitionFn sigma{AcqKind::entropy, 5, 0};

  int positive = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed_mix(555, trial));
    Condition c = predefined_condition(generator.table, static_cast<int>(rng.uniform_int(3)), 0);
    for (double& v : c.vector) v += 0.05 * rng.normal();

    const auto grads =
        estimate_grad_samples(c.vector, generator, classifier, sigma, 4, seed_mix(66, trial));
    std::vector<double> mean_grad(c.vector.size(), 0.0);
    for (const auto& g : grads)
      for (std::size_t k = 0; k < g.size(); ++k) mean_grad[k] += g[k] / 4.0;

    const auto objective = [&](const std::vector<double>& s) {
      return mc_objective(s, generator, classifier, sigma, 4, seed_mix(66, trial));
    };
    const std::vector<double> fd = oracles::fd_gradient(objective, c.vector, 1e-5);
    if (oracles::cosine(mean_grad, fd) > 0.0) ++positive;
  }
  CHECK(positive >= trials * 3 / 4);
}

TEST_CASE("estimate_grad_samples grows by prefix as k grows") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  AcquisitionFn sigma{AcqKind::entropy, 5, 0};
  const Condition c = predefined_condition(generator.table, 1, 0);
  const auto small = estimate_grad_samples(c.vector, generator, classifier, sigma, 2, 42);
  const auto large = estimate_grad_samples(c.vector, generator, classifier, sigma, 5, 42);
  REQUIRE(small.size() == 2);
  REQUIRE(large.size() == 5);
  CHECK(small[0] == large[0]);
  CHECK(small[1] == large[1]);
}

TEST_CASE("chain factor scales the mean gradient without changing signs") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const Condition c = predefined_condition(generator.table, 0, 0);
  TextOptConfig with = opt_config(0.4);
  TextOptConfig without = opt_config(0.4);
  without.apply_chain_factor = false;
  const auto g_with = estimate_grad(c.vector, generator, classifier, with, 5);
  const auto g_without = estimate_grad(c.vector, generator, classifier, without, 5);
  REQUIRE(g_with.size() == g_without.size());
  const double T = static_cast<double>(generator.schedule.steps);
  for (std::size_t k = 0; k < g_with.size(); ++k)
    CHECK(g_with[k] == doctest::Approx(T * g_without[k]).epsilon(1e-12));
}

TEST_CASE("text_opt result stays inside the epsilon ball") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  for (double eps : {0.1, 0.3, 0.8}) {
    const Condition anchor = predefined_condition(generator.table, 2, 0);
    const Condition out = text_opt(anchor, opt_config(eps), generator, classifier, 91);
    CHECK(l2_distance(out.vector, anchor.anchor) <= eps + 1e-9);
    CHECK(out.anchor == anchor.anchor);
    CHECK(out.class_id == anchor.class_id);
    CHECK(out.template_id == anchor.template_id);
  }
}

TEST_CASE("text_opt is deterministic in the seed") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const Condition anchor = predefined_condition(generator.table, 0, 0);
  const Condition a = text_opt(anchor, opt_config(0.5), generator, classifier, 17);
  const Condition b = text_opt(anchor, opt_config(0.5), generator, classifier, 17);
  CHECK(a.vector == b.vector);
  const Condition c = text_opt(anchor, opt_config(0.5), generator, classifier, 18);
  CHECK(a.vector != c.vector);
}

TEST_CASE("epsilon zero returns the anchor without touching the generator") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const Condition anchor = predefined_condition(generator.table, 1, 0);
  generator.sample_calls.value.store(0);
  const Condition out = text_opt(anchor, opt_config(0.0), generator, classifier, 3);
  CHECK(out.vector == anchor.anchor);
  CHECK(generator.sample_calls.value.load() == 0);
}

TEST_CASE("random sigma skips optimization entirely") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const Condition anchor = predefined_condition(generator.table, 1, 0);
  TextOptConfig config = opt_config(0.5);
  config.sigma.kind = AcqKind::random;
  generator.sample_calls.value.store(0);
  const Condition out = text_opt(anchor, config, generator, classifier, 3);
  CHECK(out.vector == anchor.anchor);
  CHECK(generator.sample_calls.value.load() == 0);
}

TEST_CASE("chain-factor toggle leaves text_opt output bit-identical") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const Condition anchor = predefined_condition(generator.table, 2, 1);
  TextOptConfig with = opt_config(0.5);
  TextOptConfig without = opt_config(0.5);
  without.apply_chain_factor = false;
  const Condition a = text_opt(anchor, with, generator, classifier, 29);
  const Condition b = text_opt(anchor, without, generator, classifier, 29);
  CHECK(a.vector == b.vector);
}

TEST_CASE("selection-only sigmas are rejected for optimization") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const Condition anchor = predefined_condition(generator.table, 0, 0);
  TextOptConfig config = opt_config(0.5);
  config.sigma.kind = AcqKind::coreset;
  CHECK_THROWS_AS(text_opt(anchor, config, generator, classifier, 1), std::invalid_argument);
  config.sigma.kind = AcqKind::kmeans;
  CHECK_THROWS_AS(text_opt(anchor, config, generator, classifier, 1), std::invalid_argument);
}

TEST_CASE("optimized conditions raise sigma on average over seeds") {
  const GeneratorModel& generator = fixture::tiny_generator();
  const ClassifierModel& classifier = fixture::tiny_classifier();
  AcquisitionFn sigma{AcqKind::entropy, 5, 0};
  double opt_total = 0.0, anchor_total = 0.0;
  const int seeds = 12, draws = 4;
  for (int s = 0; s < seeds; ++s) {
    const Condition anchor = predefined_condition(generator.table, s % 3, 0);
    const Condition tuned = text_opt(anchor, opt_config(0.6), generator, classifier,
                                     seed_mix(1000, s));
    for (int j = 0; j < draws; ++j) {
      const std::uint64_t draw_seed = seed_mix(2000, s, j);
      opt_total += score_distribution(
          sigma.kind,
          [&] {
            const Tensor p = classifier.predict_proba(
                Tensor::row(reverse_sample(generator, tuned, draw_seed, false).x0));
            return std::vector<double>(p.data.begin(), p.data.end());
          }());
      anchor_total += score_distribution(
          sigma.kind,
          [&] {
            const Tensor p = classifier.predict_proba(
                Tensor::row(reverse_sample(generator, anchor, draw_seed, false).x0));
            return std::vector<double>(p.data.begin(), p.data.end());
          }());
    }
  }
  CHECK(opt_total > anchor_total);
}

TEST_CASE("sigma_of_point: plain kinds are seed-independent, MC kinds seeded") {
  const ClassifierModel& classifier = fixture::tiny_classifier();
  const std::vector<double> x{0.2, -0.4};
  AcquisitionFn entropy{AcqKind::entropy, 5, 0};
  CHECK(sigma_of_point(entropy, classifier, x, 1) == sigma_of_point(entropy, classifier, x, 2));
  AcquisitionFn bald{AcqKind::bald, 5, 0};
  CHECK(sigma_of_point(bald, classifier, x, 7) == sigma_of_point(bald, classifier, x, 7));
}

TEST_SUITE_END();
