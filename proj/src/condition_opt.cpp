#include "galforge/condition_opt.hpp"

#include <cmath>
#include <stdexcept>

#include "galforge/rng.hpp"
#include "galforge/tape.hpp"

namespace galforge {

namespace {

constexpr std::uint64_t kSampleStream = 0x6774;
constexpr std::uint64_t kStepStream = 0x746f;

// sum(mul(p, onehot_j)): the j-th entry of a row as a rank-0 node
NodeId pick_entry(Tape& tape, NodeId row, std::size_t j) {
  const Tensor& value = tape.value(row);
  Tensor onehot = Tensor::zeros(value.shape);
  onehot.data[j] = 1.0;
  return tape.sum(tape.mul(row, tape.leaf(std::move(onehot))));
}

NodeId entropy_node(Tape& tape, NodeId p) {
  return tape.scale(tape.sum(tape.mul(p, tape.log(p))), -1.0);
}

// sigma(classifier(x0)) on the trajectory's tape, mirroring sigma_of_point
NodeId build_sigma(Tape& tape, NodeId x0, const ClassifierModel& classifier,
                   const AcquisitionFn& sigma, std::uint64_t seed) {
  const Mlp::TapeNodes params = classifier.net.bind(tape, false);
  if (!is_mc_kind(sigma.kind)) {
    const NodeId p = tape.softmax(classifier.net.forward_on_tape(tape, params, x0));
    switch (sigma.kind) {
      case AcqKind::entropy:
        return entropy_node(tape, p);
      case AcqKind::margin: {
        const Tensor& probs = tape.value(p);
        std::size_t top1 = 0, top2 = 1;
        if (probs.data.size() < 2) {
          throw std::invalid_argument("build_sigma: margin needs >= 2 classes");
        }
        if (probs.data[1] > probs.data[0]) std::swap(top1, top2);
        for (std::size_t j = 2; j < probs.data.size(); ++j) {
          if (probs.data[j] > probs.data[top1]) {
            top2 = top1;
            top1 = j;
          } else if (probs.data[j] > probs.data[top2]) {
            top2 = j;
          }
        }
        return tape.sub(pick_entry(tape, p, top2), pick_entry(tape, p, top1));
      }
      case AcqKind::least_confidence: {
        const Tensor& probs = tape.value(p);
        const std::size_t top = argmax_lowest(probs.data);
        return tape.sub(tape.leaf(Tensor::scalar(1.0)), pick_entry(tape, p, top));
      }
      default:
        throw std::invalid_argument("build_sigma: " + acq_kind_name(sigma.kind) +
                                    " cannot drive the condition optimizer");
    }
  }

  // MC kinds: fn.mc_passes dropout passes with the same masks mc_predict uses
  if (sigma.mc_passes < 2) {
    throw std::invalid_argument("build_sigma: MC sigma needs at least 2 passes");
  }
  const double inv_passes = 1.0 / static_cast<double>(sigma.mc_passes);
  std::vector<NodeId> pass_p;
  for (std::size_t pass = 0; pass < sigma.mc_passes; ++pass) {
    const std::vector<Tensor> masks = classifier.mc_masks(1, pass, seed);
    std::vector<NodeId> mask_nodes;
    mask_nodes.reserve(masks.size());
    for (const Tensor& m : masks) mask_nodes.push_back(tape.leaf(m));
    pass_p.push_back(
        tape.softmax(classifier.net.forward_on_tape(tape, params, x0, &mask_nodes)));
  }
  NodeId sum_p = pass_p[0];
  for (std::size_t pass = 1; pass < pass_p.size(); ++pass) sum_p = tape.add(sum_p, pass_p[pass]);
  const NodeId mean_p = tape.scale(sum_p, inv_passes);

  switch (sigma.kind) {
    case AcqKind::var_ratio: {
      const std::size_t top = argmax_lowest(tape.value(mean_p).data);
      return tape.sub(tape.leaf(Tensor::scalar(1.0)), pick_entry(tape, mean_p, top));
    }
    case AcqKind::mean_std: {
      NodeId sum_sq = tape.mul(pass_p[0], pass_p[0]);
      for (std::size_t pass = 1; pass < pass_p.size(); ++pass) {
        sum_sq = tape.add(sum_sq, tape.mul(pass_p[pass], pass_p[pass]));
      }
      const NodeId mean_sq = tape.scale(sum_sq, inv_passes);
      // relu clamps the tiny negative variances rounding can produce
      const NodeId var = tape.relu(tape.sub(mean_sq, tape.mul(mean_p, mean_p)));
      return tape.mean(tape.sqrt(var));
    }
    case AcqKind::bald: {
      NodeId sum_h = entropy_node(tape, pass_p[0]);
      for (std::size_t pass = 1; pass < pass_p.size(); ++pass) {
        sum_h = tape.add(sum_h, entropy_node(tape, pass_p[pass]));
      }
      return tape.sub(entropy_node(tape, mean_p), tape.scale(sum_h, inv_passes));
    }
    default:
      throw std::logic_error("build_sigma: unreachable");
  }
}

double sgn(double v) {
  if (v > 0.0) return 1.0;
  if (v < 0.0) return -1.0;
  return 0.0;
}

}  // namespace

std::uint64_t grad_sample_seed(std::uint64_t seed, std::size_t j) {
  return seed_mix(seed, kSampleStream, j);
}

std::vector<std::vector<double>> estimate_grad_samples(const std::vector<double>& s,
                                                       const GeneratorModel& generator,
                                                       const ClassifierModel& classifier,
                                                       const AcquisitionFn& sigma,
                                                       std::size_t samples, std::uint64_t seed) {
  if (!is_score_kind(sigma.kind)) {
    throw std::invalid_argument("estimate_grad: " + acq_kind_name(sigma.kind) +
                                " is not a score kind");
  }
  if (samples == 0) throw std::invalid_argument("estimate_grad: samples must be positive");
  if (classifier.spec.input_dim != generator.data_dim) {
    throw std::invalid_argument("estimate_grad: classifier input dim " +
                                std::to_string(classifier.spec.input_dim) +
                                " vs generator data dim " + std::to_string(generator.data_dim));
  }
  Condition cond;
  cond.vector = s;
  std::vector<std::vector<double>> grads;
  grads.reserve(samples);
  for (std::size_t j = 0; j < samples; ++j) {
    const std::uint64_t sample_seed = grad_sample_seed(seed, j);
    SampleResult res = reverse_sample(generator, cond, sample_seed, true);
    Tape& tape = res.graph->tape;
    const NodeId sigma_node =
        build_sigma(tape, res.graph->x0_node, classifier, sigma, sample_seed);
    const Gradients g = tape.backward(sigma_node);
    const Tensor& gs = g.at(res.graph->s_node);
    grads.emplace_back(gs.data.begin(), gs.data.end());
  }
  return grads;
}

std::vector<double> estimate_grad(const std::vector<double>& s, const GeneratorModel& generator,
                                  const ClassifierModel& classifier, const TextOptConfig& config,
                                  std::uint64_t seed) {
  const std::vector<std::vector<double>> samples =
      estimate_grad_samples(s, generator, classifier, config.sigma, config.samples, seed);
  std::vector<double> mean(s.size(), 0.0);
  for (const auto& g : samples) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g[i];
  }
  const double norm = 1.0 / static_cast<double>(samples.size());
  for (double& v : mean) v *= norm;
  if (config.apply_chain_factor) {
    // scaling after the average keeps sgn(grad) identical with the factor
    // on or off
    const double T = static_cast<double>(generator.schedule.steps);
    for (double& v : mean) v *= T;
  }
  return mean;
}

Condition text_opt(const Condition& predefined, const TextOptConfig& config,
                   const GeneratorModel& generator, const ClassifierModel& classifier,
                   std::uint64_t seed) {
  if (predefined.vector != predefined.anchor) {
    throw std::invalid_argument("text_opt: condition must start at its anchor");
  }
  if (config.epsilon < 0.0) {
    throw std::invalid_argument("text_opt: epsilon must be >= 0");
  }
  if (config.sigma.kind == AcqKind::random) return predefined;
  if (!is_score_kind(config.sigma.kind)) {
    throw std::invalid_argument("text_opt: " + acq_kind_name(config.sigma.kind) +
                                " cannot drive condition optimization");
  }
  if (config.epsilon == 0.0) return predefined;

  const double alpha = config.epsilon * config.alpha_ratio;
  Condition current = predefined;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    const std::vector<double> grad = estimate_grad(current.vector, generator, classifier, config,
                                                   seed_mix(seed, kStepStream, step));
    std::vector<double> proposal = current.vector;
    for (std::size_t i = 0; i < proposal.size(); ++i) proposal[i] += alpha * sgn(grad[i]);
    current.vector = project_to_ball(proposal, predefined.anchor, config.epsilon);
  }
  return current;
}

double epsilon_schedule(std::size_t cycle, std::size_t total_cycles, double eps_max) {
  if (cycle < 1 || cycle > total_cycles) {
    throw std::out_of_range("epsilon_schedule: cycle " + std::to_string(cycle) +
                            " outside [1, " + std::to_string(total_cycles) + "]");
  }
  if (eps_max < 0.0) throw std::invalid_argument("epsilon_schedule: eps_max must be >= 0");
  const double denom = static_cast<double>(std::max<std::size_t>(total_cycles - 1, 1));
  return eps_max * static_cast<double>(cycle - 1) / denom;
}

double sigma_of_point(const AcquisitionFn& sigma, const ClassifierModel& classifier,
                      const std::vector<double>& x, std::uint64_t seed) {
  const Tensor row = Tensor::row(x);
  if (!is_mc_kind(sigma.kind)) {
    const Tensor p = classifier.predict_proba(row);
    return score_distribution(sigma.kind, p.row_span(0));
  }
  AcquisitionFn fn = sigma;
  fn.seed = seed;
  const std::vector<Tensor> passes = classifier.mc_predict(row, fn.mc_passes, seed);
  std::vector<std::vector<double>> stack;
  stack.reserve(passes.size());
  for (const Tensor& p : passes) stack.emplace_back(p.data.begin(), p.data.end());
  return score_mc_stack(sigma.kind, stack);
}

}  // namespace galforge
