#include "galforge/generator.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "galforge/checkpoint.hpp"
#include "galforge/optim.hpp"
#include "galforge/rng.hpp"

namespace galforge {

namespace {

constexpr std::uint64_t kReverseStream = 0x5256;
constexpr std::uint64_t kPretrainStream = 0x5054;
constexpr std::uint64_t kHoldoutStream = 0x484f;

std::vector<double> mu_step(const GeneratorModel& model, const std::vector<double>& x_t,
                            std::size_t t, const std::vector<double>& s) {
  const auto temb = time_features(t, model.schedule.steps);
  std::vector<double> input;
  input.reserve(model.data_dim + temb.size() + model.cond_dim);
  input.insert(input.end(), x_t.begin(), x_t.end());
  input.insert(input.end(), temb.begin(), temb.end());
  input.insert(input.end(), s.begin(), s.end());
  const Tensor eps = model.noise_net.forward(Tensor::vec(input));
  const double beta = model.schedule.beta(t);
  const double abar = model.schedule.abar(t);
  const double eps_coef = beta / std::sqrt(1.0 - abar);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
  std::vector<double> mu(model.data_dim);
  for (std::size_t i = 0; i < model.data_dim; ++i) {
    mu[i] = inv_sqrt_alpha * (x_t[i] - eps_coef * eps.data[i]);
  }
  return mu;
}

void check_finite_step(const std::vector<double>& x, std::size_t t) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("reverse_sample: non-finite value at step t=" + std::to_string(t));
    }
  }
}

}  // namespace

NoiseSchedule NoiseSchedule::linear(std::size_t T) {
  if (T == 0) throw std::invalid_argument("NoiseSchedule::linear: T must be positive");
  NoiseSchedule s;
  s.steps = T;
  const double scale = 1000.0 / static_cast<double>(T);
  const double lo = 1e-4 * scale;
  const double hi = 0.02 * scale;
  // cap keeps 1/sqrt(1-beta) small so short chains stay well-conditioned
  constexpr double kBetaCap = 0.35;
  s.betas.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
    double beta = lo + (hi - lo) * frac;
    if (beta > kBetaCap) beta = kBetaCap;
    s.betas[i] = beta;
  }
  s.alpha_bar.resize(T + 1);
  s.alpha_bar[0] = 1.0;
  for (std::size_t i = 0; i < T; ++i) s.alpha_bar[i + 1] = s.alpha_bar[i] * (1.0 - s.betas[i]);
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (betas.size() != steps || alpha_bar.size() != steps + 1) {
    throw std::runtime_error("NoiseSchedule: inconsistent sizes");
  }
  if (alpha_bar[0] != 1.0) throw std::runtime_error("NoiseSchedule: alpha_bar[0] must be 1");
  for (std::size_t i = 0; i < steps; ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
      throw std::runtime_error("NoiseSchedule: beta out of (0,1) at index " + std::to_string(i));
    }
    if (!(alpha_bar[i + 1] < alpha_bar[i])) {
      throw std::runtime_error("NoiseSchedule: alpha_bar not strictly decreasing at index " +
                               std::to_string(i));
    }
  }
}

std::array<double, 8> time_features(std::size_t t, std::size_t T) {
  const double u = static_cast<double>(t) / static_cast<double>(T);
  std::array<double, 8> f{};
  double freq = std::numbers::pi;
  for (std::size_t i = 0; i < 4; ++i) {
    f[2 * i] = std::sin(freq * u);
    f[2 * i + 1] = std::cos(freq * u);
    freq *= 2.0;
  }
  return f;
}

std::vector<double> forward_diffuse(const NoiseSchedule& schedule, std::span<const double> x0,
                                    std::size_t t, std::span<const double> noise) {
  if (t > schedule.steps) {
    throw std::out_of_range("forward_diffuse: t=" + std::to_string(t) + " exceeds T=" +
                            std::to_string(schedule.steps));
  }
  if (x0.size() != noise.size()) {
    throw std::invalid_argument("forward_diffuse: x0 and noise sizes differ");
  }
  const double abar = schedule.abar(t);
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
  return out;
}

ReverseNoise reverse_noise(std::uint64_t seed, std::size_t T, std::size_t dim) {
  Rng rng(seed_mix(seed, kReverseStream));
  ReverseNoise noise;
  noise.x_start.resize(dim);
  for (double& v : noise.x_start) v = rng.normal();
  if (T >= 2) {
    noise.z.resize(T - 1);
    for (std::size_t i = 0; i < T - 1; ++i) {
      noise.z[i].resize(dim);
      for (double& v : noise.z[i]) v = rng.normal();
    }
  }
  return noise;
}

SampleResult reverse_sample(const GeneratorModel& model, const Condition& condition,
                            std::uint64_t seed, bool differentiable_last) {
  if (condition.vector.size() != model.cond_dim) {
    throw std::invalid_argument("reverse_sample: condition dim " +
                                std::to_string(condition.vector.size()) + " vs model cond_dim " +
                                std::to_string(model.cond_dim));
  }
  model.sample_calls.value.fetch_add(1, std::memory_order_relaxed);
  const std::size_t T = model.schedule.steps;
  const ReverseNoise noise = reverse_noise(seed, T, model.data_dim);

  std::vector<double> x = noise.x_start;
  check_finite_step(x, T);
  for (std::size_t t = T; t >= 2; --t) {
    std::vector<double> mu = mu_step(model, x, t, condition.vector);
    const double sigma = std::sqrt(model.schedule.beta(t));
    const std::vector<double>& z = noise.z[T - t];
    for (std::size_t i = 0; i < model.data_dim; ++i) mu[i] += sigma * z[i];
    x = std::move(mu);
    check_finite_step(x, t - 1);
  }

  SampleResult result;
  if (!differentiable_last) {
    result.x0 = mu_step(model, x, 1, condition.vector);
    check_finite_step(result.x0, 0);
    return result;
  }

  // final step recorded on a tape with the condition as the only grad leaf
  LastStepGraph graph;
  Tape& tape = graph.tape;
  const NodeId x1 = tape.leaf(Tensor::row(x));
  const auto temb = time_features(1, T);
  const NodeId temb_node = tape.leaf(Tensor::row(temb));
  graph.s_node = tape.leaf(Tensor::row(condition.vector), true);
  const NodeId input = tape.concat(tape.concat(x1, temb_node), graph.s_node);
  const Mlp::TapeNodes params = model.noise_net.bind(tape, false);
  const NodeId eps = model.noise_net.forward_on_tape(tape, params, input);
  const double beta = model.schedule.beta(1);
  const double abar = model.schedule.abar(1);
  const NodeId scaled_eps = tape.scale(eps, beta / std::sqrt(1.0 - abar));
  graph.x0_node = tape.scale(tape.sub(x1, scaled_eps), 1.0 / std::sqrt(1.0 - beta));

  const Tensor& x0 = tape.value(graph.x0_node);
  result.x0.assign(x0.data.begin(), x0.data.end());
  check_finite_step(result.x0, 0);
  result.graph.emplace(std::move(graph));
  return result;
}

GeneratorModel pretrain_generator(const PretrainSet& data, const EmbeddingTable& table,
                                  const GenPretrainConfig& config) {
  if (data.n == 0) throw std::invalid_argument("pretrain_generator: empty training set");
  if (data.labels.size() != data.n || data.templates.size() != data.n ||
      data.xs.size() != data.n * data.d) {
    throw std::invalid_argument("pretrain_generator: inconsistent training set sizes");
  }

  GeneratorModel model;
  model.schedule = NoiseSchedule::linear(config.T);
  model.data_dim = data.d;
  model.cond_dim = table.cond_dim();
  model.table = table;
  std::vector<std::size_t> widths;
  widths.push_back(data.d + 8 + model.cond_dim);
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(data.d);
  model.noise_net = Mlp::make(widths, seed_mix(config.seed, 0x494e));

  // deterministic holdout split
  std::vector<std::size_t> order(data.n);
  for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
  Rng split_rng(seed_mix(config.seed, kHoldoutStream));
  for (std::size_t i = data.n; i > 1; --i) {
    std::swap(order[i - 1], order[split_rng.uniform_int(i)]);
  }
  std::size_t holdout_n = static_cast<std::size_t>(config.holdout_fraction *
                                                   static_cast<double>(data.n));
  if (holdout_n == 0 && data.n >= 2) holdout_n = 1;
  const std::size_t train_n = data.n - holdout_n;
  if (train_n == 0) throw std::invalid_argument("pretrain_generator: holdout leaves no training data");

  const std::size_t in_dim = data.d + 8 + model.cond_dim;

  // builds one (x_t, t, s) -> eps denoising example; jitter only on training
  auto fill_example = [&](std::size_t sample, Rng& rng, bool jitter, double* input_row,
                          double* target_row) {
    const std::size_t t = rng.uniform_int(config.T) + 1;
    const int y = data.labels[sample];
    const int tau = data.templates[sample];
    std::vector<double> s = table.class_embeddings[static_cast<std::size_t>(y)];
    const auto& offset = table.template_offsets[static_cast<std::size_t>(tau)];
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += offset[i];
    if (jitter && config.cond_jitter > 0.0) {
      for (double& v : s) v += rng.normal(0.0, config.cond_jitter);
    }
    std::vector<double> eps(data.d);
    for (double& v : eps) v = rng.normal();
    const std::span<const double> x0(data.xs.data() + sample * data.d, data.d);
    const std::vector<double> x_t = forward_diffuse(model.schedule, x0, t, eps);
    const auto temb = time_features(t, config.T);
    std::copy(x_t.begin(), x_t.end(), input_row);
    std::copy(temb.begin(), temb.end(), input_row + data.d);
    std::copy(s.begin(), s.end(), input_row + data.d + 8);
    std::copy(eps.begin(), eps.end(), target_row);
  };

  auto heldout_mse = [&]() {
    if (holdout_n == 0) return 0.0;
    Rng rng(seed_mix(config.seed, 0x4556));
    Tensor input = Tensor::zeros({holdout_n, in_dim});
    Tensor target = Tensor::zeros({holdout_n, data.d});
    for (std::size_t i = 0; i < holdout_n; ++i) {
      fill_example(order[train_n + i], rng, false, input.data.data() + i * in_dim,
                   target.data.data() + i * data.d);
    }
    const Tensor pred = model.noise_net.forward(input);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const double diff = pred.data[i] - target.data[i];
      acc += diff * diff;
    }
    return acc / static_cast<double>(pred.data.size());
  };

  model.heldout_mse_before = heldout_mse();

  Optimizer optimizer = Optimizer::adam({.lr = config.lr});
  std::vector<ParamRef> params = model.noise_net.param_refs("noise_net");
  Rng train_rng(seed_mix(config.seed, kPretrainStream));

  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::size_t b = config.batch;
    Tensor input = Tensor::zeros({b, in_dim});
    Tensor target = Tensor::zeros({b, data.d});
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t sample = order[train_rng.uniform_int(train_n)];
      fill_example(sample, train_rng, true, input.data.data() + i * in_dim,
                   target.data.data() + i * data.d);
    }
    Tape tape;
    const Mlp::TapeNodes nodes = model.noise_net.bind(tape, true);
    const NodeId in_node = tape.leaf(std::move(input));
    const NodeId pred = model.noise_net.forward_on_tape(tape, nodes, in_node);
    const NodeId diff = tape.sub(pred, tape.leaf(std::move(target)));
    const NodeId loss = tape.mean(tape.mul(diff, diff));
    const Gradients grads = tape.backward(loss);
    std::vector<const Tensor*> grad_ptrs;
    for (std::size_t l = 0; l < model.noise_net.layers(); ++l) {
      grad_ptrs.push_back(&grads.at(nodes.w[l]));
      grad_ptrs.push_back(&grads.at(nodes.b[l]));
    }
    optimizer.step(params, grad_ptrs);
  }

  model.heldout_mse = heldout_mse();
  return model;
}

void save_generator(const std::filesystem::path& path, const GeneratorModel& model) {
  CheckpointArrays arrays;
  arrays.emplace_back("meta", Tensor::vec(std::vector<double>{
                                  static_cast<double>(model.data_dim),
                                  static_cast<double>(model.cond_dim),
                                  static_cast<double>(model.schedule.steps),
                                  static_cast<double>(model.noise_net.layers()),
                                  model.heldout_mse_before, model.heldout_mse}));
  arrays.emplace_back("schedule.betas", Tensor::vec(model.schedule.betas));
  arrays.emplace_back("schedule.alpha_bar", Tensor::vec(model.schedule.alpha_bar));
  const std::size_t C = model.table.classes();
  const std::size_t K = model.table.templates();
  const std::size_t ds = model.table.cond_dim();
  Tensor ce = Tensor::zeros({C, ds});
  for (std::size_t c = 0; c < C; ++c) {
    std::copy(model.table.class_embeddings[c].begin(), model.table.class_embeddings[c].end(),
              ce.data.begin() + static_cast<std::ptrdiff_t>(c * ds));
  }
  arrays.emplace_back("class_embeddings", std::move(ce));
  Tensor to = Tensor::zeros({K, ds});
  for (std::size_t k = 0; k < K; ++k) {
    std::copy(model.table.template_offsets[k].begin(), model.table.template_offsets[k].end(),
              to.data.begin() + static_cast<std::ptrdiff_t>(k * ds));
  }
  arrays.emplace_back("template_offsets", std::move(to));
  for (std::size_t l = 0; l < model.noise_net.layers(); ++l) {
    arrays.emplace_back("noise_net.w" + std::to_string(l), model.noise_net.weights[l]);
    arrays.emplace_back("noise_net.b" + std::to_string(l), model.noise_net.biases[l]);
  }
  write_checkpoint(path, arrays);
}

GeneratorModel load_generator(const std::filesystem::path& path) {
  const CheckpointArrays arrays = read_checkpoint(path);
  const Tensor& meta = checkpoint_array(arrays, "meta");
  if (meta.numel() < 6) throw std::runtime_error("load_generator: bad meta array in " + path.string());
  GeneratorModel model;
  model.data_dim = static_cast<std::size_t>(meta.data[0]);
  model.cond_dim = static_cast<std::size_t>(meta.data[1]);
  model.schedule.steps = static_cast<std::size_t>(meta.data[2]);
  const std::size_t layers = static_cast<std::size_t>(meta.data[3]);
  model.heldout_mse_before = meta.data[4];
  model.heldout_mse = meta.data[5];

  model.schedule.betas = checkpoint_array(arrays, "schedule.betas").data;
  model.schedule.alpha_bar = checkpoint_array(arrays, "schedule.alpha_bar").data;
  model.schedule.validate();

  const Tensor& ce = checkpoint_array(arrays, "class_embeddings");
  const Tensor& to = checkpoint_array(arrays, "template_offsets");
  if (ce.rank() != 2 || to.rank() != 2 || ce.shape[1] != model.cond_dim ||
      to.shape[1] != model.cond_dim) {
    throw std::runtime_error("load_generator: embedding table shape mismatch in " + path.string());
  }
  for (std::size_t c = 0; c < ce.shape[0]; ++c) {
    model.table.class_embeddings.emplace_back(ce.data.begin() + c * ce.shape[1],
                                              ce.data.begin() + (c + 1) * ce.shape[1]);
  }
  for (std::size_t k = 0; k < to.shape[0]; ++k) {
    model.table.template_offsets.emplace_back(to.data.begin() + k * to.shape[1],
                                              to.data.begin() + (k + 1) * to.shape[1]);
  }

  for (std::size_t l = 0; l < layers; ++l) {
    Tensor w = checkpoint_array(arrays, "noise_net.w" + std::to_string(l));
    Tensor b = checkpoint_array(arrays, "noise_net.b" + std::to_string(l));
    if (l == 0) model.noise_net.widths.push_back(w.shape[0]);
    model.noise_net.widths.push_back(w.shape[1]);
    model.noise_net.weights.push_back(std::move(w));
    model.noise_net.biases.push_back(std::move(b));
  }
  if (model.noise_net.input_dim() != model.data_dim + 8 + model.cond_dim ||
      model.noise_net.output_dim() != model.data_dim) {
    throw std::runtime_error("load_generator: net dimensions inconsistent in " + path.string());
  }
  return model;
}

}  // namespace galforge
