#include "galforge/classifier.hpp"

#include <cmath>
#include <stdexcept>

#include "galforge/checkpoint.hpp"
#include "galforge/optim.hpp"
#include "galforge/rng.hpp"

namespace galforge {

namespace {

constexpr std::uint64_t kInitStream = 0x4349;
constexpr std::uint64_t kTrainStream = 0x4354;
constexpr std::uint64_t kMcStream = 0x6d63;

Tensor onehot_rows(std::span<const int> ys, std::size_t classes) {
  Tensor t = Tensor::zeros({ys.size(), classes});
  for (std::size_t i = 0; i < ys.size(); ++i) {
    t.data[i * classes + static_cast<std::size_t>(ys[i])] = 1.0;
  }
  return t;
}

// mean cross-entropy of predictions against integer labels, dropout off
double dataset_loss(const ClassifierModel& model, const LabeledSet& data) {
  const Tensor probs = model.predict_proba(data.features_tensor());
  double acc = 0.0;
  for (std::size_t i = 0; i < data.n; ++i) {
    const double p = probs.data[i * model.spec.classes + static_cast<std::size_t>(data.ys[i])];
    acc -= std::log(std::max(p, 1e-300));
  }
  return acc / static_cast<double>(data.n);
}

}  // namespace

std::vector<std::size_t> parse_architecture(const std::string& architecture_id) {
  const std::string prefix = "mlp-";
  if (architecture_id.rfind(prefix, 0) != 0) {
    throw std::invalid_argument("parse_architecture: unknown architecture '" + architecture_id +
                                "', expected mlp-<w1>x<w2>...");
  }
  std::vector<std::size_t> widths;
  std::size_t pos = prefix.size();
  while (pos < architecture_id.size()) {
    std::size_t end = architecture_id.find('x', pos);
    if (end == std::string::npos) end = architecture_id.size();
    const std::string token = architecture_id.substr(pos, end - pos);
    if (token.empty()) {
      throw std::invalid_argument("parse_architecture: bad width in '" + architecture_id + "'");
    }
    std::size_t parsed = 0;
    try {
      parsed = std::stoul(token);
    } catch (const std::exception&) {
      throw std::invalid_argument("parse_architecture: bad width '" + token + "'");
    }
    if (parsed == 0) {
      throw std::invalid_argument("parse_architecture: zero width in '" + architecture_id + "'");
    }
    widths.push_back(parsed);
    pos = end + 1;
  }
  if (widths.empty()) {
    throw std::invalid_argument("parse_architecture: no hidden widths in '" + architecture_id + "'");
  }
  return widths;
}

void LabeledSet::append(std::span<const double> x, int y) {
  if (n == 0 && d == 0) d = x.size();
  if (x.size() != d) {
    throw std::invalid_argument("LabeledSet::append: dimension " + std::to_string(x.size()) +
                                " does not match " + std::to_string(d));
  }
  xs.insert(xs.end(), x.begin(), x.end());
  ys.push_back(y);
  ++n;
}

Tensor LabeledSet::features_tensor() const {
  Tensor t = Tensor::zeros({n, d});
  t.data = xs;
  return t;
}

Tensor ClassifierModel::predict_proba(const Tensor& xs) const {
  return ops::softmax(net.forward(xs));
}

std::vector<Tensor> ClassifierModel::mc_masks(std::size_t rows, std::size_t pass,
                                              std::uint64_t seed) const {
  if (spec.dropout_rate <= 0.0) {
    throw std::invalid_argument("mc_masks: dropout_rate must be positive for MC passes");
  }
  Rng rng(seed_mix(seed, kMcStream, pass));
  std::vector<Tensor> masks;
  for (std::size_t l = 0; l + 1 < net.layers(); ++l) {
    masks.push_back(make_dropout_mask({rows, net.widths[l + 1]}, spec.dropout_rate, rng));
  }
  return masks;
}

std::vector<Tensor> ClassifierModel::mc_predict(const Tensor& xs, std::size_t passes,
                                                std::uint64_t seed) const {
  if (spec.dropout_rate <= 0.0) {
    throw std::invalid_argument("mc_predict: dropout_rate must be positive for MC passes");
  }
  if (passes == 0) throw std::invalid_argument("mc_predict: passes must be positive");
  std::vector<Tensor> out;
  out.reserve(passes);
  const std::size_t rows = xs.shape[0];
  for (std::size_t pass = 0; pass < passes; ++pass) {
    const std::vector<Tensor> masks = mc_masks(rows, pass, seed);
    out.push_back(ops::softmax(net.forward(xs, &masks)));
  }
  return out;
}

Tensor ClassifierModel::features(const Tensor& xs) const { return net.penultimate(xs); }

std::size_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::vector<int> ClassifierModel::predict_labels(const Tensor& xs) const {
  const Tensor probs = predict_proba(xs);
  const std::size_t rows = probs.shape[0];
  std::vector<int> labels(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    labels[i] = static_cast<int>(argmax_lowest(probs.row_span(i)));
  }
  return labels;
}

double ClassifierModel::accuracy(const Tensor& xs, std::span<const int> ys) const {
  const std::vector<int> predicted = predict_labels(xs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == ys[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

ClassifierModel init_classifier(const ClassifierSpec& spec, std::uint64_t seed) {
  if (spec.input_dim == 0 || spec.classes == 0) {
    throw std::invalid_argument("init_classifier: input_dim and classes must be positive");
  }
  std::vector<std::size_t> widths;
  widths.push_back(spec.input_dim);
  for (std::size_t w : parse_architecture(spec.architecture_id)) widths.push_back(w);
  widths.push_back(spec.classes);
  ClassifierModel model;
  model.spec = spec;
  model.net = Mlp::make(widths, seed_mix(seed, kInitStream));
  return model;
}

ClassifierModel train_classifier(const ClassifierSpec& spec, const LabeledSet& data,
                                 const TrainConfig& config) {
  if (data.n == 0) throw std::invalid_argument("train_classifier: empty dataset");
  if (data.d != spec.input_dim) {
    throw std::invalid_argument("train_classifier: data dim " + std::to_string(data.d) +
                                " does not match input_dim " + std::to_string(spec.input_dim));
  }
  for (int y : data.ys) {
    if (y < 0 || static_cast<std::size_t>(y) >= spec.classes) {
      throw std::invalid_argument("train_classifier: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(spec.classes) + ")");
    }
  }

  ClassifierModel model = init_classifier(spec, config.seed);
  model.initial_loss = dataset_loss(model, data);

  Optimizer optimizer = Optimizer::adam({.lr = config.lr});
  std::vector<ParamRef> params = model.net.param_refs("classifier");
  Rng rng(seed_mix(config.seed, kTrainStream));

  std::vector<std::size_t> order(data.n);
  for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, config.batch);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = data.n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    for (std::size_t start = 0; start < data.n; start += batch) {
      const std::size_t b = std::min(batch, data.n - start);
      Tensor xb = Tensor::zeros({b, data.d});
      std::vector<int> yb(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t row = order[start + i];
        std::copy_n(data.xs.data() + row * data.d, data.d, xb.data.data() + i * data.d);
        yb[i] = data.ys[row];
      }
      Tape tape;
      const Mlp::TapeNodes nodes = model.net.bind(tape, true);
      const NodeId xb_node = tape.leaf(std::move(xb));
      NodeId logits;
      if (spec.dropout_rate > 0.0) {
        std::vector<NodeId> mask_nodes;
        for (std::size_t l = 0; l + 1 < model.net.layers(); ++l) {
          mask_nodes.push_back(tape.leaf(
              make_dropout_mask({b, model.net.widths[l + 1]}, spec.dropout_rate, rng)));
        }
        logits = model.net.forward_on_tape(tape, nodes, xb_node, &mask_nodes);
      } else {
        logits = model.net.forward_on_tape(tape, nodes, xb_node);
      }
      const NodeId onehot = tape.leaf(onehot_rows(yb, spec.classes));
      const NodeId picked = tape.mul(onehot, tape.log(tape.softmax(logits)));
      const NodeId loss = tape.scale(tape.sum(picked), -1.0 / static_cast<double>(b));
      const double loss_value = tape.value(loss).data[0];
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("train_classifier: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }
      const Gradients grads = tape.backward(loss);
      std::vector<const Tensor*> grad_ptrs;
      for (std::size_t l = 0; l < model.net.layers(); ++l) {
        grad_ptrs.push_back(&grads.at(nodes.w[l]));
        grad_ptrs.push_back(&grads.at(nodes.b[l]));
      }
      optimizer.step(params, grad_ptrs);
    }
  }

  model.final_loss = dataset_loss(model, data);
  return model;
}

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model) {
  CheckpointArrays arrays;
  arrays.emplace_back("meta", Tensor::vec(std::vector<double>{
                                  static_cast<double>(model.spec.input_dim),
                                  static_cast<double>(model.spec.classes),
                                  model.spec.dropout_rate,
                                  static_cast<double>(model.net.layers()),
                                  model.initial_loss, model.final_loss}));
  for (std::size_t l = 0; l < model.net.layers(); ++l) {
    arrays.emplace_back("classifier.w" + std::to_string(l), model.net.weights[l]);
    arrays.emplace_back("classifier.b" + std::to_string(l), model.net.biases[l]);
  }
  write_checkpoint(path, arrays);
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  const CheckpointArrays arrays = read_checkpoint(path);
  const Tensor& meta = checkpoint_array(arrays, "meta");
  if (meta.numel() < 6) throw std::runtime_error("load_classifier: bad meta array in " + path.string());
  ClassifierModel model;
  model.spec.input_dim = static_cast<std::size_t>(meta.data[0]);
  model.spec.classes = static_cast<std::size_t>(meta.data[1]);
  model.spec.dropout_rate = meta.data[2];
  const std::size_t layers = static_cast<std::size_t>(meta.data[3]);
  model.initial_loss = meta.data[4];
  model.final_loss = meta.data[5];
  std::string arch = "mlp";
  for (std::size_t l = 0; l < layers; ++l) {
    Tensor w = checkpoint_array(arrays, "classifier.w" + std::to_string(l));
    Tensor b = checkpoint_array(arrays, "classifier.b" + std::to_string(l));
    if (l == 0) model.net.widths.push_back(w.shape[0]);
    model.net.widths.push_back(w.shape[1]);
    if (l + 1 < layers) arch += (l == 0 ? "-" : "x") + std::to_string(w.shape[1]);
    model.net.weights.push_back(std::move(w));
    model.net.biases.push_back(std::move(b));
  }
  model.spec.architecture_id = arch;
  return model;
}

}  // namespace galforge
