#include "galforge/config.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "galforge/io_util.hpp"

namespace galforge {

namespace {

// key, default value, one-line meaning
struct KeyDefault {
  const char* key;
  const char* value;
  const char* doc;
};

constexpr KeyDefault kDefaults[] = {
    {"al.b", "50", "annotation batch per cycle"},
    {"al.reset_labeled", "false", "rebuild L from scratch each cycle instead of accumulating"},
    {"al.sigma", "entropy", "acquisition for pool selection"},
    {"classifier.arch", "mlp-64x64", "classifier architecture id"},
    {"classifier.batch", "64", "training minibatch size"},
    {"classifier.dropout", "0.1", "hidden dropout rate (also used by MC acquisitions)"},
    {"classifier.epochs", "200", "training epochs per cycle"},
    {"classifier.epochs_multiplier", "1", "multiplies epochs, for longer-training ablations"},
    {"classifier.lr", "0.001", "Adam learning rate"},
    {"classifier.mc_passes", "10", "stochastic passes for MC-dropout acquisitions"},
    {"gal.b_fixed", "0", "generated batch when gal.b_rule = fixed"},
    {"gal.b_ratio", "1", "generated batch = ratio * B_AL when gal.b_rule = ratio"},
    {"gal.b_rule", "equal_l", "generated batch rule: equal_l | ratio | fixed"},
    {"gal.g_retention", "accumulate", "keep generated data across cycles: accumulate | replace"},
    {"gal.gen_multiplier", "1", "generate m*B_GAL candidates, subsample to B_GAL"},
    {"gal.template", "1", "template id used for generation anchors"},
    {"generator.T", "50", "diffusion steps"},
    {"generator.batch", "128", "pretraining minibatch size"},
    {"generator.cond_jitter", "0.1", "condition noise during pretraining"},
    {"generator.hidden", "128x128x128", "noise net hidden widths"},
    {"generator.holdout", "0.05", "pretraining holdout fraction"},
    {"generator.lr", "0.001", "pretraining Adam learning rate"},
    {"generator.seed", "1", "pretraining seed"},
    {"generator.steps", "6000", "pretraining optimizer steps"},
    {"opt.alpha_ratio", "0.2", "ascent step size as a fraction of epsilon"},
    {"opt.chain_factor", "true", "apply the T factor from the one-step estimator"},
    {"opt.epsilon_fixed", "-1", "constant epsilon every cycle; negative uses the schedule"},
    {"opt.epsilon_max", "0.5", "condition ball radius at the final cycle"},
    {"opt.k", "6", "samples per gradient estimate"},
    {"opt.sigma_gal", "entropy", "acquisition guiding condition optimization"},
    {"opt.steps", "10", "ascent steps per condition"},
    {"run.cycles", "10", "cycles per run"},
    {"run.emit_wall_ms", "false", "record wall time in result rows (breaks byte-identity)"},
    {"run.mode", "joint", "al | gal | joint | full | joint_basic"},
    {"run.seeds", "1,2,3,4,5", "replicate seeds"},
    {"world.class_std", "0.12", "per-class isotropic std before z-scoring"},
    {"world.classes", "10", "mixture component count"},
    {"world.cond_dim", "8", "condition embedding dimension"},
    {"world.dim", "6", "data dimension"},
    {"world.layout", "ring", "class mean layout: ring | grid"},
    {"world.name", "default", "stock spec the world starts from: default | hard100"},
    {"world.overlap", "1", "multiplier on class_std"},
    {"world.pool_n", "4000", "unlabeled pool size"},
    {"world.pretrain_n", "20000", "generator pretraining split size"},
    {"world.seed", "1", "world draw seed"},
    {"world.templates", "3", "template offset count"},
    {"world.test_n", "2000", "test split size"},
};

}  // namespace

Config Config::defaults() {
  Config config;
  for (const auto& entry : kDefaults) config.values_[entry.key] = entry.value;
  return config;
}

std::string Config::defaults_help() {
  std::ostringstream out;
  for (const auto& entry : kDefaults)
    out << entry.key << " = " << entry.value << "  # " << entry.doc << "\n";
  return out.str();
}

void Config::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second = value;
  explicit_.insert(key);
}

void Config::load_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: " + path.string() + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

void Config::set_override(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: override '" + spec + "' is not key=value");
  set(trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)));
}

bool Config::known(const std::string& key) const { return values_.contains(key); }

bool Config::explicitly_set(const std::string& key) const { return explicit_.contains(key); }

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number: '" + get(key) + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& value = get(key);
  std::uint64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("config: key '" + key + "' is not an integer: '" + value + "'");
  return parsed;
}

std::size_t Config::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

bool Config::get_bool(const std::string& key) const {
  const std::string& value = get(key);
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' is not a boolean: '" + value + "'");
}

std::vector<std::uint64_t> Config::get_u64_list(const std::string& key) const {
  const std::string& value = get(key);
  std::vector<std::uint64_t> out;
  std::string token;
  for (char c : value + ",") {
    if (c == ',' || c == ' ') {
      if (!token.empty()) {
        std::uint64_t parsed = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), parsed);
        if (ec != std::errc{} || ptr != token.data() + token.size())
          throw std::invalid_argument("config: key '" + key + "' has a bad integer '" + token +
                                      "'");
        out.push_back(parsed);
        token.clear();
      }
    } else {
      token.push_back(c);
    }
  }
  if (out.empty()) throw std::invalid_argument("config: key '" + key + "' lists no integers");
  return out;
}

std::string Config::echo() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

}  // namespace galforge
