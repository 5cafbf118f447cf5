#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "galforge/checkpoint.hpp"
#include "galforge/config.hpp"
#include "galforge/engine.hpp"
#include "galforge/generator.hpp"
#include "galforge/io_util.hpp"
#include "galforge/pools.hpp"
#include "galforge/worldgen.hpp"

namespace {

using namespace galforge;

constexpr const char* kToolVersion = "galforge 0.1.0";

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buf;
}

// common per-command configuration inputs
struct ConfigArgs {
  std::vector<std::string> files;       // --config, applied in order
  std::vector<std::string> overrides;   // --set key=value, applied after files
  std::vector<std::pair<std::string, std::string>> flags;  // convenience flags, highest
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.files, "configuration file(s), key = value lines")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args.overrides, "override one key, as key=value");
}

// binds --flag to a config key; only applied when the flag was given
void add_key_flag(CLI::App* cmd, ConfigArgs& args, const std::string& flag,
                  const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
         flag, [&args, key](const std::string& value) { args.flags.emplace_back(key, value); },
         help)
      ->type_name("VALUE");
}

Config resolve_config(const ConfigArgs& args) {
  Config config = Config::defaults();
  for (const auto& file : args.files) config.load_file(file);
  for (const auto& spec : args.overrides) config.set_override(spec);
  for (const auto& [key, value] : args.flags) config.set(key, value);
  return config;
}

WorldSpec world_spec_from(const Config& config) {
  WorldSpec spec = WorldSpec::stock(config.get("world.name"));
  if (config.explicitly_set("world.classes")) spec.classes = config.get_size("world.classes");
  if (config.explicitly_set("world.dim")) spec.dim = config.get_size("world.dim");
  if (config.explicitly_set("world.layout")) spec.layout = config.get("world.layout");
  if (config.explicitly_set("world.class_std"))
    spec.class_std = config.get_double("world.class_std");
  if (config.explicitly_set("world.overlap")) spec.overlap = config.get_double("world.overlap");
  if (config.explicitly_set("world.pretrain_n"))
    spec.pretrain_n = config.get_size("world.pretrain_n");
  if (config.explicitly_set("world.pool_n")) spec.pool_n = config.get_size("world.pool_n");
  if (config.explicitly_set("world.test_n")) spec.test_n = config.get_size("world.test_n");
  if (config.explicitly_set("world.cond_dim")) spec.cond_dim = config.get_size("world.cond_dim");
  if (config.explicitly_set("world.templates"))
    spec.templates = config.get_size("world.templates");
  if (config.explicitly_set("world.seed")) spec.seed = config.get_u64("world.seed");
  return spec;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> widths;
  for (const auto& field : split(text, 'x')) {
    std::size_t width = 0;
    try {
      width = std::stoul(field);
    } catch (const std::exception&) {
      throw std::invalid_argument("generator.hidden: bad width '" + field + "'");
    }
    if (width == 0) throw std::invalid_argument("generator.hidden: zero width");
    widths.push_back(width);
  }
  if (widths.empty()) throw std::invalid_argument("generator.hidden: no widths");
  return widths;
}

GenPretrainConfig pretrain_config_from(const Config& config) {
  GenPretrainConfig out;
  out.steps = config.get_size("generator.steps");
  out.batch = config.get_size("generator.batch");
  out.lr = config.get_double("generator.lr");
  out.cond_jitter = config.get_double("generator.cond_jitter");
  out.holdout_fraction = config.get_double("generator.holdout");
  out.hidden = parse_widths(config.get("generator.hidden"));
  out.T = config.get_size("generator.T");
  out.seed = config.get_u64("generator.seed");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& field : split(text, ',')) {
    const std::string trimmed = trim(field);
    if (trimmed.empty()) continue;
    try {
      out.push_back(parse_double(trimmed));
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": bad number '" + trimmed + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& field : split(text, ',')) {
    const std::string trimmed = trim(field);
    if (trimmed.empty()) continue;
    try {
      out.push_back(std::stoi(trimmed));
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": bad integer '" + trimmed + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(what + ": empty list");
  return out;
}

std::string manifest_text(const Config& config, const std::string& run_id,
                          std::span<const std::pair<std::string, std::string>> extras) {
  std::ostringstream out;
  out << "manifest.version = 1\n";
  out << "tool.version = " << kToolVersion << "\n";
  out << "run.id = " << run_id << "\n";
  out << "run.started_utc = " << utc_timestamp() << "\n";
  for (const auto& [key, value] : extras) out << key << " = " << value << "\n";
  out << "# resolved configuration\n";
  out << config.echo();
  return out.str();
}

std::string default_run_id(const Config& config, std::uint64_t world_digest,
                           std::uint64_t generator_digest) {
  std::string buf = config.echo();
  buf += hex64(world_digest);
  buf += hex64(generator_digest);
  return hex64(fnv1a64(buf));
}

std::filesystem::path sibling_path(const std::filesystem::path& base, const std::string& suffix) {
  std::filesystem::path out = base;
  out.replace_extension();
  out += suffix;
  return out;
}

int runtime_failure(const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return 1;
}

int usage_failure(const std::exception& e, const std::string& usage_hint) {
  std::cerr << "usage error: " << e.what() << "\n";
  if (!usage_hint.empty()) std::cerr << usage_hint << "\n";
  return 2;
}

// ---- subcommand state ----

struct WorldMakeArgs {
  ConfigArgs config;
  std::string out = "world";
};

struct PretrainArgs {
  ConfigArgs config;
  std::string world_dir;
  std::string out = "generator.glt1";
};

struct RunArgs {
  ConfigArgs config;
  std::string world_dir;
  std::string generator_path;
  std::string out = "results.csv";
  std::string manifest;    // default: out with .manifest
  std::string dataset_out; // default: out stem; per-seed suffix appended
  std::string run_id;      // default: config digest
  bool no_dataset = false;
};

struct AblateArgs {
  RunArgs run;
  std::string key;
  std::string values;
};

struct AuditArgs {
  ConfigArgs config;
  std::string world_dir;
  std::string generator_path;
  std::string out = "audit.csv";
  std::string eps = "0,0.25,0.5,1";
  std::string templates;  // default: every template of the world
  std::size_t n_per_cell = 50;
  std::uint64_t seed = 1;
};

struct ReuseArgs {
  ConfigArgs config;
  std::string world_dir;
  std::string dataset;
  std::string out = "reuse.csv";
  std::string run_id;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out = "report.csv";
};

int cmd_world_make(const WorldMakeArgs& args) {
  Config config;
  WorldSpec spec;
  try {
    config = resolve_config(args.config);
    spec = world_spec_from(config);
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge world make --help`");
  }
  try {
    const World world = make_world(spec);
    save_world(world, args.out);
    std::cout << world_metadata(world);
    return 0;
  } catch (const std::exception& e) {
    return runtime_failure(e);
  }
}

int cmd_generator_pretrain(const PretrainArgs& args) {
  Config config;
  GenPretrainConfig pretrain;
  try {
    config = resolve_config(args.config);
    pretrain = pretrain_config_from(config);
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge generator pretrain --help`");
  }
  try {
    const World world = load_world(args.world_dir);
    const GeneratorModel model = pretrain_generator(pretrain_set(world), world.table, pretrain);
    save_generator(args.out, model);
    std::cout << "generator.heldout_mse_before = " << format_double(model.heldout_mse_before)
              << "\n";
    std::cout << "generator.heldout_mse = " << format_double(model.heldout_mse) << "\n";
    std::cout << "generator.digest = " << hex64(file_digest(args.out)) << "\n";
    return 0;
  } catch (const std::exception& e) {
    return runtime_failure(e);
  }
}

// shared by run and ablate: resolves, writes the manifest, loops seeds, and
// flushes a partial CSV with an ABORTED trailer on mid-run failure
int execute_run(const RunArgs& args, Config config) {
  ExperimentConfig experiment;
  try {
    experiment = ExperimentConfig::from_config(config);
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge run --help`");
  }
  try {
    const World world = load_world(args.world_dir);
    GeneratorModel generator;
    const GeneratorModel* generator_ptr = nullptr;
    std::uint64_t generator_digest = 0;
    const bool needs_generator = experiment.mode == Mode::gal ||
                                 experiment.mode == Mode::joint ||
                                 experiment.mode == Mode::joint_basic;
    if (needs_generator) {
      if (args.generator_path.empty())
        throw std::runtime_error("run: mode '" + mode_name(experiment.mode) +
                                 "' needs --generator");
      generator = load_generator(args.generator_path);
      generator_ptr = &generator;
      generator_digest = file_digest(args.generator_path);
    }

    experiment.run_id = args.run_id.empty()
                            ? default_run_id(config, world.digest(), generator_digest)
                            : args.run_id;

    const std::filesystem::path out_path = args.out;
    const std::filesystem::path manifest_path = args.manifest.empty()
                                                    ? sibling_path(out_path, ".manifest")
                                                    : std::filesystem::path(args.manifest);

    std::vector<std::pair<std::string, std::string>> extras;
    extras.emplace_back("world.path", args.world_dir);
    extras.emplace_back("world.digest", hex64(world.digest()));
    if (needs_generator) {
      extras.emplace_back("generator.path", args.generator_path);
      extras.emplace_back("generator.digest", hex64(generator_digest));
    }
    atomic_write_file(manifest_path, manifest_text(config, experiment.run_id, extras));

    std::vector<ResultRow> rows;
    std::vector<std::pair<std::uint64_t, std::vector<SnapshotRow>>> datasets;
    try {
      for (std::uint64_t seed : experiment.seeds) {
        ExperimentConfig one = experiment;
        one.seeds = {seed};
        RunOutput output = run_experiment_full(one, world, generator_ptr);
        for (auto& row : output.rows) rows.push_back(std::move(row));
        for (auto& dataset : output.datasets) datasets.push_back(std::move(dataset));
      }
    } catch (const std::exception& e) {
      atomic_write_file(out_path, results_csv(rows) + "# ABORTED\n");
      std::cerr << "error: " << e.what() << "\n";
      std::cerr << "partial results flushed to " << out_path.string() << "\n";
      return 1;
    }

    atomic_write_file(out_path, results_csv(rows));
    if (!args.no_dataset && experiment.mode != Mode::full) {
      const std::filesystem::path prefix = args.dataset_out.empty()
                                               ? sibling_path(out_path, "")
                                               : std::filesystem::path(args.dataset_out);
      for (const auto& [seed, dataset] : datasets) {
        std::filesystem::path path = prefix;
        path += ".seed" + std::to_string(seed) + ".dataset.csv";
        atomic_write_file(path, snapshot_csv(dataset, world.spec.dim));
      }
    }
    std::cout << "wrote " << rows.size() << " rows to " << out_path.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    return runtime_failure(e);
  }
}

int cmd_run(const RunArgs& args) {
  Config config;
  try {
    config = resolve_config(args.config);
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge run --help`");
  }
  return execute_run(args, std::move(config));
}

int cmd_ablate(const AblateArgs& args) {
  Config base;
  std::vector<std::string> values;
  try {
    base = resolve_config(args.run.config);
    if (!base.known(args.key))
      throw std::invalid_argument("ablate: unknown config key '" + args.key + "'");
    for (const auto& field : split(args.values, ','))
      if (!trim(field).empty()) values.push_back(trim(field));
    if (values.empty()) throw std::invalid_argument("ablate: --values lists no values");
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge ablate --help`");
  }

  std::string key_slug = args.key;
  std::replace(key_slug.begin(), key_slug.end(), '.', '_');
  const std::filesystem::path out_path = args.run.out;
  for (const auto& value : values) {
    Config config = base;
    try {
      config.set(args.key, value);
    } catch (const std::exception& e) {
      return usage_failure(e, "");
    }
    RunArgs one = args.run;
    std::filesystem::path path = sibling_path(out_path, "");
    path += "." + key_slug + "." + value + ".csv";
    one.out = path.string();
    one.manifest.clear();
    one.run_id.clear();
    const int code = execute_run(one, std::move(config));
    if (code != 0) return code;
  }
  return 0;
}

int cmd_audit(const AuditArgs& args) {
  Config config;
  std::vector<double> eps_grid;
  try {
    config = resolve_config(args.config);
    eps_grid = parse_double_list(args.eps, "--eps");
    if (args.n_per_cell == 0) throw std::invalid_argument("--n must be positive");
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge audit --help`");
  }
  try {
    const World world = load_world(args.world_dir);
    const GeneratorModel generator = load_generator(args.generator_path);
    std::vector<int> templates;
    if (args.templates.empty()) {
      for (std::size_t t = 0; t < world.spec.templates; ++t)
        templates.push_back(static_cast<int>(t));
    } else {
      templates = parse_int_list(args.templates, "--templates");
    }
    const std::vector<AuditCell> cells =
        audit_pseudo_labels(generator, world, eps_grid, templates, args.n_per_cell, args.seed);
    atomic_write_file(args.out, audit_csv(cells));
    for (const auto& cell : cells)
      std::cout << "template " << cell.template_id << " eps " << format_double(cell.epsilon)
                << " accuracy " << format_double(cell.accuracy()) << " (" << cell.correct << "/"
                << cell.n << ")\n";
    return 0;
  } catch (const std::exception& e) {
    return runtime_failure(e);
  }
}

int cmd_reuse(const ReuseArgs& args) {
  Config config;
  ExperimentConfig experiment;
  try {
    config = resolve_config(args.config);
    experiment = ExperimentConfig::from_config(config);
  } catch (const std::exception& e) {
    return usage_failure(e, "see `galforge reuse --help`");
  }
  try {
    const World world = load_world(args.world_dir);
    const std::vector<SnapshotRow> snapshot = parse_snapshot_csv(read_file(args.dataset));
    experiment.run_id = args.run_id.empty()
                            ? default_run_id(config, world.digest(), fnv1a64(args.dataset))
                            : args.run_id;
    const std::filesystem::path out_path = args.out;
    std::vector<std::pair<std::string, std::string>> extras;
    extras.emplace_back("world.path", args.world_dir);
    extras.emplace_back("world.digest", hex64(world.digest()));
    extras.emplace_back("dataset.path", args.dataset);
    extras.emplace_back("dataset.digest", hex64(fnv1a64(read_file(args.dataset))));
    atomic_write_file(sibling_path(out_path, ".manifest"),
                      manifest_text(config, experiment.run_id, extras));
    const std::vector<ResultRow> rows = reuse_dataset(snapshot, experiment, world);
    atomic_write_file(out_path, results_csv(rows));
    std::cout << "wrote " << rows.size() << " rows to " << out_path.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    return runtime_failure(e);
  }
}

// accuracy-vs-budget matrix: one row per method, one column per budget,
// cells are means over rows; improvement = best joint minus best al baseline
std::string report_matrix(const std::vector<ResultRow>& rows) {
  std::set<std::size_t> budget_set;
  std::set<std::string> methods;
  for (const auto& row : rows) {
    budget_set.insert(row.annotation_budget);
    methods.insert(row.method);
  }
  const std::vector<std::size_t> budgets(budget_set.begin(), budget_set.end());

  std::map<std::string, std::map<std::size_t, std::pair<double, std::size_t>>> cells;
  for (const auto& row : rows) {
    auto& cell = cells[row.method][row.annotation_budget];
    cell.first += row.test_accuracy;
    cell.second += 1;
  }

  std::ostringstream out;
  out << "method";
  for (std::size_t budget : budgets) out << ",budget_" << budget;
  out << ",mean\n";

  std::map<std::size_t, double> best_joint;
  std::map<std::size_t, double> best_baseline;
  for (const auto& method : methods) {
    out << method;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t budget : budgets) {
      out << ",";
      const auto it = cells[method].find(budget);
      if (it == cells[method].end()) continue;
      const double mean = it->second.first / static_cast<double>(it->second.second);
      out << format_double(mean);
      total += mean;
      ++count;
      if (method.starts_with("joint")) {
        const auto best = best_joint.find(budget);
        if (best == best_joint.end() || mean > best->second) best_joint[budget] = mean;
      }
      if (method.starts_with("al:")) {
        const auto best = best_baseline.find(budget);
        if (best == best_baseline.end() || mean > best->second) best_baseline[budget] = mean;
      }
    }
    out << ",";
    if (count > 0) out << format_double(total / static_cast<double>(count));
    out << "\n";
  }

  if (!best_joint.empty() && !best_baseline.empty()) {
    out << "improvement";
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t budget : budgets) {
      out << ",";
      const auto joint = best_joint.find(budget);
      const auto baseline = best_baseline.find(budget);
      if (joint == best_joint.end() || baseline == best_baseline.end()) continue;
      const double diff = joint->second - baseline->second;
      out << format_double(diff);
      total += diff;
      ++count;
    }
    out << ",";
    if (count > 0) out << format_double(total / static_cast<double>(count));
    out << "\n";
  }
  return out.str();
}

int cmd_report(const ReportArgs& args) {
  try {
    std::vector<ResultRow> rows;
    for (const auto& input : args.inputs) {
      const std::vector<ResultRow> parsed = parse_results_csv(read_file(input));
      rows.insert(rows.end(), parsed.begin(), parsed.end());
    }
    if (rows.empty()) throw std::runtime_error("report: no result rows in the inputs");
    const std::string matrix = report_matrix(rows);
    atomic_write_file(args.out, matrix);
    std::cout << matrix;
    return 0;
  } catch (const std::exception& e) {
    return runtime_failure(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"active learning benchmark with an optimizable conditional generator"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // world make
  auto* world_cmd = app.add_subcommand("world", "synthetic world construction");
  world_cmd->require_subcommand(1);
  WorldMakeArgs world_args;
  auto* world_make = world_cmd->add_subcommand("make", "draw a world and save it");
  add_config_options(world_make, world_args.config);
  add_key_flag(world_make, world_args.config, "--name", "world.name",
               "stock spec: default | hard100");
  add_key_flag(world_make, world_args.config, "--seed", "world.seed", "world draw seed");
  world_make->add_option("--out", world_args.out, "output directory")->capture_default_str();

  // generator pretrain
  auto* generator_cmd = app.add_subcommand("generator", "conditional generator management");
  generator_cmd->require_subcommand(1);
  PretrainArgs pretrain_args;
  auto* generator_pretrain =
      generator_cmd->add_subcommand("pretrain", "train the denoiser on the pretraining split");
  add_config_options(generator_pretrain, pretrain_args.config);
  add_key_flag(generator_pretrain, pretrain_args.config, "--steps", "generator.steps",
               "training steps");
  add_key_flag(generator_pretrain, pretrain_args.config, "--seed", "generator.seed",
               "training seed");
  generator_pretrain->add_option("--world", pretrain_args.world_dir, "world directory")
      ->required();
  generator_pretrain->add_option("--out", pretrain_args.out, "output checkpoint")
      ->capture_default_str();

  // run
  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run an experiment and write a results CSV");
  add_config_options(run, run_args.config);
  add_key_flag(run, run_args.config, "--mode", "run.mode", "al | gal | joint | full | joint_basic");
  add_key_flag(run, run_args.config, "--cycles", "run.cycles", "cycle count");
  add_key_flag(run, run_args.config, "--b-al", "al.b", "annotation batch per cycle");
  add_key_flag(run, run_args.config, "--seeds", "run.seeds", "replicate seeds, comma separated");
  add_key_flag(run, run_args.config, "--sigma-al", "al.sigma", "pool acquisition");
  add_key_flag(run, run_args.config, "--sigma-gal", "opt.sigma_gal", "generation acquisition");
  add_key_flag(run, run_args.config, "--epsilon-max", "opt.epsilon_max", "final ball radius");
  add_key_flag(run, run_args.config, "--epsilon-fixed", "opt.epsilon_fixed",
               "constant ball radius, bypassing the per-cycle ramp");
  add_key_flag(run, run_args.config, "--arch", "classifier.arch", "classifier architecture");
  add_key_flag(run, run_args.config, "--epochs", "classifier.epochs", "training epochs");
  add_key_flag(run, run_args.config, "--template", "gal.template", "generation template id");
  run->add_option("--world", run_args.world_dir, "world directory")->required();
  run->add_option("--generator", run_args.generator_path, "generator checkpoint");
  run->add_option("--out", run_args.out, "results CSV path")->capture_default_str();
  run->add_option("--manifest", run_args.manifest, "manifest path (default: <out>.manifest)");
  run->add_option("--dataset-out", run_args.dataset_out,
                  "dataset snapshot prefix (default: <out> stem)");
  run->add_option("--run-id", run_args.run_id, "run id (default: config digest)");
  run->add_flag("--no-dataset", run_args.no_dataset, "skip dataset snapshots");

  // ablate
  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "sweep one config key over a value grid");
  add_config_options(ablate, ablate_args.run.config);
  add_key_flag(ablate, ablate_args.run.config, "--mode", "run.mode", "experiment mode");
  add_key_flag(ablate, ablate_args.run.config, "--cycles", "run.cycles", "cycle count");
  add_key_flag(ablate, ablate_args.run.config, "--b-al", "al.b", "annotation batch per cycle");
  add_key_flag(ablate, ablate_args.run.config, "--seeds", "run.seeds", "replicate seeds");
  ablate->add_option("key", ablate_args.key, "config key to sweep")->required();
  ablate->add_option("--values", ablate_args.values, "comma-separated grid values")->required();
  ablate->add_option("--world", ablate_args.run.world_dir, "world directory")->required();
  ablate->add_option("--generator", ablate_args.run.generator_path, "generator checkpoint");
  ablate->add_option("--out", ablate_args.run.out,
                     "output stem; per-value files get .<key>.<value>.csv appended")
      ->capture_default_str();
  ablate->add_flag("--no-dataset", ablate_args.run.no_dataset, "skip dataset snapshots");

  // audit
  AuditArgs audit_args;
  auto* audit = app.add_subcommand("audit", "pseudo-label fidelity over a (template, eps) grid");
  add_config_options(audit, audit_args.config);
  audit->add_option("--world", audit_args.world_dir, "world directory")->required();
  audit->add_option("--generator", audit_args.generator_path, "generator checkpoint")->required();
  audit->add_option("--out", audit_args.out, "audit CSV path")->capture_default_str();
  audit->add_option("--eps", audit_args.eps, "epsilon grid, comma separated")
      ->capture_default_str();
  audit->add_option("--templates", audit_args.templates,
                    "template ids, comma separated (default: all)");
  audit->add_option("--n", audit_args.n_per_cell, "samples per cell")->capture_default_str();
  audit->add_option("--seed", audit_args.seed, "audit seed")->capture_default_str();

  // reuse
  ReuseArgs reuse_args;
  auto* reuse = app.add_subcommand("reuse", "retrain an architecture on a saved dataset");
  add_config_options(reuse, reuse_args.config);
  add_key_flag(reuse, reuse_args.config, "--arch", "classifier.arch", "architecture to train");
  add_key_flag(reuse, reuse_args.config, "--seeds", "run.seeds", "replicate seeds");
  add_key_flag(reuse, reuse_args.config, "--epochs", "classifier.epochs", "training epochs");
  reuse->add_option("--world", reuse_args.world_dir, "world directory")->required();
  reuse->add_option("--dataset", reuse_args.dataset, "dataset snapshot CSV")->required();
  reuse->add_option("--out", reuse_args.out, "results CSV path")->capture_default_str();
  reuse->add_option("--run-id", reuse_args.run_id, "run id (default: config digest)");

  // report
  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "merge result CSVs into an accuracy matrix");
  report->add_option("inputs", report_args.inputs, "result CSV files")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", report_args.out, "matrix CSV path")->capture_default_str();

  auto* config_cmd = app.add_subcommand("config", "list configuration keys with defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (world_make->parsed()) return cmd_world_make(world_args);
  if (generator_pretrain->parsed()) return cmd_generator_pretrain(pretrain_args);
  if (run->parsed()) return cmd_run(run_args);
  if (ablate->parsed()) return cmd_ablate(ablate_args);
  if (audit->parsed()) return cmd_audit(audit_args);
  if (reuse->parsed()) return cmd_reuse(reuse_args);
  if (report->parsed()) return cmd_report(report_args);
  if (config_cmd->parsed()) {
    std::cout << Config::defaults_help();
    return 0;
  }
  std::cerr << "usage error: no subcommand\n";
  return 2;
}
