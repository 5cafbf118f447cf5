#include "galforge/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "galforge/io_util.hpp"
#include "galforge/rng.hpp"

namespace galforge {

namespace {

std::uint64_t now_ms() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

ClassifierSpec make_spec(const ExperimentConfig& config, const World& world) {
  ClassifierSpec spec;
  spec.architecture_id = config.architecture_id;
  spec.dropout_rate = config.dropout_rate;
  spec.input_dim = world.spec.dim;
  spec.classes = world.spec.classes;
  return spec;
}

// B_GAL is sized against the annotation budget, not literal |L|, so gal mode
// (which never annotates) still generates the budget-equivalent count.
std::size_t b_gal_for_cycle(const ExperimentConfig& config, std::size_t cycle) {
  switch (config.b_rule) {
    case BatchRule::equal_l:
      return cycle * config.b_al;
    case BatchRule::ratio:
      return static_cast<std::size_t>(
          std::llround(config.b_ratio * static_cast<double>(config.b_al)));
    case BatchRule::fixed:
      return config.b_fixed;
  }
  throw std::logic_error("b_gal_for_cycle: unhandled rule");
}

struct CycleStats {
  double mean_sigma = 0.0;
  double pseudo_accuracy = 0.0;
};

// optimizes one condition per class, generates the cycle's batch round-robin
// over classes, and appends it to G with pseudo-labels
CycleStats generate_cycle_batch(const ExperimentConfig& config, const World& world,
                                const GeneratorModel& generator,
                                const ClassifierModel& classifier, Pools& pools,
                                std::size_t cycle, std::size_t b_gal, std::uint64_t master) {
  const std::size_t classes = world.spec.classes;
  const bool basic = config.mode == Mode::joint_basic;
  const double epsilon = basic ? 0.0
                         : config.epsilon_fixed >= 0.0
                             ? config.epsilon_fixed
                             : epsilon_schedule(cycle, config.cycles, config.epsilon_max);
  const int template_id = basic ? 0 : config.template_id;

  TextOptConfig opt;
  opt.epsilon = epsilon;
  opt.alpha_ratio = config.alpha_ratio;
  opt.steps = config.opt_steps;
  opt.samples = config.opt_samples;
  opt.sigma = AcquisitionFn{config.sigma_gal, config.mc_passes, 0};
  opt.apply_chain_factor = config.chain_factor;

  std::vector<Condition> conditions(classes);
  parallel_for(classes, [&](std::size_t y) {
    const Condition anchor = predefined_condition(world.table, static_cast<int>(y), template_id);
    conditions[y] =
        text_opt(anchor, opt, generator, classifier, seed_mix(master, stage::kOpt, cycle, y));
  });

  // round-robin class counts: class y of sample i is i mod C
  std::vector<std::size_t> counts(classes, b_gal / classes);
  for (std::size_t y = 0; y < b_gal % classes; ++y) ++counts[y];

  const std::size_t multiplier = std::max<std::size_t>(1, config.gen_multiplier);
  std::vector<std::vector<std::vector<double>>> kept(classes);
  const std::uint64_t gen_base = seed_mix(master, stage::kGen, cycle);

  for (std::size_t y = 0; y < classes; ++y) {
    const std::size_t candidates = counts[y] * multiplier;
    std::vector<std::vector<double>> xs(candidates);
    parallel_for(candidates, [&](std::size_t j) {
      xs[j] = reverse_sample(generator, conditions[y], seed_mix(gen_base, y, j), false).x0;
    });
    if (multiplier == 1) {
      kept[y] = std::move(xs);
    } else {
      // seeded uniform subsample back to the round-robin count, order kept
      // ascending so multiplier=1 and subsampled runs align structurally
      std::vector<std::size_t> idx(candidates);
      for (std::size_t j = 0; j < candidates; ++j) idx[j] = j;
      Rng rng(seed_mix(master, stage::kSubsample, cycle, y));
      for (std::size_t j = 0; j < counts[y]; ++j)
        std::swap(idx[j], idx[j + rng.uniform_int(candidates - j)]);
      idx.resize(counts[y]);
      std::sort(idx.begin(), idx.end());
      kept[y].reserve(counts[y]);
      for (std::size_t j : idx) kept[y].push_back(std::move(xs[j]));
    }
  }

  CycleStats stats;
  std::vector<std::size_t> used(classes, 0);
  std::size_t correct = 0;
  double sigma_sum = 0.0;
  for (std::size_t i = 0; i < b_gal; ++i) {
    const std::size_t y = i % classes;
    const std::vector<double>& x = kept[y][used[y]++];
    pools.append_generated(x, conditions[y], epsilon, static_cast<int>(cycle));
    if (world.oracle_label(x) == static_cast<int>(y)) ++correct;
    AcquisitionFn sigma{config.sigma_gal, config.mc_passes, 0};
    sigma_sum +=
        sigma_of_point(sigma, classifier, x, seed_mix(master, stage::kSigmaEval, cycle, i));
  }
  if (b_gal > 0) {
    stats.mean_sigma = sigma_sum / static_cast<double>(b_gal);
    stats.pseudo_accuracy = static_cast<double>(correct) / static_cast<double>(b_gal);
  }
  return stats;
}

struct SeedOutcome {
  std::vector<ResultRow> rows;
  std::vector<SnapshotRow> dataset;
};

SeedOutcome run_one_seed(const ExperimentConfig& config, const World& world,
                         const GeneratorModel* generator, std::uint64_t master) {
  const ClassifierSpec spec = make_spec(config, world);
  const std::string method = method_string(config);
  const Tensor test_xs = [&] {
    Tensor t = Tensor::zeros({world.test.n, world.test.d});
    t.data = world.test.xs;
    return t;
  }();

  SeedOutcome outcome;
  std::vector<ResultRow>& rows = outcome.rows;

  if (config.mode == Mode::full) {
    const std::uint64_t t0 = now_ms();
    LabeledSet set;
    set.d = world.spec.dim;
    for (std::size_t i = 0; i < world.pool.n; ++i)
      set.append(world.pool.row(i), world.pool.ys[i]);
    for (std::size_t i = 0; i < world.pretrain.n; ++i)
      set.append(world.pretrain.row(i), world.pretrain.ys[i]);
    TrainConfig train{config.epochs, config.train_batch, config.lr,
                      seed_mix(master, stage::kTrain, 1)};
    const ClassifierModel model = train_classifier(spec, set, train);
    ResultRow row;
    row.run_id = config.run_id;
    row.seed = master;
    row.method = method;
    row.cycle = 1;
    row.annotation_budget = world.pool.n + world.pretrain.n;
    row.test_accuracy = model.accuracy(test_xs, world.test.ys);
    row.wall_ms = config.emit_wall_ms ? now_ms() - t0 : 0;
    rows.push_back(row);
    return outcome;
  }

  const bool do_al = config.mode == Mode::al || config.mode == Mode::joint ||
                     config.mode == Mode::joint_basic;
  const bool do_gal = config.mode == Mode::gal || config.mode == Mode::joint ||
                      config.mode == Mode::joint_basic;

  Pools pools(world.pool.xs, world.pool.n, world.pool.d);
  const auto oracle = [&world](std::span<const double> x) { return world.oracle_label(x); };

  ClassifierModel current = init_classifier(spec, seed_mix(master, stage::kInit, 0));

  for (std::size_t cycle = 1; cycle <= config.cycles; ++cycle) {
    const std::uint64_t t0 = now_ms();

    if (do_al) {
      if (config.b_al > pools.unlabeled_count())
        throw std::runtime_error("run: cycle " + std::to_string(cycle) + " needs " +
                                 std::to_string(config.b_al) + " unlabeled points but only " +
                                 std::to_string(pools.unlabeled_count()) + " remain");
      if (config.reset_labeled) pools.drop_labeled_entries();
      const Tensor pool_xs = pools.unlabeled_features();
      AcquisitionFn select{config.sigma_al, config.mc_passes,
                           seed_mix(master, stage::kSelect, cycle)};
      Tensor labeled_features;
      const Tensor* labeled_ptr = nullptr;
      if (config.sigma_al == AcqKind::coreset && pools.labeled_count() > 0) {
        labeled_features = current.features(pools.labeled_set().features_tensor());
        labeled_ptr = &labeled_features;
      }
      const std::vector<std::size_t> picks =
          select_top(select, current, pool_xs, config.b_al, labeled_ptr);
      pools.move_selected(picks, oracle, static_cast<int>(cycle));
    }

    CycleStats stats;
    if (do_gal) {
      if (!config.retain_generated) pools.clear_generated();
      const std::size_t b_gal = b_gal_for_cycle(config, cycle);
      if (b_gal > 0)
        stats = generate_cycle_batch(config, world, *generator, current, pools, cycle, b_gal,
                                     master);
    }

    const LabeledSet train_set = pools.combined_set(config.mode != Mode::gal, do_gal);
    if (train_set.n == 0)
      throw std::runtime_error("run: cycle " + std::to_string(cycle) +
                               " has an empty training set");
    TrainConfig train{config.epochs, config.train_batch, config.lr,
                      seed_mix(master, stage::kTrain, cycle)};
    current = train_classifier(spec, train_set, train);

    ResultRow row;
    row.run_id = config.run_id;
    row.seed = master;
    row.method = method;
    row.cycle = cycle;
    row.annotation_budget = pools.annotations();
    row.test_accuracy = current.accuracy(test_xs, world.test.ys);
    row.mean_sigma_generated = stats.mean_sigma;
    row.pseudo_label_accuracy = stats.pseudo_accuracy;
    row.wall_ms = config.emit_wall_ms ? now_ms() - t0 : 0;
    rows.push_back(row);
  }
  outcome.dataset = pools.snapshot_rows();
  return outcome;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "al") return Mode::al;
  if (name == "gal") return Mode::gal;
  if (name == "joint") return Mode::joint;
  if (name == "full") return Mode::full;
  if (name == "joint_basic") return Mode::joint_basic;
  throw std::invalid_argument("mode: unknown mode '" + name + "'");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::al: return "al";
    case Mode::gal: return "gal";
    case Mode::joint: return "joint";
    case Mode::full: return "full";
    case Mode::joint_basic: return "joint_basic";
  }
  throw std::logic_error("mode_name: unhandled mode");
}

BatchRule parse_batch_rule(const std::string& name) {
  if (name == "equal_l") return BatchRule::equal_l;
  if (name == "ratio") return BatchRule::ratio;
  if (name == "fixed") return BatchRule::fixed;
  throw std::invalid_argument("gal.b_rule: unknown rule '" + name + "'");
}

ExperimentConfig ExperimentConfig::from_config(const Config& config) {
  ExperimentConfig out;
  out.mode = parse_mode(config.get("run.mode"));
  out.cycles = config.get_size("run.cycles");
  out.b_al = config.get_size("al.b");
  out.b_rule = parse_batch_rule(config.get("gal.b_rule"));
  out.b_ratio = config.get_double("gal.b_ratio");
  out.b_fixed = config.get_size("gal.b_fixed");
  out.sigma_al = parse_acq_kind(config.get("al.sigma"));
  out.sigma_gal = parse_acq_kind(config.get("opt.sigma_gal"));
  out.mc_passes = config.get_size("classifier.mc_passes");
  out.gen_multiplier = config.get_size("gal.gen_multiplier");
  if (out.gen_multiplier == 0)
    throw std::invalid_argument("gal.gen_multiplier: must be at least 1");
  const std::string& retention = config.get("gal.g_retention");
  if (retention != "accumulate" && retention != "replace")
    throw std::invalid_argument("gal.g_retention: unknown value '" + retention + "'");
  out.retain_generated = retention == "accumulate";
  out.reset_labeled = config.get_bool("al.reset_labeled");
  out.epsilon_max = config.get_double("opt.epsilon_max");
  out.epsilon_fixed = config.get_double("opt.epsilon_fixed");
  out.alpha_ratio = config.get_double("opt.alpha_ratio");
  out.opt_steps = config.get_size("opt.steps");
  out.opt_samples = config.get_size("opt.k");
  out.chain_factor = config.get_bool("opt.chain_factor");
  out.template_id = static_cast<int>(config.get_size("gal.template"));
  out.architecture_id = config.get("classifier.arch");
  out.dropout_rate = config.get_double("classifier.dropout");
  out.epochs = config.get_size("classifier.epochs") *
               std::max<std::size_t>(1, config.get_size("classifier.epochs_multiplier"));
  out.train_batch = config.get_size("classifier.batch");
  out.lr = config.get_double("classifier.lr");
  out.seeds = config.get_u64_list("run.seeds");
  out.emit_wall_ms = config.get_bool("run.emit_wall_ms");
  if (out.cycles == 0) throw std::invalid_argument("run.cycles: must be at least 1");
  return out;
}

std::string method_string(const ExperimentConfig& config) {
  switch (config.mode) {
    case Mode::al:
      return "al:" + acq_kind_name(config.sigma_al);
    case Mode::gal:
      return "gal:" + acq_kind_name(config.sigma_gal);
    case Mode::joint:
      return "joint:" + acq_kind_name(config.sigma_al) + "+" + acq_kind_name(config.sigma_gal);
    case Mode::joint_basic:
      return "joint_basic:" + acq_kind_name(config.sigma_al);
    case Mode::full:
      return "full";
  }
  throw std::logic_error("method_string: unhandled mode");
}

std::string results_csv(std::span<const ResultRow> rows) {
  std::ostringstream out;
  out << "run_id,seed,method,cycle,annotation_budget,test_accuracy,mean_sigma_generated,"
         "pseudo_label_accuracy,wall_ms\n";
  for (const auto& row : rows) {
    out << row.run_id << "," << row.seed << "," << row.method << "," << row.cycle << ","
        << row.annotation_budget << "," << format_double(row.test_accuracy) << ","
        << format_double(row.mean_sigma_generated) << ","
        << format_double(row.pseudo_label_accuracy) << "," << row.wall_ms << "\n";
  }
  return out.str();
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "run_id,seed,method,cycle,annotation_budget,test_accuracy,mean_sigma_generated,"
              "pseudo_label_accuracy,wall_ms")
    throw std::invalid_argument("results: malformed header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (fields.size() != 9)
      throw std::invalid_argument("results: wrong field count in '" + line + "'");
    ResultRow row;
    row.run_id = fields[0];
    row.seed = std::stoull(fields[1]);
    row.method = fields[2];
    row.cycle = std::stoull(fields[3]);
    row.annotation_budget = std::stoull(fields[4]);
    row.test_accuracy = parse_double(fields[5]);
    row.mean_sigma_generated = parse_double(fields[6]);
    row.pseudo_label_accuracy = parse_double(fields[7]);
    row.wall_ms = std::stoull(fields[8]);
    rows.push_back(std::move(row));
  }
  return rows;
}

RunOutput run_experiment_full(const ExperimentConfig& config, const World& world,
                              const GeneratorModel* generator) {
  if (config.seeds.empty()) throw std::invalid_argument("run: no replicate seeds");
  const bool needs_generator = config.mode == Mode::gal || config.mode == Mode::joint ||
                               config.mode == Mode::joint_basic;
  if (needs_generator) {
    if (generator == nullptr) throw std::invalid_argument("run: mode needs a generator");
    if (generator->data_dim != world.spec.dim)
      throw std::invalid_argument("run: generator dimension " +
                                  std::to_string(generator->data_dim) +
                                  " does not match world " + std::to_string(world.spec.dim));
    if (generator->cond_dim != world.table.cond_dim())
      throw std::invalid_argument("run: generator condition dimension mismatch");
    if (generator->table.class_embeddings != world.table.class_embeddings ||
        generator->table.template_offsets != world.table.template_offsets)
      throw std::invalid_argument("run: generator was pretrained against a different world");
  }
  if (config.template_id < 0 ||
      static_cast<std::size_t>(config.template_id) >= world.spec.templates)
    throw std::invalid_argument("run: template id out of range");

  std::vector<SeedOutcome> per_seed(config.seeds.size());
  parallel_for(config.seeds.size(), [&](std::size_t i) {
    per_seed[i] = run_one_seed(config, world, generator, config.seeds[i]);
  });
  RunOutput output;
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    for (auto& row : per_seed[i].rows) output.rows.push_back(std::move(row));
    output.datasets.emplace_back(config.seeds[i], std::move(per_seed[i].dataset));
  }
  return output;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, const World& world,
                                      const GeneratorModel* generator) {
  return run_experiment_full(config, world, generator).rows;
}

std::vector<AuditCell> audit_pseudo_labels(const GeneratorModel& generator, const World& world,
                                           std::span<const double> eps_grid,
                                           std::span<const int> templates, std::size_t n_per_cell,
                                           std::uint64_t seed) {
  if (eps_grid.empty() || templates.empty())
    throw std::invalid_argument("audit: empty grid");
  if (n_per_cell == 0) throw std::invalid_argument("audit: n_per_cell must be positive");
  for (double eps : eps_grid)
    if (eps < 0.0) throw std::invalid_argument("audit: negative epsilon");

  const std::size_t classes = world.spec.classes;
  const std::size_t cond_dim = world.table.cond_dim();
  std::vector<AuditCell> cells;
  cells.reserve(templates.size() * eps_grid.size());
  std::size_t cell_index = 0;
  for (int template_id : templates) {
    for (double eps : eps_grid) {
      AuditCell cell;
      cell.template_id = template_id;
      cell.epsilon = eps;
      cell.n = n_per_cell;
      cell.class_n.assign(classes, 0);
      cell.class_correct.assign(classes, 0);

      std::vector<char> hits(n_per_cell, 0);
      std::vector<int> ys(n_per_cell, 0);
      parallel_for(n_per_cell, [&](std::size_t i) {
        Rng rng(seed_mix(seed, stage::kAudit, cell_index, i));
        const auto y = static_cast<int>(rng.uniform_int(classes));
        Condition condition = predefined_condition(world.table, y, template_id);
        if (eps > 0.0) {
          // uniform in the ball: gaussian direction, radius eps * u^(1/d)
          std::vector<double> direction(cond_dim);
          double norm_sq = 0.0;
          for (double& v : direction) {
            v = rng.normal();
            norm_sq += v * v;
          }
          const double norm = std::sqrt(norm_sq);
          const double radius =
              eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(cond_dim));
          if (norm > 0.0)
            for (std::size_t j = 0; j < cond_dim; ++j)
              condition.vector[j] += radius * direction[j] / norm;
          condition.vector = project_to_ball(condition.vector, condition.anchor, eps);
        }
        const std::uint64_t sample_seed = seed_mix(seed_mix(seed, stage::kAudit, cell_index, i), 1);
        const SampleResult sample = reverse_sample(generator, condition, sample_seed, false);
        ys[i] = y;
        hits[i] = world.oracle_label(sample.x0) == y ? 1 : 0;
      });
      for (std::size_t i = 0; i < n_per_cell; ++i) {
        const auto y = static_cast<std::size_t>(ys[i]);
        ++cell.class_n[y];
        if (hits[i]) {
          ++cell.class_correct[y];
          ++cell.correct;
        }
      }
      cells.push_back(std::move(cell));
      ++cell_index;
    }
  }
  return cells;
}

std::string audit_csv(std::span<const AuditCell> cells) {
  std::ostringstream out;
  out << "template,epsilon,class,n,correct,accuracy\n";
  for (const auto& cell : cells) {
    out << cell.template_id << "," << format_double(cell.epsilon) << ",-1," << cell.n << ","
        << cell.correct << "," << format_double(cell.accuracy()) << "\n";
    for (std::size_t c = 0; c < cell.class_n.size(); ++c) {
      const double acc = cell.class_n[c] == 0
                             ? 0.0
                             : static_cast<double>(cell.class_correct[c]) /
                                   static_cast<double>(cell.class_n[c]);
      out << cell.template_id << "," << format_double(cell.epsilon) << "," << c << ","
          << cell.class_n[c] << "," << cell.class_correct[c] << "," << format_double(acc)
          << "\n";
    }
  }
  return out.str();
}

std::vector<ResultRow> reuse_dataset(const std::vector<SnapshotRow>& snapshot,
                                     const ExperimentConfig& config, const World& world) {
  if (snapshot.empty()) throw std::invalid_argument("reuse: empty snapshot");
  for (const auto& row : snapshot) {
    if (row.x.size() != world.spec.dim)
      throw std::invalid_argument("reuse: snapshot dimension " + std::to_string(row.x.size()) +
                                  " does not match world " + std::to_string(world.spec.dim));
    if (row.provenance != "pool" && row.provenance != "generated")
      throw std::invalid_argument("reuse: unexpected provenance '" + row.provenance + "'");
  }
  std::size_t last_cycle = 0;
  for (const auto& row : snapshot)
    last_cycle = std::max(last_cycle, static_cast<std::size_t>(std::max(row.cycle, 0)));
  if (last_cycle == 0) throw std::invalid_argument("reuse: snapshot has no cycle stamps");

  const ClassifierSpec spec = make_spec(config, world);
  const std::string method = "reuse:" + config.architecture_id;
  const Tensor test_xs = [&] {
    Tensor t = Tensor::zeros({world.test.n, world.test.d});
    t.data = world.test.xs;
    return t;
  }();

  std::vector<std::vector<ResultRow>> per_seed(config.seeds.size());
  parallel_for(config.seeds.size(), [&](std::size_t index) {
    const std::uint64_t master = config.seeds[index];
    std::vector<ResultRow> rows;
    for (std::size_t cycle = 1; cycle <= last_cycle; ++cycle) {
      const std::uint64_t t0 = now_ms();
      LabeledSet set;
      set.d = world.spec.dim;
      std::size_t budget = 0;
      std::size_t cycle_generated = 0;
      std::size_t cycle_generated_correct = 0;
      for (const auto& row : snapshot) {
        if (static_cast<std::size_t>(row.cycle) > cycle) continue;
        set.append(row.x, row.label);
        if (row.provenance == "pool") ++budget;
        if (row.provenance == "generated" && static_cast<std::size_t>(row.cycle) == cycle) {
          ++cycle_generated;
          if (world.oracle_label(row.x) == row.label) ++cycle_generated_correct;
        }
      }
      if (set.n == 0)
        throw std::runtime_error("reuse: cycle " + std::to_string(cycle) + " has no data");
      TrainConfig train{config.epochs, config.train_batch, config.lr,
                        seed_mix(master, stage::kTrain, cycle)};
      const ClassifierModel model = train_classifier(spec, set, train);
      ResultRow row;
      row.run_id = config.run_id;
      row.seed = master;
      row.method = method;
      row.cycle = cycle;
      row.annotation_budget = budget;
      row.test_accuracy = model.accuracy(test_xs, world.test.ys);
      row.pseudo_label_accuracy =
          cycle_generated == 0 ? 0.0
                               : static_cast<double>(cycle_generated_correct) /
                                     static_cast<double>(cycle_generated);
      row.wall_ms = config.emit_wall_ms ? now_ms() - t0 : 0;
      rows.push_back(std::move(row));
    }
    per_seed[index] = std::move(rows);
  });
  std::vector<ResultRow> rows;
  for (auto& seed_rows : per_seed)
    for (auto& row : seed_rows) rows.push_back(std::move(row));
  return rows;
}

}  // namespace galforge
