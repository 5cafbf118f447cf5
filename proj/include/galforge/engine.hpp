#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "galforge/acquisition.hpp"
#include "galforge/classifier.hpp"
#include "galforge/condition_opt.hpp"
#include "galforge/config.hpp"
#include "galforge/generator.hpp"
#include "galforge/pools.hpp"
#include "galforge/worldgen.hpp"

namespace galforge {

enum class Mode { al, gal, joint, full, joint_basic };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

enum class BatchRule { equal_l, ratio, fixed };

BatchRule parse_batch_rule(const std::string& name);

struct ExperimentConfig {
  Mode mode = Mode::joint;
  std::size_t cycles = 10;
  std::size_t b_al = 50;
  BatchRule b_rule = BatchRule::equal_l;
  double b_ratio = 1.0;
  std::size_t b_fixed = 0;
  AcqKind sigma_al = AcqKind::entropy;
  AcqKind sigma_gal = AcqKind::entropy;
  std::size_t mc_passes = 10;
  std::size_t gen_multiplier = 1;
  bool retain_generated = true;  // false drops G before each cycle's batch
  bool reset_labeled = false;    // true rebuilds L from this cycle's picks only
  double epsilon_max = 0.5;
  double epsilon_fixed = -1.0;  // >= 0 pins epsilon every cycle, bypassing the ramp
  double alpha_ratio = 0.2;
  std::size_t opt_steps = 10;
  std::size_t opt_samples = 6;
  bool chain_factor = true;
  int template_id = 1;
  std::string architecture_id = "mlp-64x64";
  double dropout_rate = 0.1;
  std::size_t epochs = 200;  // already multiplied by epochs_multiplier
  std::size_t train_batch = 64;
  double lr = 1e-3;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string run_id = "run";
  bool emit_wall_ms = false;

  static ExperimentConfig from_config(const Config& config);
};

struct ResultRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string method;
  std::size_t cycle = 0;
  std::size_t annotation_budget = 0;
  double test_accuracy = 0.0;
  double mean_sigma_generated = 0.0;   // 0 when the cycle generated nothing
  double pseudo_label_accuracy = 0.0;  // oracle agreement on the cycle's batch
  std::uint64_t wall_ms = 0;
};

std::string method_string(const ExperimentConfig& config);

std::string results_csv(std::span<const ResultRow> rows);
std::vector<ResultRow> parse_results_csv(const std::string& text);

// Stage-tagged seed split: every stochastic stage of a run derives its seed
// from (replicate seed, stage, cycle, index), so toggling one stage never
// shifts another stage's draws.
namespace stage {
inline constexpr std::uint64_t kInit = 0x696e6974;      // classifier init
inline constexpr std::uint64_t kTrain = 0x7472616e;     // classifier training
inline constexpr std::uint64_t kSelect = 0x73656c63;    // pool selection
inline constexpr std::uint64_t kOpt = 0x746f7074;       // condition ascent
inline constexpr std::uint64_t kGen = 0x67656e72;       // sample generation
inline constexpr std::uint64_t kSigmaEval = 0x73676576; // sigma logging
inline constexpr std::uint64_t kSubsample = 0x73756273; // multiplier subsample
inline constexpr std::uint64_t kAudit = 0x61756474;     // audit cells
}  // namespace stage

// One full run per seed; rows come back seed-major, cycle-minor.
// Modes: al labels B_AL pool points per cycle; gal only generates; joint does
// both and trains on L u G; joint_basic is joint with the identity template
// and epsilon pinned to 0; full trains once on pool + pretrain with true
// labels. `generator` may be null for modes that never generate (al, full).
std::vector<ResultRow> run_experiment(const ExperimentConfig& config, const World& world,
                                      const GeneratorModel* generator);

// run_experiment plus each seed's final L u G snapshot, for reuse
struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::uint64_t, std::vector<SnapshotRow>>> datasets;
};

RunOutput run_experiment_full(const ExperimentConfig& config, const World& world,
                              const GeneratorModel* generator);

// Pseudo-label fidelity audit: per (template, epsilon) cell, conditions drawn
// uniformly in the epsilon-ball around random class anchors, one sample each,
// judged by the world oracle against the condition's class.
struct AuditCell {
  int template_id = 0;
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> class_n;        // per true condition class
  std::vector<std::size_t> class_correct;

  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

std::vector<AuditCell> audit_pseudo_labels(const GeneratorModel& generator, const World& world,
                                           std::span<const double> eps_grid,
                                           std::span<const int> templates, std::size_t n_per_cell,
                                           std::uint64_t seed);

// "template,epsilon,class,n,correct,accuracy" rows; class -1 aggregates the cell
std::string audit_csv(std::span<const AuditCell> cells);

// Replays a snapshot's cycles, training `architecture_id` on the stored
// L u G per cycle. Never touches the generator.
std::vector<ResultRow> reuse_dataset(const std::vector<SnapshotRow>& snapshot,
                                     const ExperimentConfig& config, const World& world);

}  // namespace galforge
