#pragma once

// Step-based behavior-cloning trainer over a masked dataset view, checkpoint
// serialization, closed-loop rollout evaluation with chunk stitching, the
// ablation sweep driver, and the bimodal mode-averaging probe.
//
// Seeding contract: training is deterministic in (dataset, TrainConfig);
// rollout trial i always resets the environment with seed + i, so every
// sweep row sees identical trial conditions and outcome differences are
// attributable to the sensor configuration alone.

#include "actbench/act_model.hpp"
#include "actbench/dataset.hpp"
#include "actbench/env.hpp"
#include "actbench/report.hpp"
#include "actbench/sensor_mask.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace actbench {

struct TrainConfig {
  std::int64_t total_steps = 5000;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta = 10.0;  // KL weight
  std::int64_t eval_every = 100;
  std::uint64_t seed = 0;
  bool normalize = true;  // z-score the assembled state channels
  // Checkpointed weights are a bias-corrected EMA of the iterates; 0 keeps
  // the raw final step.
  double ema_decay = 0.999;

  void validate() const;  // throws std::invalid_argument
};

struct LossRow {
  std::int64_t step = 0;
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

// Everything needed to run the policy later: model geometry, the resolved
// sensor selection, normalization statistics, and the parameters.
struct Checkpoint {
  int format_version = 1;
  std::string policy;
  std::int64_t steps = 0;
  double fps = 0.0;
  bool normalize = true;
  ModelConfig model;
  SensorConfig sensors;
  std::vector<double> state_mean, state_std;  // std pre-floored, never zero
  ACTParams params;
};

// Container format: "UAFC" magic, u32 little-endian header length, a JSON
// header, then one named f64 stream block per parameter tensor in entry
// order (the dataset block codec with T = 1).
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRow> losses;  // every eval_every steps, plus the final step
  double wall_seconds = 0.0;    // excluded from all serialized artifacts
};

// Parse -> resolve -> per-step: sample a batch of (observation, k-step action
// window, edge-padded), assemble masked states, CVAE loss, Adam step.
// Deterministic in (dataset bytes, cfg). Throws before touching the model if
// the policy cannot be resolved; throws NumericError if the loss goes
// non-finite.
TrainResult train_policy(const std::filesystem::path& dataset_dir,
                         const std::string& policy_name, const TrainConfig& cfg,
                         const ChannelGroupMap& groups);

enum class ChunkStrategy { kReplanEachStep, kOpenLoopChunk, kTemporalEnsemble };

ChunkStrategy parse_strategy(const std::string& name);  // throws std::invalid_argument
std::string strategy_name(ChunkStrategy strategy);

struct RolloutOptions {
  ChunkStrategy strategy = ChunkStrategy::kTemporalEnsemble;
  double ensemble_weight = 0.9;  // in [0, 1]; 0 degenerates to newest-only

  void validate() const;
};

// Stitches predicted chunks into one action per environment step. The
// forward callback is invoked only when a strategy needs a fresh chunk
// (every step except inside an open-loop chunk).
class ChunkExecutor {
 public:
  explicit ChunkExecutor(const RolloutOptions& opts);

  std::array<double, 4> next(const std::function<MatRM()>& forward);
  void reset();  // start of a new trial

 private:
  RolloutOptions opts_;
  MatRM chunk_;  // open-loop buffer
  Eigen::Index cursor_ = 0;
  int step_ = 0;
  std::vector<std::pair<int, MatRM>> history_;  // (birth step, chunk)
};

struct TrialOutcome {
  SubtaskScore score;
  int steps = 0;  // environment steps taken
  double exec_time_min = 0.0;
  Vec2 terminal_object{};
};

struct RolloutResult {
  std::vector<TrialOutcome> trials;
  double mean_success_pct = 0.0;    // mean subtask fraction * 100
  double mean_exec_time_min = 0.0;  // steps until release (or truncation) at fps
  int trial_count = 0;
};

// A policy as seen by the rollout loop: current world state and sensor frame
// in, an action chunk (rows x 4) out.
using ChunkSource = std::function<MatRM(const WorldState&, const SensorFrame&)>;

// Trial i runs from reset(env, seed + i) until the object is released inside
// a box or max_steps is hit. Throws std::invalid_argument when trials < 1.
RolloutResult rollout_core(const ChunkSource& source, const EnvConfig& env, int trials,
                           std::uint64_t seed, const RolloutOptions& opts);

// Closed-loop evaluation of a checkpointed policy, z at the prior mean.
// Throws SchemaError when the checkpoint's sensor layout does not match the
// environment's manifest.
RolloutResult rollout(const Checkpoint& ckpt, const EnvConfig& env, int trials,
                      std::uint64_t seed, const RolloutOptions& opts = {});

// The state vector the policy sees at one live frame: the checkpoint's
// retained channels, f32-quantized exactly like the recorded streams.
std::vector<double> frame_state_vector(const SensorFrame& frame,
                                       const SensorConfig& sensors);

struct AblationOptions {
  TrainConfig train;       // shared verbatim by every row (same seed)
  EnvConfig env;
  int trials = 10;
  std::uint64_t eval_seed = 1000;  // trial i uses eval_seed + i in every row
  RolloutOptions rollout;
  ChannelGroupMap groups = ChannelGroupMap::defaults();
  // Called after each successful row, e.g. to persist per-policy artifacts.
  std::function<void(const std::string& policy, const TrainResult&, const RolloutResult&)>
      row_sink;
};

// Trains and evaluates each name against the same dataset and seeds. A
// failing row is recorded (failed flag + message) and the sweep continues;
// pareto flags cover the surviving rows. Name parse errors throw up front.
AblationReport run_ablation(const std::filesystem::path& dataset_dir,
                            const std::vector<std::string>& policy_names,
                            const AblationOptions& opts);

struct ModeProbeRow {
  int trial = 0;
  Vec2 terminal{};  // object position at trial end
  double dist_primary = 0.0;
  double dist_alt = 0.0;
  double dist_midpoint = 0.0;
};

struct ModeProbeReport {
  bool bimodal_env = false;  // false: caller should warn; the probe still ran
  Vec2 mode_primary{}, mode_alt{}, midpoint{};
  std::vector<ModeProbeRow> rows;
};

// Per-trial terminal drop positions and their distances to the two
// demonstrated modes and the midpoint between them.
ModeProbeReport mode_averaging_probe(const Checkpoint& ckpt, const EnvConfig& env,
                                     int trials, std::uint64_t seed,
                                     const RolloutOptions& opts = {});

}  // namespace actbench
