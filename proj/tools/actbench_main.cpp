// Command-line driver: dataset generation and inspection, single-policy
// training, checkpoint evaluation, ablation sweeps, and report emission.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include "actbench/dataset.hpp"
#include "actbench/env.hpp"
#include "actbench/report.hpp"
#include "actbench/sensor_mask.hpp"
#include "actbench/train_eval.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace actbench;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string loss_csv_text(const std::vector<LossRow>& rows) {
  std::string out = "step,total,recon,kl\n";
  for (const LossRow& r : rows)
    out += std::to_string(r.step) + "," + fmt("%.9g", r.total) + "," +
           fmt("%.9g", r.recon) + "," + fmt("%.9g", r.kl) + "\n";
  return out;
}

std::string rollouts_csv_text(const RolloutResult& result) {
  std::string out =
      "trial,approach,grasp,lift,transport,release,success_fraction,steps,"
      "exec_time_min,terminal_x,terminal_y\n";
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const TrialOutcome& t = result.trials[i];
    out += std::to_string(i);
    for (bool b : {t.score.approach, t.score.grasp, t.score.lift, t.score.transport,
                   t.score.release})
      out += b ? ",1" : ",0";
    out += "," + fmt("%.2f", t.score.fraction());
    out += "," + std::to_string(t.steps);
    out += "," + fmt("%.6f", t.exec_time_min);
    out += "," + fmt("%.9g", t.terminal_object.x);
    out += "," + fmt("%.9g", t.terminal_object.y);
    out += "\n";
  }
  return out;
}

std::string probe_csv_text(const ModeProbeReport& report) {
  std::string out = "trial,terminal_x,terminal_y,dist_primary,dist_alt,dist_midpoint\n";
  for (const ModeProbeRow& r : report.rows)
    out += std::to_string(r.trial) + "," + fmt("%.9g", r.terminal.x) + "," +
           fmt("%.9g", r.terminal.y) + "," + fmt("%.9g", r.dist_primary) + "," +
           fmt("%.9g", r.dist_alt) + "," + fmt("%.9g", r.dist_midpoint) + "\n";
  return out;
}

struct EnvFlags {
  std::string config_path;
  double snr_db = 0.0;
  bool snr_set = false;
  bool bimodal = false;

  void attach(CLI::App* cmd, bool with_config = true) {
    if (with_config)
      cmd->add_option("--config", config_path, "environment config JSON path");
    cmd->add_option("--snr-db", snr_db, "override the pressure signal-to-noise ratio (dB)")
        ->each([this](const std::string&) { snr_set = true; });
    cmd->add_flag("--bimodal", bimodal, "override: demonstrations use two drop boxes");
  }

  EnvConfig resolve(const std::string& fallback_path = "") const {
    EnvConfig env;
    if (!config_path.empty())
      env = EnvConfig::load(config_path);
    else if (!fallback_path.empty())
      env = EnvConfig::load(fallback_path);
    if (snr_set) env.snr_db = snr_db;
    if (bimodal) env.bimodal = true;
    env.validate();
    return env;
  }
};

int cmd_gen_data(const std::string& out_dir, const EnvFlags& env_flags, int episodes,
                 std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("--episodes must be >= 1");
  const EnvConfig env = env_flags.resolve();
  std::filesystem::create_directories(out_dir);
  write_file_atomic(std::filesystem::path(out_dir) / "env.json", env.to_json());
  Manifest manifest = build_manifest(env);
  write_manifest(out_dir, manifest);
  for (int i = 0; i < episodes; ++i)
    write_episode(out_dir, manifest,
                  scripted_demo(env, seed + static_cast<std::uint64_t>(i)));
  std::cout << "wrote " << episodes << " episodes to " << out_dir << "\n";
  return 0;
}

int cmd_inspect(const std::string& dataset_dir) {
  const Manifest manifest = read_manifest(dataset_dir);
  const DatasetStats stats = dataset_stats(dataset_dir);
  std::cout << "dataset: " << manifest.dataset_name << "\n"
            << "episodes: " << manifest.episode_count << "\n"
            << "fps: " << manifest.fps << "\n"
            << "streams:\n";
  for (const StreamDescriptor& s : manifest.streams) {
    std::cout << "  " << s.name << " [";
    for (std::size_t i = 0; i < s.frame_shape.size(); ++i)
      std::cout << (i ? "x" : "") << s.frame_shape[i];
    std::cout << "] " << s.units << "\n";
  }
  std::cout << "total frames: " << stats.frames << "\n"
            << "duration: " << fmt("%.1f", stats.duration_seconds) << "s\n";

  const ValidationReport report = validate_sync(dataset_dir);
  if (!report.ok) {
    std::cerr << "sync validation FAILED:\n";
    for (const ValidationIssue& issue : report.issues)
      std::cerr << "  episode " << issue.episode_id << ": " << issue.what << "\n";
    return 2;
  }
  std::cout << "sync validation: ok (" << report.episodes_checked << " episodes)\n";
  return 0;
}

struct TrainFlags {
  std::int64_t steps = 5000;
  int batch = 8;
  double lr = 1e-3;
  double beta = 10.0;
  std::int64_t eval_every = 100;
  std::uint64_t seed = 0;
  bool no_normalize = false;
  double ema_decay = 0.999;
  std::string groups_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", steps, "optimizer steps");
    cmd->add_option("--batch", batch, "samples per step");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--beta", beta, "KL weight");
    cmd->add_option("--eval-every", eval_every, "loss logging interval");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_flag("--no-normalize", no_normalize, "skip state z-score normalization");
    cmd->add_option("--ema-decay", ema_decay, "checkpoint weight EMA decay (0 = raw final step)");
    cmd->add_option("--groups", groups_path, "channel-group map JSON path");
  }

  TrainConfig config() const {
    TrainConfig cfg;
    cfg.total_steps = steps;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.beta = beta;
    cfg.eval_every = eval_every;
    cfg.seed = seed;
    cfg.normalize = !no_normalize;
    cfg.ema_decay = ema_decay;
    return cfg;
  }

  ChannelGroupMap groups() const {
    return groups_path.empty() ? ChannelGroupMap::defaults()
                               : ChannelGroupMap::load(groups_path);
  }
};

struct StrategyFlags {
  std::string strategy = "temporal_ensemble";
  double weight = 0.9;

  void attach(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy,
                    "replan_each_step | open_loop_chunk | temporal_ensemble");
    cmd->add_option("--weight", weight, "temporal ensemble age weight in [0, 1]");
  }

  RolloutOptions options() const {
    RolloutOptions opts;
    opts.strategy = parse_strategy(strategy);
    opts.ensemble_weight = weight;
    opts.validate();
    return opts;
  }
};

int cmd_train(const std::string& dataset_dir, const std::string& policy,
              const std::string& out_dir, const TrainFlags& flags) {
  const TrainResult result =
      train_policy(dataset_dir, policy, flags.config(), flags.groups());
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  save_checkpoint(out / "checkpoint.uafc", result.checkpoint);
  write_file_atomic(out / "loss.csv", loss_csv_text(result.losses));
  std::cout << "trained " << result.checkpoint.policy << " for "
            << result.checkpoint.steps << " steps in " << fmt("%.1f", result.wall_seconds)
            << "s; final loss " << fmt("%.6g", result.losses.back().total) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const EnvFlags& env_flags, int trials,
             std::uint64_t seed, const StrategyFlags& strategy, bool probe,
             const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const EnvConfig env = env_flags.resolve();
  const RolloutOptions opts = strategy.options();

  const RolloutResult result = rollout(ckpt, env, trials, seed, opts);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out(out_dir);
  write_file_atomic(out / "rollouts.csv", rollouts_csv_text(result));
  std::cout << "policy " << ckpt.policy << ": mean success "
            << fmt("%.1f", result.mean_success_pct) << "% over " << result.trial_count
            << " trials, mean exec time " << fmt("%.3f", result.mean_exec_time_min)
            << " min\n";

  if (probe) {
    if (!env.bimodal)
      std::cerr << "warning: environment is not bimodal; the mode-averaging probe "
                   "ran against a single demonstrated mode\n";
    const ModeProbeReport report = mode_averaging_probe(ckpt, env, trials, seed, opts);
    write_file_atomic(out / "probe.csv", probe_csv_text(report));
  }
  return 0;
}

int cmd_ablate(const std::string& dataset_dir, const std::string& policies_arg,
               const std::string& out_dir, const TrainFlags& train_flags,
               const EnvFlags& env_flags, int trials, std::uint64_t eval_seed,
               const StrategyFlags& strategy) {
  const std::vector<std::string> names = split_commas(policies_arg);

  AblationOptions opts;
  opts.train = train_flags.config();
  opts.groups = train_flags.groups();
  opts.env =
      env_flags.resolve((std::filesystem::path(dataset_dir) / "env.json").string());
  opts.trials = trials;
  opts.eval_seed = eval_seed;
  opts.rollout = strategy.options();

  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  opts.row_sink = [&](const std::string& policy, const TrainResult& trained,
                      const RolloutResult& rolled) {
    const std::filesystem::path row_dir = out / policy;
    std::filesystem::create_directories(row_dir);
    save_checkpoint(row_dir / "checkpoint.uafc", trained.checkpoint);
    write_file_atomic(row_dir / "loss.csv", loss_csv_text(trained.losses));
    write_file_atomic(row_dir / "rollouts.csv", rollouts_csv_text(rolled));
    std::cout << policy << ": success " << fmt("%.1f", rolled.mean_success_pct)
              << "%, exec " << fmt("%.3f", rolled.mean_exec_time_min) << " min\n";
  };

  const AblationReport report = run_ablation(dataset_dir, names, opts);
  for (const AblationRow& row : report.rows)
    if (row.failed) std::cerr << "row " << row.policy << " failed: " << row.error << "\n";
  emit_report(report, out);
  std::cout << "report written to " << (out / "report.csv").string() << "\n";
  return 0;
}

int cmd_report(const std::string& csv_path, const std::string& out_dir) {
  const AblationReport report = read_report_csv(csv_path);
  if (report.rows.empty()) throw std::invalid_argument("report csv has no rows");
  std::filesystem::create_directories(out_dir);
  write_file_atomic(std::filesystem::path(out_dir) / "pareto.svg",
                    pareto_svg_text(report));
  std::cout << "pareto.svg written for " << report.rows.size() << " rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sensor-ablation benchmark for action-chunking policies", "actbench"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "record scripted demonstrations");
  std::string gen_out;
  int gen_episodes = 50;
  std::uint64_t gen_seed = 0;
  EnvFlags gen_env;
  gen->add_option("--out", gen_out, "dataset directory")->required();
  gen->add_option("--episodes", gen_episodes, "episode count");
  gen->add_option("--seed", gen_seed, "base seed; episode i uses seed + i");
  gen_env.attach(gen);

  // inspect
  auto* ins = app.add_subcommand("inspect", "print dataset stats and validate sync");
  std::string ins_dataset;
  ins->add_option("--dataset", ins_dataset, "dataset directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train one policy on a dataset");
  std::string tr_dataset, tr_policy, tr_out;
  TrainFlags tr_flags;
  tr->add_option("--dataset", tr_dataset, "dataset directory")->required();
  tr->add_option("--policy", tr_policy, "policy name, e.g. S_LWA-P")->required();
  tr->add_option("--out", tr_out, "output directory for checkpoint.uafc and loss.csv")
      ->required();
  tr_flags.attach(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "roll out a checkpoint in the environment");
  std::string ev_checkpoint, ev_out;
  int ev_trials = 10;
  std::uint64_t ev_seed = 1000;
  bool ev_probe = false;
  EnvFlags ev_env;
  StrategyFlags ev_strategy;
  ev->add_option("--checkpoint", ev_checkpoint, "checkpoint.uafc path")->required();
  ev->add_option("--trials", ev_trials, "rollout trials; trial i uses seed + i");
  ev->add_option("--seed", ev_seed, "base evaluation seed");
  ev->add_option("--out", ev_out, "output directory for rollouts.csv")->required();
  ev->add_flag("--probe", ev_probe, "also write the mode-averaging probe.csv");
  ev_env.attach(ev);
  ev_strategy.attach(ev);

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and evaluate a list of policies");
  std::string ab_dataset, ab_policies, ab_out;
  int ab_trials = 10;
  std::uint64_t ab_eval_seed = 1000;
  TrainFlags ab_train;
  EnvFlags ab_env;
  StrategyFlags ab_strategy;
  ab->add_option("--dataset", ab_dataset, "dataset directory")->required();
  ab->add_option("--policies", ab_policies, "comma-separated policy names")->required();
  ab->add_option("--out", ab_out, "sweep directory (per-policy subdirs plus report)")
      ->required();
  ab->add_option("--trials", ab_trials, "rollout trials per policy");
  ab->add_option("--eval-seed", ab_eval_seed, "base evaluation seed, shared by rows");
  ab_train.attach(ab);
  ab_env.attach(ab);
  ab_strategy.attach(ab);

  // report
  auto* rep = app.add_subcommand("report", "re-emit the pareto scatter from a report.csv");
  std::string rep_csv, rep_out;
  rep->add_option("--csv", rep_csv, "existing report.csv")->required();
  rep->add_option("--out", rep_out, "output directory for pareto.svg")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_out, gen_env, gen_episodes, gen_seed);
    if (ins->parsed()) return cmd_inspect(ins_dataset);
    if (tr->parsed()) return cmd_train(tr_dataset, tr_policy, tr_out, tr_flags);
    if (ev->parsed())
      return cmd_eval(ev_checkpoint, ev_env, ev_trials, ev_seed, ev_strategy, ev_probe,
                      ev_out);
    if (ab->parsed())
      return cmd_ablate(ab_dataset, ab_policies, ab_out, ab_train, ab_env, ab_trials,
                        ab_eval_seed, ab_strategy);
    if (rep->parsed()) return cmd_report(rep_csv, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
