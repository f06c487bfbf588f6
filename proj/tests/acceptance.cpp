// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Reference thresholds marked "frozen" were calibrated once
// against the reference run and must not drift.

#include "actbench/act_model.hpp"
#include "actbench/dataset.hpp"
#include "actbench/env.hpp"
#include "actbench/graph.hpp"
#include "actbench/policy_name.hpp"
#include "actbench/report.hpp"
#include "actbench/rng.hpp"
#include "actbench/sensor_mask.hpp"
#include "actbench/train_eval.hpp"

#include "testdata.hpp"
#include "testutil.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace actbench;
using testutil::max_grad_rel_err;
using testutil::rand_tensor;
using testutil::rel_err;
using testutil::with_cotangent;

namespace {

int g_failures = 0;

void report_line(int criterion, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << criterion << ": " << detail
            << std::endl;
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Reference setup shared by criteria 5, 7, and 9: 50 scripted demonstrations
// in the default environment, policy "A", 5000 steps, seed 7, evaluated over
// 20 rollouts from seed 1000.
constexpr std::uint64_t kReferenceSeed = 7;
constexpr std::uint64_t kReferenceEvalSeed = 1000;
constexpr int kReferenceEvalTrials = 20;

// ---------------------------------------------------------------------------

void criterion_1_grammar() {
  const std::vector<std::string> names = {
      "A",     "A-P",     "S",         "SW",         "WA",          "WA-P", "W_RA",
      "S_LWA", "S_LWA-P", "WA-PV_AT_A", "S_LWA-PV_AT_A"};
  const Manifest manifest = build_manifest(EnvConfig{});
  const ChannelGroupMap groups = ChannelGroupMap::defaults();

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> bad;
  for (const std::string& name : names) {
    try {
      const PolicyName parsed = parse_policy_name(name);
      const SensorConfig config = resolve_config(parsed, groups, manifest);
      if (config.state_dim < 4 || config.camera_streams.empty())
        throw std::runtime_error("implausible resolution");
      if (format_policy_name(normalize_policy_name(parsed)) != name)
        throw std::runtime_error("round trip changed the name");
    } catch (const std::exception& e) {
      bad.push_back(name + " (" + e.what() + ")");
    }
  }
  const double dt = seconds_since(t0);

  std::string detail =
      "all 11 policy names parse, resolve, and round-trip in " + num(dt) + "s";
  if (!bad.empty()) {
    detail = "failed names:";
    for (const std::string& b : bad) detail += " " + b;
  }
  if (dt >= 1.0) {
    detail += " (too slow)";
    bad.push_back("slow");
  }
  report_line(1, bad.empty(), detail);
}

// ---------------------------------------------------------------------------

PolicyName random_policy(Rng& rng) {
  PolicyName name;
  while (name.cameras.empty()) {
    for (CameraKind kind : {CameraKind::kStatic, CameraKind::kWrist, CameraKind::kActive}) {
      const int choice = rng.uniform_int(4);  // skip / both / left / right
      if (choice == 0) continue;
      CameraSel sel;
      sel.kind = kind;
      sel.side = choice == 1 ? CameraSide::kBoth
                             : (choice == 2 ? CameraSide::kLeft : CameraSide::kRight);
      name.cameras.push_back(sel);
    }
  }
  for (ProprioKind kind :
       {ProprioKind::kPressure, ProprioKind::kVelocity, ProprioKind::kTorque}) {
    const int choice = rng.uniform_int(3);  // skip / untagged / group A
    if (choice == 0) continue;
    ProprioSel sel;
    sel.kind = kind;
    if (choice == 2) sel.tag = "A";
    name.proprio.push_back(sel);
  }
  return normalize_policy_name(name);
}

void criterion_2_identical_demos() {
  EnvConfig env;
  env.image_size = 8;
  const Manifest manifest = build_manifest(env);
  const ChannelGroupMap groups = ChannelGroupMap::defaults();
  Rng rng(20260815);

  std::vector<SensorConfig> configs;
  while (configs.size() < 10)
    configs.push_back(resolve_config(random_policy(rng), groups, manifest));

  long violations = 0;
  const int episode_count = 100;
  for (int e = 0; e < episode_count; ++e) {
    const MasterEpisode ep = testutil::random_episode(manifest, rng);
    for (const SensorConfig& config : configs) {
      const MaskedEpisode masked = apply_mask(ep, manifest, config);
      const StreamData* master_ts = ep.find("timestamp");
      if (masked.t != master_ts->t) ++violations;
      if (!(masked.timestamp.values == master_ts->values)) ++violations;
      if (!(masked.action.values == ep.find("action")->values)) ++violations;

      for (std::size_t c = 0; c < config.camera_streams.size(); ++c) {
        const StreamData* master = ep.find(config.camera_streams[c]);
        const StreamData& got = masked.cameras.at(c);
        if (got.name != master->name || got.t != master->t ||
            !(got.values == master->values))
          ++violations;
      }

      const std::vector<std::pair<const char*, const std::vector<int>*>> blocks = {
          {"q", &config.q_channels},
          {"qd", &config.qd_channels},
          {"tau", &config.tau_channels},
          {"f_pres", &config.fpres_channels}};
      std::size_t bi = 0;
      for (const auto& [bname, sel] : blocks) {
        if (sel->empty()) continue;
        const StreamData* master = ep.find(bname);
        const StreamData& got = masked.proprio.at(bi++);
        const auto& mv = std::get<std::vector<float>>(master->values);
        const auto& gv = std::get<std::vector<float>>(got.values);
        const std::size_t master_w = static_cast<std::size_t>(master->dims.at(0));
        const std::size_t got_w = static_cast<std::size_t>(got.dims.at(0));
        if (got_w != sel->size() || got.t != master->t) {
          ++violations;
          continue;
        }
        for (std::uint32_t t = 0; t < got.t; ++t)
          for (std::size_t k = 0; k < sel->size(); ++k) {
            const float a = gv[t * got_w + k];
            const float b = mv[t * master_w + static_cast<std::size_t>((*sel)[k])];
            if (std::memcmp(&a, &b, sizeof(float)) != 0) ++violations;
          }
      }
    }
  }
  report_line(2, violations == 0,
              "masking preserved retained channels bit-for-bit over " +
                  std::to_string(episode_count) + " episodes x " +
                  std::to_string(configs.size()) + " configs (" +
                  std::to_string(violations) + " violations)");
}

// ---------------------------------------------------------------------------

ModelConfig micro_config() {
  ModelConfig c;
  c.state_dim = 3;
  c.action_dim = 2;
  c.chunk_size = 4;
  c.latent_dim = 4;
  c.embed_dim = 16;
  c.ffn_dim = 32;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.heads = 2;
  c.image_h = 8;
  c.image_w = 8;
  c.cameras = 1;
  c.kl_weight = 0.5;
  c.seed = 11;
  return c;
}

struct MicroBatch {
  std::vector<Tensor> images;
  Tensor state, states, actions, eps;
};

MicroBatch micro_batch(const ModelConfig& c, Rng& rng) {
  MicroBatch b;
  for (int i = 0; i < c.cameras; ++i)
    b.images.push_back(rand_tensor({3, c.image_h, c.image_w}, rng, 0.0, 1.0));
  b.state = rand_tensor({1, c.state_dim}, rng);
  b.states = rand_tensor({c.chunk_size, c.state_dim}, rng);
  b.actions = rand_tensor({c.chunk_size, c.action_dim}, rng);
  b.eps = rand_tensor({1, c.latent_dim}, rng);
  return b;
}

Var build_loss(Graph& g, BoundModel& m, const ModelConfig& c, const MicroBatch& b) {
  const StylePosterior post = encode_style(m, g.value(b.states), g.value(b.actions));
  const Var z = add(post.mu, mul(exp(scale(post.logvar, 0.5)), g.value(b.eps)));
  std::vector<Var> imgs;
  for (const Tensor& t : b.images) imgs.push_back(g.value(t));
  const Var pred = forward_chunk(m, imgs, g.value(b.state), z);
  return chunk_loss(g, pred, g.value(b.actions), post, c.kl_weight).total;
}

double micro_loss_value(const ModelConfig& c, const ACTParams& params,
                        const MicroBatch& b) {
  Graph g;
  BoundModel m(g, c, params);
  return g.val(build_loss(g, m, c, b)).scalar_value();
}

void criterion_3_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(4242);
  double worst_prim = 0.0;
  auto track = [&](double err) { worst_prim = std::max(worst_prim, err); };

  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return matmul(v[0], v[1]); },
                     rand_tensor({3, 5}, rng)),
      {rand_tensor({3, 4}, rng), rand_tensor({4, 5}, rng)}));
  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return add(v[0], v[1]); },
                     rand_tensor({3, 4}, rng)),
      {rand_tensor({3, 4}, rng), rand_tensor({3, 4}, rng)}));
  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return add(v[0], v[1]); },
                     rand_tensor({3, 4}, rng)),
      {rand_tensor({3, 4}, rng), rand_tensor({4}, rng)}));
  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return mul(v[0], v[1]); },
                     rand_tensor({4, 3}, rng)),
      {rand_tensor({4, 3}, rng), rand_tensor({4, 3}, rng)}));
  {
    Tensor x = rand_tensor({4, 5}, rng);
    for (Eigen::Index i = 0; i < x.data.size(); ++i)
      if (std::abs(x.data[i]) < 0.05) x.data[i] = 0.1;
    track(max_grad_rel_err(
        with_cotangent([](Graph&, const std::vector<Var>& v) { return relu(v[0]); },
                       rand_tensor({4, 5}, rng)),
        {x}));
  }
  for (int axis = 0; axis < 2; ++axis) {
    track(max_grad_rel_err(
        with_cotangent(
            [axis](Graph&, const std::vector<Var>& v) { return softmax(v[0], axis); },
            rand_tensor({3, 4}, rng)),
        {rand_tensor({3, 4}, rng, -2, 2)}));
    const int len = axis == 0 ? 3 : 4;
    track(max_grad_rel_err(
        with_cotangent(
            [axis](Graph&, const std::vector<Var>& v) {
              return layer_norm(v[0], v[1], v[2], axis);
            },
            rand_tensor({3, 4}, rng)),
        {rand_tensor({3, 4}, rng, -2, 2), rand_tensor({len}, rng, 0.5, 1.5),
         rand_tensor({len}, rng)}));
  }
  track(max_grad_rel_err(
      with_cotangent(
          [](Graph&, const std::vector<Var>& v) { return conv2d(v[0], v[1], v[2], 2, 1); },
          rand_tensor({3, 3, 3}, rng)),
      {rand_tensor({2, 5, 5}, rng), rand_tensor({3, 2, 3, 3}, rng),
       rand_tensor({3}, rng)}));
  track(max_grad_rel_err(
      [](Graph&, const std::vector<Var>& v) { return mean(v[0]); },
      {rand_tensor({3, 4}, rng)}));
  track(max_grad_rel_err(
      [](Graph&, const std::vector<Var>& v) { return sum(v[0]); },
      {rand_tensor({3, 4}, rng)}));
  track(max_grad_rel_err(
      with_cotangent(
          [](Graph&, const std::vector<Var>& v) { return reshape(v[0], {2, 6}); },
          rand_tensor({2, 6}, rng)),
      {rand_tensor({3, 4}, rng)}));
  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return transpose(v[0]); },
                     rand_tensor({4, 3}, rng)),
      {rand_tensor({3, 4}, rng)}));
  for (int axis = 0; axis < 2; ++axis) {
    const Shape cshape = axis == 0 ? Shape{7, 4} : Shape{3, 9};
    std::vector<Tensor> ins;
    for (int part : {2, 4, axis == 0 ? 1 : 3})
      ins.push_back(rand_tensor(axis == 0 ? Shape{part, 4} : Shape{3, part}, rng));
    track(max_grad_rel_err(
        with_cotangent(
            [axis](Graph&, const std::vector<Var>& v) {
              return concat({v[0], v[1], v[2]}, axis);
            },
            rand_tensor(cshape, rng)),
        ins));
  }
  track(max_grad_rel_err(
      with_cotangent(
          [](Graph&, const std::vector<Var>& v) { return slice(v[0], 1, 1, 3); },
          rand_tensor({4, 3}, rng)),
      {rand_tensor({4, 6}, rng)}));
  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return exp(v[0]); },
                     rand_tensor({3, 3}, rng)),
      {rand_tensor({3, 3}, rng, -1, 1)}));
  track(max_grad_rel_err(
      with_cotangent([](Graph&, const std::vector<Var>& v) { return scale(v[0], -2.7); },
                     rand_tensor({3, 3}, rng)),
      {rand_tensor({3, 3}, rng)}));
  track(max_grad_rel_err(
      [](Graph&, const std::vector<Var>& v) { return l1_loss(v[0], v[1]); },
      {rand_tensor({4, 3}, rng), rand_tensor({4, 3}, rng)}));
  track(max_grad_rel_err(
      [](Graph&, const std::vector<Var>& v) { return gaussian_kl(v[0], v[1]); },
      {rand_tensor({2, 4}, rng), rand_tensor({2, 4}, rng)}));

  // end-to-end: sampled parameter partials of the full CVAE loss
  const ModelConfig c = micro_config();
  ACTParams params = init_model(c);
  Rng data_rng(99);
  const MicroBatch batch = micro_batch(c, data_rng);

  std::vector<Tensor> grads;
  {
    Graph g;
    BoundModel m(g, c, params);
    const Var loss = build_loss(g, m, c, batch);
    g.backward(loss);
    for (const auto& [name, tensor] : params.entries) grads.push_back(g.grad(m.at(name)));
  }
  double worst_e2e = 0.0;
  Rng pick(7);
  const double h = 1e-5;
  for (std::size_t pi = 0; pi < params.entries.size(); ++pi) {
    Tensor& tensor = params.entries[pi].second;
    const Eigen::Index n = tensor.data.size();
    for (int s = 0; s < 4 && s < n; ++s) {
      const Eigen::Index j =
          n <= 4 ? s : static_cast<Eigen::Index>(pick.uniform_int(static_cast<int>(n)));
      const double orig = tensor.data[j];
      tensor.data[j] = orig + h;
      const double fp = micro_loss_value(c, params, batch);
      tensor.data[j] = orig - h;
      const double fm = micro_loss_value(c, params, batch);
      tensor.data[j] = orig;
      worst_e2e = std::max(worst_e2e, rel_err(grads[pi].data[j], (fp - fm) / (2 * h)));
    }
  }

  const double dt = seconds_since(t0);
  const bool pass = worst_prim < 1e-6 && worst_e2e < 1e-5 && dt < 120.0;
  report_line(3, pass,
              "gradient checks: worst primitive rel err " + num(worst_prim) +
                  ", worst end-to-end " + num(worst_e2e) + ", " + num(dt) + "s");
}

// ---------------------------------------------------------------------------

void criterion_4_cvae_identities() {
  bool ok = true;
  std::string detail;

  {
    Graph g;
    const Var kl = gaussian_kl(g.value(Tensor::zeros({1, 8})), g.value(Tensor::zeros({1, 8})));
    if (g.val(kl).scalar_value() != 0.0) {
      ok = false;
      detail += "KL(0,0) != 0; ";
    }
  }

  Rng rng(606);
  long negatives = 0;
  const int posteriors = 100000;
  for (int i = 0; i < posteriors; ++i) {
    Graph g;
    const Var kl = gaussian_kl(g.value(rand_tensor({1, 4}, rng, -3.0, 3.0)),
                               g.value(rand_tensor({1, 4}, rng, -6.0, 4.0)));
    if (g.val(kl).scalar_value() < 0.0) ++negatives;
  }
  if (negatives > 0) {
    ok = false;
    detail += std::to_string(negatives) + " negative KL values; ";
  }

  {
    const ModelConfig c = micro_config();
    const ACTParams params = init_model(c);
    Rng data_rng(99);
    const MicroBatch b = micro_batch(c, data_rng);
    Graph g;
    BoundModel m(g, c, params);
    const StylePosterior post = encode_style(m, g.value(b.states), g.value(b.actions));
    const Var z = add(post.mu, mul(exp(scale(post.logvar, 0.5)), g.value(b.eps)));
    std::vector<Var> imgs;
    for (const Tensor& t : b.images) imgs.push_back(g.value(t));
    const Var pred = forward_chunk(m, imgs, g.value(b.state), z);
    const ChunkLoss loss = chunk_loss(g, pred, g.value(b.actions), post, 0.0);
    if (g.val(loss.total).scalar_value() != g.val(loss.recon).scalar_value()) {
      ok = false;
      detail += "beta=0 total != recon; ";
    }
  }

  report_line(4, ok,
              ok ? "KL(0,0)=0 exactly, KL >= 0 on 1e5 posteriors, beta=0 => total==recon"
                 : detail);
}

// ---------------------------------------------------------------------------

struct ReferenceRun {
  bool ready = false;
  EnvConfig env;
  Checkpoint trained;
  double trained_success = 0.0;
  double untrained_success = 0.0;
  double wall_seconds = 0.0;
  std::filesystem::path dataset_dir;
};

ReferenceRun run_reference(const std::filesystem::path& root) {
  ReferenceRun ref;
  ref.env = EnvConfig{};
  const auto t0 = std::chrono::steady_clock::now();

  ref.dataset_dir = root / "reference_data";
  std::filesystem::create_directories(ref.dataset_dir);
  Manifest manifest = build_manifest(ref.env);
  write_manifest(ref.dataset_dir, manifest);
  for (int i = 0; i < 50; ++i)
    write_episode(ref.dataset_dir, manifest,
                  scripted_demo(ref.env, kReferenceSeed + static_cast<std::uint64_t>(i)));

  TrainConfig cfg;
  cfg.seed = kReferenceSeed;  // 5000 steps, lr 1e-3, beta 10, ema 0.999 by default
  cfg.batch_size = 16;
  const TrainResult trained =
      train_policy(ref.dataset_dir, "A", cfg, ChannelGroupMap::defaults());
  ref.trained = trained.checkpoint;

  const RolloutResult rolled =
      rollout(ref.trained, ref.env, kReferenceEvalTrials, kReferenceEvalSeed);
  ref.trained_success = rolled.mean_success_pct;

  Checkpoint untrained = ref.trained;
  untrained.params = init_model(untrained.model);
  untrained.steps = 0;
  const RolloutResult baseline =
      rollout(untrained, ref.env, kReferenceEvalTrials, kReferenceEvalSeed);
  ref.untrained_success = baseline.mean_success_pct;

  ref.wall_seconds = seconds_since(t0);
  ref.ready = true;
  return ref;
}

void criterion_5_learning(const ReferenceRun& ref) {
  if (!ref.ready) {
    report_line(5, false, "reference run did not complete");
    return;
  }
  const bool pass = ref.trained_success >= 80.0 &&
                    ref.trained_success > ref.untrained_success &&
                    ref.wall_seconds <= 1200.0;
  report_line(5, pass,
              "reference policy 'A': trained success " + num(ref.trained_success) +
                  "% vs untrained " + num(ref.untrained_success) + "% over " +
                  std::to_string(kReferenceEvalTrials) + " rollouts, " +
                  num(ref.wall_seconds) + "s total (budget 1200s)");
}

// ---------------------------------------------------------------------------

void criterion_6_ablation(const std::filesystem::path& root) {
  EnvConfig env;
  env.image_size = 16;
  env.snr_db = -10.0;

  const auto dataset = root / "snr_data";
  std::filesystem::create_directories(dataset);
  Manifest manifest = build_manifest(env);
  write_manifest(dataset, manifest);
  for (int i = 0; i < 12; ++i)
    write_episode(dataset, manifest, scripted_demo(env, 100 + static_cast<std::uint64_t>(i)));

  AblationOptions opts;
  opts.train.total_steps = 300;
  opts.train.batch_size = 4;
  opts.train.eval_every = 100;
  opts.train.seed = 11;
  opts.env = env;
  opts.trials = 5;
  opts.eval_seed = 2000;

  std::vector<std::pair<std::string, RolloutResult>> sunk_rollouts;
  std::vector<std::pair<std::string, Checkpoint>> sunk_checkpoints;
  opts.row_sink = [&](const std::string& policy, const TrainResult& tr,
                      const RolloutResult& rr) {
    sunk_rollouts.emplace_back(policy, rr);
    sunk_checkpoints.emplace_back(policy, tr.checkpoint);
  };

  bool ok = true;
  std::string detail;
  try {
    const AblationReport report = run_ablation(dataset, {"A", "A-P"}, opts);
    if (report.rows.size() != 2) {
      ok = false;
      detail += "expected 2 rows; ";
    }
    for (const AblationRow& row : report.rows) {
      if (row.failed || row.trials != 5 || !std::isfinite(row.exec_time_min) ||
          !std::isfinite(row.success_rate_pct) || row.train_wall_s <= 0.0) {
        ok = false;
        detail += "row " + row.policy + " not fully populated; ";
      }
    }
    if (ok && (report.rows[0].state_dim != 4 || report.rows[1].state_dim != 6)) {
      ok = false;
      detail += "state dims not configuration-derived; ";
    }

    // identical trial seeds across rows: re-rolling each stored checkpoint
    // from the shared eval seed must reproduce the sweep's outcomes bit for bit
    for (std::size_t i = 0; i < sunk_checkpoints.size() && ok; ++i) {
      const RolloutResult redo =
          rollout(sunk_checkpoints[i].second, env, opts.trials, opts.eval_seed);
      const RolloutResult& swept = sunk_rollouts[i].second;
      if (redo.trials.size() != swept.trials.size()) {
        ok = false;
        detail += "trial count drifted; ";
        break;
      }
      for (std::size_t t = 0; t < redo.trials.size(); ++t) {
        if (redo.trials[t].exec_time_min != swept.trials[t].exec_time_min ||
            redo.trials[t].terminal_object.x != swept.trials[t].terminal_object.x ||
            redo.trials[t].terminal_object.y != swept.trials[t].terminal_object.y) {
          ok = false;
          detail += "row " + sunk_checkpoints[i].first + " trial seeds differ; ";
          break;
        }
      }
    }

    const auto report_dir = root / "snr_report";
    emit_report(report, report_dir);
    const AblationReport parsed = read_report_csv(report_dir / "report.csv");
    if (parsed.rows.size() != 2) {
      ok = false;
      detail += "emitted report row count; ";
    }
    if (ok)
      detail = "sweep {A, A-P} at snr_db=-10 completed; rows populated (success " +
               num(report.rows[0].success_rate_pct) + "% vs " +
               num(report.rows[1].success_rate_pct) +
               "%), shared trial seeds verified";
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("ablation threw: ") + e.what();
  }
  report_line(6, ok, detail);
}

// ---------------------------------------------------------------------------

void criterion_7_mode_probe(const ReferenceRun& ref) {
  if (!ref.ready) {
    report_line(7, false, "reference run did not complete");
    return;
  }
  // frozen from the reference run (observed mean 0.0017, max 0.0026; the
  // midpoint sits 0.3 away): a policy trained on single-mode demonstrations
  // must deliver within epsilon of the demonstrated box
  const double kEpsilon = 0.05;

  EnvConfig probe_env = ref.env;
  probe_env.bimodal = true;

  bool ok = true;
  std::string detail;
  try {
    const ModeProbeReport probe =
        mode_averaging_probe(ref.trained, probe_env, 10, 3000);
    if (!probe.bimodal_env || probe.rows.size() != 10) {
      ok = false;
      detail += "probe schema (bimodal flag / row count); ";
    }
    double mean_primary = 0.0;
    for (std::size_t i = 0; i < probe.rows.size(); ++i) {
      const ModeProbeRow& row = probe.rows[i];
      if (row.trial != static_cast<int>(i)) {
        ok = false;
        detail += "trial indices; ";
      }
      const double dp = std::hypot(row.terminal.x - probe.mode_primary.x,
                                   row.terminal.y - probe.mode_primary.y);
      const double da = std::hypot(row.terminal.x - probe.mode_alt.x,
                                   row.terminal.y - probe.mode_alt.y);
      const double dm = std::hypot(row.terminal.x - probe.midpoint.x,
                                   row.terminal.y - probe.midpoint.y);
      if (row.dist_primary != dp || row.dist_alt != da || row.dist_midpoint != dm) {
        ok = false;
        detail += "distance fields inconsistent; ";
      }
      mean_primary += row.dist_primary;
    }
    mean_primary /= static_cast<double>(probe.rows.size());
    if (mean_primary >= kEpsilon) {
      ok = false;
      detail += "mean distance to demonstrated mode " + num(mean_primary) +
                " >= " + num(kEpsilon) + "; ";
    }
    if (ok)
      detail = "probe schema valid; single-mode policy lands " + num(mean_primary) +
               " from the demonstrated mode (eps " + num(kEpsilon) + ")";
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("probe threw: ") + e.what();
  }
  report_line(7, ok, detail);
}

// ---------------------------------------------------------------------------

std::vector<bool> brute_force_frontier(const std::vector<ParetoPoint>& pts) {
  std::vector<bool> flags(pts.size(), true);
  for (std::size_t p = 0; p < pts.size(); ++p)
    for (std::size_t q = 0; q < pts.size(); ++q) {
      if (p == q) continue;
      const bool leq_t = pts[q].execution_time <= pts[p].execution_time;
      const bool geq_s = pts[q].success_rate >= pts[p].success_rate;
      const bool strict = pts[q].execution_time < pts[p].execution_time ||
                          pts[q].success_rate > pts[p].success_rate;
      if (leq_t && geq_s && strict) {
        flags[p] = false;
        break;
      }
    }
  return flags;
}

void criterion_8_pareto() {
  Rng rng(808);
  long mismatches = 0;
  const int sets = 1000;
  for (int trial = 0; trial < sets; ++trial) {
    const int n = rng.uniform_int(16);
    std::vector<ParetoPoint> pts;
    for (int i = 0; i < n; ++i) {
      if (!pts.empty() && rng.uniform() < 0.2) {
        pts.push_back(pts[static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(pts.size())))]);  // exact duplicate
        continue;
      }
      ParetoPoint p;
      p.execution_time =
          rng.uniform() < 0.5 ? 0.25 * rng.uniform_int(5) : rng.uniform(0.0, 2.0);
      p.success_rate =
          rng.uniform() < 0.5 ? 25.0 * rng.uniform_int(5) : rng.uniform(0.0, 100.0);
      pts.push_back(p);
    }
    if (pareto_frontier(pts) != brute_force_frontier(pts)) ++mismatches;
  }
  report_line(8, mismatches == 0,
              "pareto flags matched the brute-force oracle on " + std::to_string(sets) +
                  " random point sets (" + std::to_string(mismatches) + " mismatches)");
}

// ---------------------------------------------------------------------------

void criterion_9_round_trips(const std::filesystem::path& root, const ReferenceRun& ref) {
  bool ok = true;
  std::string detail;

  EnvConfig env;
  env.image_size = 8;
  Manifest manifest = build_manifest(env);
  const auto dir = root / "roundtrip_data";
  std::filesystem::create_directories(dir);
  write_manifest(dir, manifest);

  Rng rng(909);
  for (int i = 0; i < 30 && ok; ++i) {
    MasterEpisode ep = testutil::random_episode(manifest, rng);
    const std::int64_t id = write_episode(dir, manifest, ep);
    const MasterEpisode back = read_episode(dir, id, manifest);
    if (!(back.streams == ep.streams)) {
      ok = false;
      detail += "episode streams drifted; ";
    }
    ep.episode_id = id;
    if (encode_episode(manifest, back) != encode_episode(manifest, ep)) {
      ok = false;
      detail += "episode re-encode not bit-identical; ";
    }
  }

  if (ok && ref.ready) {
    const auto path = root / "reference.uafc";
    save_checkpoint(path, ref.trained);
    const Checkpoint loaded = load_checkpoint(path);
    if (encode_checkpoint(loaded) != encode_checkpoint(ref.trained)) {
      ok = false;
      detail += "checkpoint bytes drifted; ";
    }
    const RolloutResult a = rollout(ref.trained, ref.env, 3, 4000);
    const RolloutResult b = rollout(loaded, ref.env, 3, 4000);
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
      if (a.trials[i].exec_time_min != b.trials[i].exec_time_min ||
          a.trials[i].terminal_object.x != b.trials[i].terminal_object.x ||
          a.trials[i].terminal_object.y != b.trials[i].terminal_object.y) {
        ok = false;
        detail += "rollout outputs changed after save/load; ";
        break;
      }
    }
  } else if (!ref.ready) {
    ok = false;
    detail += "no reference checkpoint; ";
  }

  report_line(9, ok,
              ok ? "dataset encode/decode and checkpoint save/load are bit-exact"
                 : detail);
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& command) {
  const int rc = std::system(command.c_str());
  return rc;
}

// report.csv comparison with the wall-time column masked
bool reports_equal_excluding_wall(const std::filesystem::path& a,
                                  const std::filesystem::path& b) {
  const AblationReport ra = read_report_csv(a);
  const AblationReport rb = read_report_csv(b);
  if (ra.rows.size() != rb.rows.size()) return false;
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    const AblationRow& x = ra.rows[i];
    const AblationRow& y = rb.rows[i];
    if (x.policy != y.policy || x.state_dim != y.state_dim || x.trials != y.trials ||
        x.exec_time_min != y.exec_time_min ||
        x.success_rate_pct != y.success_rate_pct || x.pareto != y.pareto)
      return false;
  }
  return true;
}

void criterion_10_determinism(const std::filesystem::path& root) {
  const char* bin = std::getenv("ACTBENCH_BIN");
  if (bin == nullptr || !std::filesystem::exists(bin)) {
    report_line(10, false,
                "ACTBENCH_BIN is not set or does not point at the CLI binary");
    return;
  }

  EnvConfig env;
  env.image_size = 8;
  env.max_steps = 120;
  const auto cfg_path = root / "pipeline_env.json";
  write_file_atomic(cfg_path, env.to_json());

  bool ok = true;
  std::string detail;
  for (const char* run : {"pipe1", "pipe2"}) {
    const std::string base = (root / run).string();
    const std::string B = std::string("\"") + bin + "\"";
    const std::vector<std::string> commands = {
        B + " gen-data --config " + cfg_path.string() + " --episodes 3 --seed 9 --out " +
            base + "/data >/dev/null",
        B + " train --dataset " + base + "/data --policy A-P --steps 3 --batch 2" +
            " --eval-every 1 --seed 4 --out " + base + "/run >/dev/null",
        B + " eval --checkpoint " + base + "/run/checkpoint.uafc --config " +
            cfg_path.string() + " --trials 2 --seed 55 --out " + base +
            "/eval >/dev/null",
        B + " ablate --dataset " + base + "/data --policies A --steps 2 --batch 1" +
            " --eval-every 1 --seed 4 --trials 1 --eval-seed 55 --out " + base +
            "/sweep >/dev/null 2>/dev/null",
        B + " report --csv " + base + "/sweep/report.csv --out " + base +
            "/report >/dev/null",
    };
    for (const std::string& cmd : commands) {
      if (run_cli(cmd) != 0) {
        ok = false;
        detail += "command failed: " + cmd + "; ";
        break;
      }
    }
    if (!ok) break;
  }

  if (ok) {
    const std::vector<std::string> identical = {
        "data/env.json",      "data/manifest.json",      "run/checkpoint.uafc",
        "run/loss.csv",       "eval/rollouts.csv",       "sweep/A/checkpoint.uafc",
        "sweep/A/loss.csv",   "sweep/A/rollouts.csv",    "sweep/pareto.svg",
        "report/pareto.svg"};
    for (const std::string& rel : identical) {
      if (read_file(root / "pipe1" / rel) != read_file(root / "pipe2" / rel)) {
        ok = false;
        detail += rel + " differs; ";
      }
    }
    for (int e = 0; e < 3; ++e) {
      const std::string rel = "data/" + episode_filename(e);
      if (read_file(root / "pipe1" / rel) != read_file(root / "pipe2" / rel)) {
        ok = false;
        detail += rel + " differs; ";
      }
    }
    if (!reports_equal_excluding_wall(root / "pipe1" / "sweep" / "report.csv",
                                      root / "pipe2" / "sweep" / "report.csv")) {
      ok = false;
      detail += "report.csv differs beyond the wall-time column; ";
    }
  }

  report_line(10, ok,
              ok ? "two full gen-data -> train -> eval -> report pipelines are "
                   "byte-identical excluding wall-time columns"
                 : detail);
}

}  // namespace

int main() {
  testutil::TempDir root("acceptance");

  criterion_1_grammar();
  criterion_2_identical_demos();
  criterion_3_gradients();
  criterion_4_cvae_identities();

  ReferenceRun ref;
  try {
    ref = run_reference(root.path);
  } catch (const std::exception& e) {
    std::cerr << "reference run failed: " << e.what() << "\n";
  }
  criterion_5_learning(ref);
  criterion_6_ablation(root.path);
  criterion_7_mode_probe(ref);
  criterion_8_pareto();
  criterion_9_round_trips(root.path, ref);
  criterion_10_determinism(root.path);

  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
