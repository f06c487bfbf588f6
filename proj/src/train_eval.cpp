#include "actbench/train_eval.hpp"

#include "actbench/adam.hpp"
#include "actbench/graph.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace actbench {

namespace {

constexpr const char* kCheckpointKind = "actbench-checkpoint";
constexpr std::uint64_t kSampleSalt = 0x6A09E667F3BCC909ULL;  // decouples sampling from init

double action_value(const StreamData& action, std::uint32_t frame, int i) {
  const auto& v = std::get<std::vector<float>>(action.values);
  const std::size_t width = static_cast<std::size_t>(action.dims[0]);
  return static_cast<double>(v[frame * width + static_cast<std::size_t>(i)]);
}

// One masked episode with its pre-normalized per-frame state vectors.
struct EpisodeView {
  MaskedEpisode masked;
  std::vector<std::vector<double>> states;
};

Tensor live_image_tensor(const std::vector<std::uint8_t>& bytes, int h, int w) {
  if (static_cast<int>(bytes.size()) != h * w * 3)
    throw SchemaError("camera frame has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(h * w * 3));
  Tensor t = Tensor::zeros({3, h, w});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        t.data[(ch * h + r) * w + c] =
            bytes[(static_cast<std::size_t>(r) * w + c) * 3 + static_cast<std::size_t>(ch)] /
            255.0;
  return t;
}

nlohmann::ordered_json model_to_json(const ModelConfig& m) {
  nlohmann::ordered_json j;
  j["state_dim"] = m.state_dim;
  j["action_dim"] = m.action_dim;
  j["chunk_size"] = m.chunk_size;
  j["latent_dim"] = m.latent_dim;
  j["embed_dim"] = m.embed_dim;
  j["ffn_dim"] = m.ffn_dim;
  j["encoder_layers"] = m.encoder_layers;
  j["decoder_layers"] = m.decoder_layers;
  j["heads"] = m.heads;
  j["image_h"] = m.image_h;
  j["image_w"] = m.image_w;
  j["cameras"] = m.cameras;
  j["kl_weight"] = m.kl_weight;
  j["seed"] = m.seed;
  return j;
}

void require_keys(const nlohmann::json& j, const std::set<std::string>& keys,
                  const char* what) {
  if (!j.is_object()) throw SchemaError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items())
    if (keys.find(item.key()) == keys.end())
      throw SchemaError(std::string("unknown ") + what + " key '" + item.key() + "'");
  for (const std::string& k : keys)
    if (!j.contains(k))
      throw SchemaError(std::string(what) + " is missing key '" + k + "'");
}

ModelConfig model_from_json(const nlohmann::json& j) {
  require_keys(j, {"state_dim", "action_dim", "chunk_size", "latent_dim", "embed_dim",
                   "ffn_dim", "encoder_layers", "decoder_layers", "heads", "image_h",
                   "image_w", "cameras", "kl_weight", "seed"},
               "model config");
  ModelConfig m;
  try {
    m.state_dim = j["state_dim"].get<int>();
    m.action_dim = j["action_dim"].get<int>();
    m.chunk_size = j["chunk_size"].get<int>();
    m.latent_dim = j["latent_dim"].get<int>();
    m.embed_dim = j["embed_dim"].get<int>();
    m.ffn_dim = j["ffn_dim"].get<int>();
    m.encoder_layers = j["encoder_layers"].get<int>();
    m.decoder_layers = j["decoder_layers"].get<int>();
    m.heads = j["heads"].get<int>();
    m.image_h = j["image_h"].get<int>();
    m.image_w = j["image_w"].get<int>();
    m.cameras = j["cameras"].get<int>();
    m.kl_weight = j["kl_weight"].get<double>();
    m.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::type_error& e) {
    throw SchemaError(std::string("model config type error: ") + e.what());
  }
  return m;
}

nlohmann::ordered_json sensors_to_json(const SensorConfig& s) {
  nlohmann::ordered_json j;
  j["policy"] = s.policy;
  j["camera_streams"] = s.camera_streams;
  j["q_channels"] = s.q_channels;
  j["qd_channels"] = s.qd_channels;
  j["tau_channels"] = s.tau_channels;
  j["fpres_channels"] = s.fpres_channels;
  j["state_dim"] = s.state_dim;
  j["zero_fill"] = s.zero_fill;
  return j;
}

SensorConfig sensors_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"policy", "camera_streams", "q_channels", "qd_channels", "tau_channels",
                "fpres_channels", "state_dim", "zero_fill"},
               "sensor config");
  SensorConfig s;
  try {
    s.policy = j["policy"].get<std::string>();
    s.camera_streams = j["camera_streams"].get<std::vector<std::string>>();
    s.q_channels = j["q_channels"].get<std::vector<int>>();
    s.qd_channels = j["qd_channels"].get<std::vector<int>>();
    s.tau_channels = j["tau_channels"].get<std::vector<int>>();
    s.fpres_channels = j["fpres_channels"].get<std::vector<int>>();
    s.state_dim = j["state_dim"].get<int>();
    s.zero_fill = j["zero_fill"].get<bool>();
  } catch (const nlohmann::json::type_error& e) {
    throw SchemaError(std::string("sensor config type error: ") + e.what());
  }
  return s;
}

std::string slurp_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(std::string(what) + " not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double mode_distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

void TrainConfig::validate() const {
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
    throw std::invalid_argument("learning_rate must be positive");
  if (!std::isfinite(beta) || beta < 0.0)
    throw std::invalid_argument("beta must be non-negative");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (!std::isfinite(ema_decay) || ema_decay < 0.0 || ema_decay >= 1.0)
    throw std::invalid_argument("ema_decay must be in [0, 1)");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json h;
  h["format_version"] = ckpt.format_version;
  h["kind"] = kCheckpointKind;
  h["policy"] = ckpt.policy;
  h["steps"] = ckpt.steps;
  h["fps"] = ckpt.fps;
  h["normalize"] = ckpt.normalize;
  h["model"] = model_to_json(ckpt.model);
  h["sensors"] = sensors_to_json(ckpt.sensors);
  h["state_mean"] = ckpt.state_mean;
  h["state_std"] = ckpt.state_std;
  h["param_blocks"] = ckpt.params.entries.size();
  const std::string header = h.dump();

  std::string out = "UAFC";
  const std::uint32_t len = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out += static_cast<char>((len >> (8 * i)) & 0xFF);
  out += header;
  for (const auto& [name, tensor] : ckpt.params.entries) {
    StreamData sd;
    sd.name = name;
    sd.dtype = Dtype::kF64;
    sd.dims = tensor.shape;
    sd.t = 1;
    sd.values = std::vector<double>(tensor.data.data(), tensor.data.data() + tensor.size());
    append_stream_block(out, sd);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "UAFC") != 0)
    throw FormatError("not a checkpoint: bad magic");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i)
    len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
  if (8u + len > bytes.size()) throw FormatError("checkpoint header overruns the file");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(8, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  require_keys(h,
               {"format_version", "kind", "policy", "steps", "fps", "normalize", "model",
                "sensors", "state_mean", "state_std", "param_blocks"},
               "checkpoint header");

  Checkpoint c;
  std::size_t param_blocks = 0;
  try {
    if (h["kind"].get<std::string>() != kCheckpointKind)
      throw FormatError("checkpoint header kind mismatch");
    c.format_version = h["format_version"].get<int>();
    if (c.format_version != 1)
      throw SchemaError("unsupported checkpoint format_version " +
                        std::to_string(c.format_version));
    c.policy = h["policy"].get<std::string>();
    c.steps = h["steps"].get<std::int64_t>();
    c.fps = h["fps"].get<double>();
    c.normalize = h["normalize"].get<bool>();
    c.model = model_from_json(h["model"]);
    c.sensors = sensors_from_json(h["sensors"]);
    c.state_mean = h["state_mean"].get<std::vector<double>>();
    c.state_std = h["state_std"].get<std::vector<double>>();
    param_blocks = h["param_blocks"].get<std::size_t>();
  } catch (const nlohmann::json::type_error& e) {
    throw SchemaError(std::string("checkpoint header type error: ") + e.what());
  }
  c.model.validate();
  if (static_cast<int>(c.state_mean.size()) != c.sensors.state_dim ||
      static_cast<int>(c.state_std.size()) != c.sensors.state_dim)
    throw SchemaError("normalization stats do not match the sensor state width");
  for (double s : c.state_std)
    if (!(s > 0.0)) throw SchemaError("state_std entries must be positive");

  Cursor cur{bytes, 8 + len, "checkpoint"};
  while (!cur.done()) {
    StreamData sd = read_stream_block(cur);
    if (sd.dtype != Dtype::kF64 || sd.t != 1)
      throw SchemaError("parameter block '" + sd.name + "' must be a single f64 frame");
    c.params.entries.emplace_back(
        sd.name, Tensor::from_vector(sd.dims, std::get<std::vector<double>>(sd.values)));
  }
  if (c.params.entries.size() != param_blocks)
    throw SchemaError("checkpoint lists " + std::to_string(param_blocks) +
                      " parameter blocks but contains " +
                      std::to_string(c.params.entries.size()));

  // the stored blocks must line up with the model's parameter layout
  const ACTParams expected = init_model(c.model);
  if (expected.entries.size() != c.params.entries.size())
    throw SchemaError("checkpoint parameter roster does not match the model layout");
  for (std::size_t i = 0; i < expected.entries.size(); ++i) {
    if (expected.entries[i].first != c.params.entries[i].first ||
        expected.entries[i].second.shape != c.params.entries[i].second.shape)
      throw SchemaError("checkpoint parameter '" + c.params.entries[i].first +
                        "' does not match the model layout");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(slurp_file(path, "checkpoint"));
}

TrainResult train_policy(const std::filesystem::path& dataset_dir,
                         const std::string& policy_name, const TrainConfig& cfg,
                         const ChannelGroupMap& groups) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();

  const Manifest manifest = read_manifest(dataset_dir);
  const PolicyName parsed = parse_policy_name(policy_name);
  const SensorConfig sensors = resolve_config(parsed, groups, manifest);
  if (manifest.episode_count < 1)
    throw ValidationError("dataset has no episodes to train on");

  // model geometry from the manifest
  const StreamDescriptor& cam0 = manifest.stream(sensors.camera_streams.at(0));
  for (const std::string& name : sensors.camera_streams) {
    if (manifest.stream(name).frame_shape != cam0.frame_shape)
      throw SchemaError("camera streams disagree on frame shape");
  }
  const StreamDescriptor& action_desc = manifest.stream("action");

  ModelConfig mc;
  mc.state_dim = sensors.state_dim;
  mc.action_dim = action_desc.frame_shape.at(0);
  mc.image_h = cam0.frame_shape.at(0);
  mc.image_w = cam0.frame_shape.at(1);
  mc.cameras = static_cast<int>(sensors.camera_streams.size());
  mc.kl_weight = cfg.beta;
  mc.seed = cfg.seed;
  mc.validate();

  // load and mask every episode up front
  std::vector<EpisodeView> episodes;
  episodes.reserve(static_cast<std::size_t>(manifest.episode_count));
  for (std::int64_t id = 0; id < manifest.episode_count; ++id) {
    EpisodeView view;
    view.masked = apply_mask(read_episode(dataset_dir, id, manifest), manifest, sensors);
    for (std::size_t c = 0; c < sensors.camera_streams.size(); ++c)
      if (view.masked.cameras.at(c).name != sensors.camera_streams[c])
        throw SchemaError("masked camera order mismatch");
    view.states.reserve(view.masked.t);
    for (std::uint32_t t = 0; t < view.masked.t; ++t)
      view.states.push_back(assemble_state(view.masked, t, sensors));
    episodes.push_back(std::move(view));
  }

  // z-score statistics over every frame (identity when normalization is off)
  std::vector<double> mean(static_cast<std::size_t>(sensors.state_dim), 0.0);
  std::vector<double> stdev(static_cast<std::size_t>(sensors.state_dim), 1.0);
  if (cfg.normalize) {
    std::int64_t count = 0;
    for (const EpisodeView& e : episodes)
      for (const auto& s : e.states) {
        for (std::size_t i = 0; i < s.size(); ++i) mean[i] += s[i];
        ++count;
      }
    for (double& m : mean) m /= static_cast<double>(count);
    std::vector<double> var(mean.size(), 0.0);
    for (const EpisodeView& e : episodes)
      for (const auto& s : e.states)
        for (std::size_t i = 0; i < s.size(); ++i)
          var[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
    for (std::size_t i = 0; i < var.size(); ++i) {
      stdev[i] = std::sqrt(var[i] / static_cast<double>(count));
      if (stdev[i] < 1e-8) stdev[i] = 1.0;  // constant channels pass through
    }
  }
  for (EpisodeView& e : episodes)
    for (auto& s : e.states)
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = (s[i] - mean[i]) / stdev[i];

  ACTParams params = init_model(mc);
  std::vector<Shape> shapes;
  shapes.reserve(params.entries.size());
  for (const auto& [name, tensor] : params.entries) shapes.push_back(tensor.shape);
  Adam adam({cfg.learning_rate, 0.9, 0.999, 1e-8}, shapes);

  Rng rng(cfg.seed ^ kSampleSalt);
  const int k = mc.chunk_size;
  const int adim = mc.action_dim;
  const int sdim = mc.state_dim;

  // Bias-corrected EMA of the parameters; the average generalizes better
  // than whichever noisy iterate step() happens to end on.
  std::vector<Eigen::ArrayXd> ema;
  ema.reserve(params.entries.size());
  for (const auto& [name, tensor] : params.entries)
    ema.push_back(Eigen::ArrayXd::Zero(tensor.data.size()));

  TrainResult result;
  for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
    Graph g;
    BoundModel m(g, mc, params);

    Var total{}, recon{}, kl{};
    for (int b = 0; b < cfg.batch_size; ++b) {
      const EpisodeView& ep =
          episodes[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(episodes.size())))];
      const std::uint32_t T = ep.masked.t;
      const std::uint32_t t = static_cast<std::uint32_t>(rng.uniform_int(static_cast<int>(T)));

      std::vector<Var> images;
      images.reserve(ep.masked.cameras.size());
      for (const StreamData& cam : ep.masked.cameras)
        images.push_back(g.value(image_frame_tensor(cam, t)));

      Tensor state = Tensor::from_vector({sdim}, ep.states[t]);

      Tensor wstates = Tensor::zeros({k, sdim});
      Tensor wactions = Tensor::zeros({k, adim});
      for (int r = 0; r < k; ++r) {
        const std::uint32_t src = std::min(t + static_cast<std::uint32_t>(r), T - 1);
        for (int i = 0; i < sdim; ++i)
          wstates.data[r * sdim + i] = ep.states[src][static_cast<std::size_t>(i)];
        for (int i = 0; i < adim; ++i)
          wactions.data[r * adim + i] = action_value(ep.masked.action, src, i);
      }

      const StylePosterior post =
          encode_style(m, g.value(wstates), g.value(wactions));
      Tensor eps = Tensor::zeros({1, mc.latent_dim});
      for (int i = 0; i < mc.latent_dim; ++i) eps.data[i] = rng.normal();
      const Var z = add(mul(exp(scale(post.logvar, 0.5)), g.value(eps)), post.mu);

      const Var pred = forward_chunk(m, images, g.value(state), z);
      const ChunkLoss loss = chunk_loss(g, pred, g.value(wactions), post, cfg.beta);
      if (b == 0) {
        total = loss.total;
        recon = loss.recon;
        kl = loss.kl;
      } else {
        total = total + loss.total;
        recon = recon + loss.recon;
        kl = kl + loss.kl;
      }
    }
    const double inv_b = 1.0 / cfg.batch_size;
    const Var mean_total = scale(total, inv_b);

    const double v_total = g.val(mean_total).scalar_value();
    const double v_recon = g.val(recon).scalar_value() * inv_b;
    const double v_kl = g.val(kl).scalar_value() * inv_b;
    if (!std::isfinite(v_total) || !std::isfinite(v_recon) || !std::isfinite(v_kl))
      throw NumericError("training diverged at step " + std::to_string(step) +
                         ": total=" + std::to_string(v_total) +
                         " recon=" + std::to_string(v_recon) +
                         " kl=" + std::to_string(v_kl));

    g.backward(mean_total);

    std::vector<Tensor> grad_store;
    grad_store.reserve(params.entries.size());
    for (const auto& [name, tensor] : params.entries) grad_store.push_back(g.grad(m.at(name)));
    std::vector<Tensor*> param_ptrs;
    std::vector<const Tensor*> grad_ptrs;
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
      param_ptrs.push_back(&params.entries[i].second);
      grad_ptrs.push_back(&grad_store[i]);
    }
    adam.step(param_ptrs, grad_ptrs);

    for (std::size_t i = 0; i < ema.size(); ++i)
      ema[i] = cfg.ema_decay * ema[i] +
               (1.0 - cfg.ema_decay) * params.entries[i].second.data;

    if (step % cfg.eval_every == 0 || step == cfg.total_steps)
      result.losses.push_back({step, v_total, v_recon, v_kl});
  }

  const double ema_corr =
      1.0 - std::pow(cfg.ema_decay, static_cast<double>(cfg.total_steps));
  for (std::size_t i = 0; i < ema.size(); ++i)
    params.entries[i].second.data = ema[i] / ema_corr;

  result.checkpoint.policy = sensors.policy;
  result.checkpoint.steps = cfg.total_steps;
  result.checkpoint.fps = manifest.fps;
  result.checkpoint.normalize = cfg.normalize;
  result.checkpoint.model = mc;
  result.checkpoint.sensors = sensors;
  result.checkpoint.state_mean = std::move(mean);
  result.checkpoint.state_std = std::move(stdev);
  result.checkpoint.params = std::move(params);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

ChunkStrategy parse_strategy(const std::string& name) {
  if (name == "replan_each_step") return ChunkStrategy::kReplanEachStep;
  if (name == "open_loop_chunk") return ChunkStrategy::kOpenLoopChunk;
  if (name == "temporal_ensemble") return ChunkStrategy::kTemporalEnsemble;
  throw std::invalid_argument(
      "unknown chunk strategy '" + name +
      "' (expected replan_each_step, open_loop_chunk, or temporal_ensemble)");
}

std::string strategy_name(ChunkStrategy strategy) {
  switch (strategy) {
    case ChunkStrategy::kReplanEachStep: return "replan_each_step";
    case ChunkStrategy::kOpenLoopChunk: return "open_loop_chunk";
    case ChunkStrategy::kTemporalEnsemble: return "temporal_ensemble";
  }
  throw std::invalid_argument("unknown chunk strategy value");
}

void RolloutOptions::validate() const {
  if (!std::isfinite(ensemble_weight) || ensemble_weight < 0.0 || ensemble_weight > 1.0)
    throw std::invalid_argument("ensemble_weight must be in [0, 1]");
}

ChunkExecutor::ChunkExecutor(const RolloutOptions& opts) : opts_(opts) {
  opts.validate();
}

void ChunkExecutor::reset() {
  chunk_.resize(0, 0);
  cursor_ = 0;
  step_ = 0;
  history_.clear();
}

std::array<double, 4> ChunkExecutor::next(const std::function<MatRM()>& forward) {
  auto fetch = [&]() {
    MatRM m = forward();
    if (m.rows() < 1 || m.cols() != 4)
      throw SchemaError("policy chunk must be (k >= 1) x 4, got " +
                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    return m;
  };
  auto row_action = [](const MatRM& m, Eigen::Index r) {
    return std::array<double, 4>{m(r, 0), m(r, 1), m(r, 2), m(r, 3)};
  };

  switch (opts_.strategy) {
    case ChunkStrategy::kReplanEachStep: {
      const MatRM m = fetch();
      ++step_;
      return row_action(m, 0);
    }
    case ChunkStrategy::kOpenLoopChunk: {
      if (cursor_ >= chunk_.rows()) {
        chunk_ = fetch();
        cursor_ = 0;
      }
      ++step_;
      return row_action(chunk_, cursor_++);
    }
    case ChunkStrategy::kTemporalEnsemble: {
      history_.emplace_back(step_, fetch());
      std::erase_if(history_, [&](const std::pair<int, MatRM>& h) {
        return step_ - h.first >= h.second.rows();
      });
      // weight w^age, newest prediction at age 0 (0^0 == 1)
      double wsum = 0.0;
      Eigen::Vector4d acc = Eigen::Vector4d::Zero();
      for (const auto& [birth, chunk] : history_) {
        const int age = step_ - birth;
        const double w = std::pow(opts_.ensemble_weight, age);
        acc += w * chunk.row(age).transpose();
        wsum += w;
      }
      ++step_;
      acc /= wsum;
      return {acc[0], acc[1], acc[2], acc[3]};
    }
  }
  throw std::invalid_argument("unknown chunk strategy value");
}

RolloutResult rollout_core(const ChunkSource& source, const EnvConfig& env, int trials,
                           std::uint64_t seed, const RolloutOptions& opts) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  opts.validate();
  env.validate();

  RolloutResult out;
  out.trial_count = trials;
  double frac_sum = 0.0, exec_sum = 0.0;
  for (int i = 0; i < trials; ++i) {
    WorldState s = reset(env, seed + static_cast<std::uint64_t>(i));
    ChunkExecutor exec(opts);
    std::vector<WorldState> traj{s};
    while (s.step_index < env.max_steps) {
      const SensorFrame frame = render_sensors(s, env);
      const std::array<double, 4> a = exec.next([&]() { return source(s, frame); });
      step(s, a, env);
      traj.push_back(s);
      if (s.held == -1 && object_in_box(s.objects.at(0), env)) break;
    }
    TrialOutcome trial;
    trial.score = score_subtasks(traj, env);
    trial.steps = static_cast<int>(traj.size()) - 1;
    trial.exec_time_min = trial.score.execution_steps / env.fps / 60.0;
    trial.terminal_object = traj.back().objects.at(0);
    frac_sum += trial.score.fraction();
    exec_sum += trial.exec_time_min;
    out.trials.push_back(trial);
  }
  out.mean_success_pct = frac_sum / trials * 100.0;
  out.mean_exec_time_min = exec_sum / trials;
  return out;
}

std::vector<double> frame_state_vector(const SensorFrame& frame,
                                       const SensorConfig& sensors) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(sensors.state_dim));
  auto f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  auto block = [&](const double* data, int width, const std::vector<int>& channels) {
    for (int c : channels)
      if (c < 0 || c >= width)
        throw SchemaError("state channel " + std::to_string(c) +
                          " out of bounds for a width-" + std::to_string(width) + " block");
    if (sensors.zero_fill) {
      std::vector<double> full(static_cast<std::size_t>(width), 0.0);
      for (int c : channels) full[static_cast<std::size_t>(c)] = f32(data[c]);
      out.insert(out.end(), full.begin(), full.end());
    } else {
      for (int c : channels) out.push_back(f32(data[c]));
    }
  };
  block(frame.q.data(), 4, sensors.q_channels);
  block(frame.qd.data(), 4, sensors.qd_channels);
  block(frame.tau.data(), 4, sensors.tau_channels);
  block(frame.f_pres.data(), kPressureChannels, sensors.fpres_channels);
  if (static_cast<int>(out.size()) != sensors.state_dim)
    throw SchemaError("assembled live state has " + std::to_string(out.size()) +
                      " channels, checkpoint says " + std::to_string(sensors.state_dim));
  return out;
}

RolloutResult rollout(const Checkpoint& ckpt, const EnvConfig& env, int trials,
                      std::uint64_t seed, const RolloutOptions& opts) {
  const Manifest manifest = build_manifest(env);
  if (static_cast<int>(ckpt.sensors.camera_streams.size()) != ckpt.model.cameras)
    throw SchemaError("checkpoint camera roster does not match its model config");
  for (const std::string& name : ckpt.sensors.camera_streams) {
    if (manifest.index_of(name) < 0)
      throw SchemaError("environment provides no camera stream '" + name + "'");
    const Shape expect{ckpt.model.image_h, ckpt.model.image_w, 3};
    if (manifest.stream(name).frame_shape != expect)
      throw SchemaError("camera '" + name + "' frame shape does not match the checkpoint");
  }
  auto check_block = [&](const char* stream, const std::vector<int>& channels) {
    const int width = manifest.stream(stream).frame_shape.at(0);
    for (int c : channels)
      if (c < 0 || c >= width)
        throw SchemaError("checkpoint selects channel " + std::to_string(c) +
                          " of '" + stream + "', which has width " + std::to_string(width));
  };
  check_block("q", ckpt.sensors.q_channels);
  check_block("qd", ckpt.sensors.qd_channels);
  check_block("tau", ckpt.sensors.tau_channels);
  check_block("f_pres", ckpt.sensors.fpres_channels);
  if (static_cast<int>(ckpt.state_mean.size()) != ckpt.sensors.state_dim)
    throw SchemaError("checkpoint normalization stats are inconsistent");

  const ChunkSource source = [&ckpt](const WorldState&, const SensorFrame& frame) {
    std::vector<Tensor> images;
    images.reserve(ckpt.sensors.camera_streams.size());
    for (const std::string& name : ckpt.sensors.camera_streams)
      images.push_back(
          live_image_tensor(frame_camera(frame, name), ckpt.model.image_h, ckpt.model.image_w));
    std::vector<double> sv = frame_state_vector(frame, ckpt.sensors);
    for (std::size_t i = 0; i < sv.size(); ++i)
      sv[i] = (sv[i] - ckpt.state_mean[i]) / ckpt.state_std[i];
    const ActionChunk chunk = predict_chunk(
        ckpt.model, ckpt.params, images,
        Tensor::from_vector({ckpt.sensors.state_dim}, sv));
    MatRM m(chunk.values.rows(), chunk.values.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        m(r, c) = chunk.values.data[r * m.cols() + c];
    return m;
  };
  return rollout_core(source, env, trials, seed, opts);
}

AblationReport run_ablation(const std::filesystem::path& dataset_dir,
                            const std::vector<std::string>& policy_names,
                            const AblationOptions& opts) {
  opts.train.validate();
  opts.env.validate();
  opts.rollout.validate();
  if (opts.trials < 1) throw std::invalid_argument("trials must be >= 1");

  // every name must parse before any row runs
  std::vector<std::string> canonical;
  canonical.reserve(policy_names.size());
  for (const std::string& name : policy_names)
    canonical.push_back(format_policy_name(normalize_policy_name(parse_policy_name(name))));

  const Manifest manifest = read_manifest(dataset_dir);
  AblationReport report;
  for (std::size_t i = 0; i < policy_names.size(); ++i) {
    AblationRow row;
    row.policy = canonical[i];
    try {
      const SensorConfig sensors =
          resolve_config(parse_policy_name(policy_names[i]), opts.groups, manifest);
      row.state_dim = sensors.state_dim;
      const TrainResult trained =
          train_policy(dataset_dir, policy_names[i], opts.train, opts.groups);
      const RolloutResult rolled =
          rollout(trained.checkpoint, opts.env, opts.trials, opts.eval_seed, opts.rollout);
      row.train_wall_s = trained.wall_seconds;
      row.trials = rolled.trial_count;
      row.exec_time_min = rolled.mean_exec_time_min;
      row.success_rate_pct = rolled.mean_success_pct;
      if (opts.row_sink) opts.row_sink(row.policy, trained, rolled);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  flag_pareto(report);
  return report;
}

ModeProbeReport mode_averaging_probe(const Checkpoint& ckpt, const EnvConfig& env,
                                     int trials, std::uint64_t seed,
                                     const RolloutOptions& opts) {
  const RolloutResult result = rollout(ckpt, env, trials, seed, opts);

  ModeProbeReport report;
  report.bimodal_env = env.bimodal;
  report.mode_primary = env.box_center;
  report.mode_alt = env.alt_box_center;
  report.midpoint = {(env.box_center.x + env.alt_box_center.x) / 2.0,
                     (env.box_center.y + env.alt_box_center.y) / 2.0};
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    ModeProbeRow row;
    row.trial = static_cast<int>(i);
    row.terminal = result.trials[i].terminal_object;
    row.dist_primary = mode_distance(row.terminal, report.mode_primary);
    row.dist_alt = mode_distance(row.terminal, report.mode_alt);
    row.dist_midpoint = mode_distance(row.terminal, report.midpoint);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace actbench
