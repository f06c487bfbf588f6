#include "actbench/env.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace actbench {

namespace {

// Scene canvas: the workspace maps to a 64x64 region horizontally centered
// in an 88-column canvas, leaving margin for the active window to pan into.
constexpr int kCanvasW = 88;
constexpr int kCanvasH = 64;
constexpr int kMarginCols = 12;
constexpr int kSpan = kCanvasH - 1;  // pixel span of one workspace unit
constexpr int kActiveW = 40;
constexpr int kWristSize = 24;
constexpr int kEyeOffset = 4;  // stereo baseline, canvas columns
constexpr int kStaticLeftCol = 8;
constexpr int kStaticRightCol = 16;

constexpr int kSettleSteps = 3;
constexpr double kOracleJitter = 0.02;
constexpr double kCarryHeight = 0.85;

struct Rgb {
  std::uint8_t r, g, b;
};
constexpr Rgb kBackground{40, 40, 45};
constexpr Rgb kBoxFill{50, 140, 70};
constexpr Rgb kBoxEdge{90, 220, 120};
constexpr Rgb kAltBoxFill{50, 80, 170};
constexpr Rgb kAltBoxEdge{100, 140, 240};
constexpr Rgb kObjectColor{225, 60, 45};
constexpr Rgb kEffectorColor{235, 235, 235};

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double frac_of(const EnvConfig& c, double v) { return (v - c.workspace_min) / c.range(); }

int col_of(double xfrac) {
  return kMarginCols + static_cast<int>(std::lround(xfrac * kSpan));
}
int row_of(double yfrac) { return static_cast<int>(std::lround((1.0 - yfrac) * kSpan)); }

void fill_rect(std::vector<std::uint8_t>& canvas, int r0, int r1, int c0, int c1, Rgb color) {
  r0 = std::max(r0, 0);
  c0 = std::max(c0, 0);
  r1 = std::min(r1, kCanvasH - 1);
  c1 = std::min(c1, kCanvasW - 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      std::uint8_t* px = canvas.data() + (static_cast<std::size_t>(r) * kCanvasW + c) * 3;
      px[0] = color.r;
      px[1] = color.g;
      px[2] = color.b;
    }
  }
}

void draw_square(std::vector<std::uint8_t>& canvas, const EnvConfig& config, Vec2 center,
                 double half_abs, Rgb fill, const Rgb* edge) {
  const int rc = row_of(frac_of(config, center.y));
  const int cc = col_of(frac_of(config, center.x));
  const int hp = std::max(1, static_cast<int>(std::lround(half_abs / config.range() * kSpan)));
  fill_rect(canvas, rc - hp, rc + hp, cc - hp, cc + hp, fill);
  if (edge) {
    fill_rect(canvas, rc - hp, rc - hp, cc - hp, cc + hp, *edge);
    fill_rect(canvas, rc + hp, rc + hp, cc - hp, cc + hp, *edge);
    fill_rect(canvas, rc - hp, rc + hp, cc - hp, cc - hp, *edge);
    fill_rect(canvas, rc - hp, rc + hp, cc + hp, cc + hp, *edge);
  }
}

std::vector<std::uint8_t> draw_scene(const WorldState& state, const EnvConfig& config) {
  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(kCanvasW) * kCanvasH * 3);
  fill_rect(canvas, 0, kCanvasH - 1, 0, kCanvasW - 1, kBackground);
  draw_square(canvas, config, config.box_center, config.box_half, kBoxFill, &kBoxEdge);
  if (config.bimodal)
    draw_square(canvas, config, config.alt_box_center, config.box_half, kAltBoxFill,
                &kAltBoxEdge);
  for (const Vec2& obj : state.objects)
    draw_square(canvas, config, obj, config.object_size / 2.0, kObjectColor, nullptr);
  const int er = row_of(frac_of(config, state.ee.y));
  const int ec = col_of(frac_of(config, state.ee.x));
  fill_rect(canvas, er - 1, er + 1, ec - 1, ec + 1, kEffectorColor);
  return canvas;
}

// Nearest-neighbor resample of a canvas window into a size x size image.
std::vector<std::uint8_t> crop_resample(const std::vector<std::uint8_t>& canvas, int r0,
                                        int c0, int h, int w, int size) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(size) * size * 3);
  for (int r = 0; r < size; ++r) {
    const int sr = r0 + r * h / size;
    for (int c = 0; c < size; ++c) {
      const int sc = c0 + c * w / size;
      const std::uint8_t* src =
          canvas.data() + (static_cast<std::size_t>(sr) * kCanvasW + sc) * 3;
      std::uint8_t* dst = out.data() + (static_cast<std::size_t>(r) * size + c) * 3;
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    }
  }
  return out;
}

std::vector<std::uint8_t> active_view(const std::vector<std::uint8_t>& canvas, double pan,
                                      int eye_cols, int size) {
  const int center = col_of(pan_view_center(pan));
  const int start =
      std::clamp(center - kActiveW / 2 + eye_cols, 0, kCanvasW - kActiveW);
  return crop_resample(canvas, 0, start, kCanvasH, kActiveW, size);
}

std::vector<std::uint8_t> wrist_view(const std::vector<std::uint8_t>& canvas,
                                     const EnvConfig& config, Vec2 ee, int eye_cols,
                                     int size) {
  const int rc = row_of(frac_of(config, ee.y));
  const int cc = col_of(frac_of(config, ee.x));
  const int r0 = std::clamp(rc - kWristSize / 2, 0, kCanvasH - kWristSize);
  const int c0 = std::clamp(cc - kWristSize / 2 + eye_cols, 0, kCanvasW - kWristSize);
  return crop_resample(canvas, r0, c0, kWristSize, kWristSize, size);
}

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool inside_box(Vec2 p, Vec2 center, double half) {
  return std::abs(p.x - center.x) <= half && std::abs(p.y - center.y) <= half;
}

struct RectAbs {
  double x0, x1, y0, y1;
};

RectAbs spawn_rect(const EnvConfig& c) {
  const double mn = c.workspace_min, rg = c.range();
  return {mn + kSpawnFracX0 * rg, mn + kSpawnFracX1 * rg, mn + kSpawnFracY0 * rg,
          mn + kSpawnFracY1 * rg};
}

bool rects_overlap(const RectAbs& a, const RectAbs& b) {
  return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void EnvConfig::validate() const {
  require(std::isfinite(workspace_min) && std::isfinite(workspace_max) &&
              workspace_min < workspace_max,
          "workspace bounds must be finite with min < max");
  require(object_count >= 1 && object_count <= 8, "object_count must be in [1, 8]");
  require(object_size > 0.0 && object_size <= 0.2 * range(),
          "object_size must be positive and small against the workspace");
  require(box_half > 0.0, "box_half must be positive");
  const RectAbs spawn = spawn_rect(*this);
  auto check_box = [&](Vec2 center, const char* name) {
    require(center.x - box_half >= workspace_min && center.x + box_half <= workspace_max &&
                center.y - box_half >= workspace_min && center.y + box_half <= workspace_max,
            std::string(name) + " must lie inside the workspace");
    const RectAbs box{center.x - box_half, center.x + box_half, center.y - box_half,
                      center.y + box_half};
    require(!rects_overlap(spawn, box),
            std::string(name) + " must not overlap the object spawn region");
  };
  check_box(box_center, "box_center");
  if (bimodal) check_box(alt_box_center, "alt_box_center");
  require(image_size >= 8 && image_size <= 128, "image_size must be in [8, 128]");
  require(std::isfinite(snr_db), "snr_db must be finite");
  require(max_steps >= 1, "max_steps must be >= 1");
  require(std::isfinite(fps) && fps > 0.0, "fps must be positive");
}

EnvConfig EnvConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("environment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("environment config must be a JSON object");

  static const std::set<std::string> known = {
      "workspace_min", "workspace_max", "object_count", "object_size",
      "box_center",    "box_half",      "bimodal",      "alt_box_center",
      "image_size",    "snr_db",        "randomize_objects", "max_steps",
      "fps"};
  for (const auto& [key, value] : j.items())
    if (known.find(key) == known.end())
      throw SchemaError("unknown environment config key '" + key + "'");

  EnvConfig c;
  try {
    auto point = [](const nlohmann::json& v, const char* key) {
      if (!v.is_array() || v.size() != 2)
        throw SchemaError(std::string(key) + " must be a [x, y] pair");
      return Vec2{v[0].get<double>(), v[1].get<double>()};
    };
    if (j.contains("workspace_min")) c.workspace_min = j["workspace_min"].get<double>();
    if (j.contains("workspace_max")) c.workspace_max = j["workspace_max"].get<double>();
    if (j.contains("object_count")) c.object_count = j["object_count"].get<int>();
    if (j.contains("object_size")) c.object_size = j["object_size"].get<double>();
    if (j.contains("box_center")) c.box_center = point(j["box_center"], "box_center");
    if (j.contains("box_half")) c.box_half = j["box_half"].get<double>();
    if (j.contains("bimodal")) c.bimodal = j["bimodal"].get<bool>();
    if (j.contains("alt_box_center"))
      c.alt_box_center = point(j["alt_box_center"], "alt_box_center");
    if (j.contains("image_size")) c.image_size = j["image_size"].get<int>();
    if (j.contains("snr_db")) c.snr_db = j["snr_db"].get<double>();
    if (j.contains("randomize_objects"))
      c.randomize_objects = j["randomize_objects"].get<bool>();
    if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<int>();
    if (j.contains("fps")) c.fps = j["fps"].get<double>();
  } catch (const nlohmann::json::type_error& e) {
    throw SchemaError(std::string("environment config type error: ") + e.what());
  }
  c.validate();
  return c;
}

EnvConfig EnvConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("environment config not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string EnvConfig::to_json() const {
  nlohmann::ordered_json j;
  j["workspace_min"] = workspace_min;
  j["workspace_max"] = workspace_max;
  j["object_count"] = object_count;
  j["object_size"] = object_size;
  j["box_center"] = {box_center.x, box_center.y};
  j["box_half"] = box_half;
  j["bimodal"] = bimodal;
  j["alt_box_center"] = {alt_box_center.x, alt_box_center.y};
  j["image_size"] = image_size;
  j["snr_db"] = snr_db;
  j["randomize_objects"] = randomize_objects;
  j["max_steps"] = max_steps;
  j["fps"] = fps;
  return j.dump(2) + "\n";
}

std::array<double, 4> state_q(const WorldState& state) {
  return {state.ee.x, state.ee.y, state.grip, state.head_pan};
}

WorldState reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  const double mn = config.workspace_min, rg = config.range();
  WorldState s;
  s.rng = Rng(seed);
  s.ee = {mn + 0.5 * rg, mn + 0.75 * rg};
  s.grip = 1.0;
  s.head_pan = 0.5;
  const RectAbs spawn = spawn_rect(config);
  for (int i = 0; i < config.object_count; ++i) {
    if (config.randomize_objects) {
      const double x = s.rng.uniform(spawn.x0, spawn.x1);
      const double y = s.rng.uniform(spawn.y0, spawn.y1);
      s.objects.push_back({x, y});
    } else {
      const double fx = clampd(kCanonicalX + 0.12 * i, kSpawnFracX0, kSpawnFracX1);
      s.objects.push_back({mn + fx * rg, mn + kCanonicalY * rg});
    }
  }
  s.held = -1;
  s.step_index = 0;
  s.prev_q = state_q(s);
  s.last_target = s.prev_q;
  return s;
}

void step(WorldState& state, const std::array<double, 4>& action, const EnvConfig& config) {
  const double mn = config.workspace_min, mx = config.workspace_max;
  const double rg = config.range();
  // Non-finite components hold the current pose; in-range values are clamped.
  std::array<double, 4> q = state_q(state);
  std::array<double, 4> t{};
  for (int i = 0; i < 4; ++i) t[i] = std::isfinite(action[i]) ? action[i] : q[i];
  t[0] = clampd(t[0], mn, mx);
  t[1] = clampd(t[1], mn, mx);
  t[2] = clampd(t[2], 0.0, 1.0);
  t[3] = clampd(t[3], 0.0, 1.0);

  state.prev_q = q;
  const double dx = t[0] - state.ee.x;
  const double dy = t[1] - state.ee.y;
  const double d = std::hypot(dx, dy);
  const double cap = kSpeedCap * rg;
  if (d > cap) {
    state.ee.x += dx * cap / d;
    state.ee.y += dy * cap / d;
  } else {
    state.ee.x = t[0];
    state.ee.y = t[1];
  }
  state.grip += clampd(t[2] - state.grip, -kGripRate, kGripRate);
  state.head_pan += clampd(t[3] - state.head_pan, -kPanRate, kPanRate);

  if (state.held >= 0) state.objects[static_cast<std::size_t>(state.held)] = state.ee;
  if (state.held < 0 && state.grip < 0.5) {
    int best = -1;
    double best_d = kGraspRadius * rg;
    for (std::size_t i = 0; i < state.objects.size(); ++i) {
      const double di = dist(state.ee, state.objects[i]);
      if (di <= best_d) {
        best = static_cast<int>(i);
        best_d = di;
      }
    }
    if (best >= 0) {
      state.held = best;
      state.objects[static_cast<std::size_t>(best)] = state.ee;
    }
  } else if (state.held >= 0 && state.grip > 0.5) {
    state.held = -1;
  }
  state.step_index += 1;
  state.last_target = t;
}

double pan_view_center(double pan) { return 0.2 + 0.6 * clampd(pan, 0.0, 1.0); }

double pan_for(double x_frac) { return clampd((x_frac - 0.2) / 0.6, 0.0, 1.0); }

const std::vector<std::uint8_t>& frame_camera(const SensorFrame& frame,
                                              const std::string& name) {
  if (name == "cam_active_left") return frame.cam_active_left;
  if (name == "cam_active_right") return frame.cam_active_right;
  if (name == "cam_static_left") return frame.cam_static_left;
  if (name == "cam_static_right") return frame.cam_static_right;
  if (name == "cam_wrist_left") return frame.cam_wrist_left;
  if (name == "cam_wrist_right") return frame.cam_wrist_right;
  throw NotFoundError("no camera stream named '" + name + "'");
}

bool object_in_box(Vec2 p, const EnvConfig& config) {
  if (inside_box(p, config.box_center, config.box_half)) return true;
  return config.bimodal && inside_box(p, config.alt_box_center, config.box_half);
}

SensorFrame render_sensors(WorldState& state, const EnvConfig& config) {
  const std::vector<std::uint8_t> canvas = draw_scene(state, config);
  const int size = config.image_size;
  SensorFrame f;
  f.cam_active_left = active_view(canvas, state.head_pan, -kEyeOffset, size);
  f.cam_active_right = active_view(canvas, state.head_pan, kEyeOffset, size);
  f.cam_static_left = crop_resample(canvas, 0, kStaticLeftCol, kCanvasH, kCanvasH, size);
  f.cam_static_right = crop_resample(canvas, 0, kStaticRightCol, kCanvasH, kCanvasH, size);
  f.cam_wrist_left = wrist_view(canvas, config, state.ee, -kEyeOffset, size);
  f.cam_wrist_right = wrist_view(canvas, config, state.ee, kEyeOffset, size);

  f.q = state_q(state);
  for (int i = 0; i < 4; ++i) f.qd[i] = (f.q[i] - state.prev_q[i]) * config.fps;
  for (int i = 0; i < 4; ++i)
    f.tau[i] = kTauKp * (state.last_target[i] - f.q[i]) - kTauKd * f.qd[i];
  if (state.held >= 0) f.tau[1] += kHoldLoad;

  const double clean =
      state.held >= 0
          ? clampd(kPressureMax * (0.5 - state.grip) / 0.5, 0.0, kPressureMax)
          : 0.0;
  const double sigma = config.snr_db >= kNoiselessSnrDb
                           ? 0.0
                           : kPressureRef * std::pow(10.0, -config.snr_db / 20.0);
  for (int i = 0; i < kPressureChannels; ++i)
    f.f_pres[static_cast<std::size_t>(i)] = clean + sigma * state.rng.normal();

  f.timestamp = state.step_index / config.fps;
  return f;
}

SubtaskScore score_subtasks(const std::vector<WorldState>& trajectory,
                            const EnvConfig& config) {
  if (trajectory.empty()) throw std::invalid_argument("trajectory must be non-empty");
  const double rg = config.range();
  const double lift_abs = config.workspace_min + kLiftThreshold * rg;

  SubtaskScore score;
  int first_release = -1;
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const WorldState& s = trajectory[t];
    const Vec2 obj = s.objects.at(0);
    const bool holding = s.held == 0;
    if (dist(s.ee, obj) <= kApproachEps * rg) score.approach = true;
    if (holding) score.grasp = true;
    if (holding && obj.y >= lift_abs) score.lift = true;
    if (holding && object_in_box(obj, config)) score.transport = true;
    if (!holding && object_in_box(obj, config)) {
      score.release = true;
      if (first_release < 0) first_release = static_cast<int>(t);
    }
  }
  // later milestones require their predecessors
  score.grasp = score.grasp && score.approach;
  score.lift = score.lift && score.grasp;
  score.transport = score.transport && score.lift;
  score.release = score.release && score.transport;

  score.execution_steps = score.release && first_release >= 0
                              ? first_release
                              : static_cast<int>(trajectory.size()) - 1;
  return score;
}

OracleController::OracleController(const EnvConfig& config, std::uint64_t seed)
    : config_(&config) {
  config.validate();
  Rng rng(seed ^ 0x8E51C4D1F0A3B976ULL);  // decoupled from the environment stream
  hover_jitter_ = {rng.uniform(-kOracleJitter, kOracleJitter),
                   rng.uniform(-kOracleJitter, kOracleJitter)};
  release_jitter_ = rng.uniform(-kOracleJitter, kOracleJitter);
  chosen_box_ = config.bimodal && rng.uniform() < 0.5 ? 1 : 0;
  settle_left_ = kSettleSteps;
}

std::array<double, 4> OracleController::plan(const WorldState& state) {
  const EnvConfig& c = *config_;
  const double mn = c.workspace_min, mx = c.workspace_max, rg = c.range();
  const Vec2 obj = state.objects.at(0);
  const Vec2 box = chosen_box_ == 1 ? c.alt_box_center : c.box_center;
  const Vec2 hover{clampd(obj.x + hover_jitter_.x * rg, mn, mx),
                   clampd(obj.y + (0.12 + hover_jitter_.y) * rg, mn, mx)};
  const double carry_y = mn + kCarryHeight * rg;
  const double release_x = clampd(box.x + release_jitter_ * rg, mn, mx);

  bool advanced = true;
  while (advanced) {
    advanced = false;
    switch (phase_) {
      case Phase::kApproach:
        if (dist(state.ee, hover) <= 0.02 * rg) {
          phase_ = Phase::kDescend;
          advanced = true;
        }
        break;
      case Phase::kDescend:
        if (dist(state.ee, obj) <= 0.03 * rg) {
          phase_ = Phase::kClose;
          advanced = true;
        }
        break;
      case Phase::kClose:
        if (state.held == 0 && state.grip <= 0.15) {
          phase_ = Phase::kLift;
          advanced = true;
        }
        break;
      case Phase::kLift:
        if (frac_of(c, state.ee.y) >= kCarryHeight - 0.07) {
          phase_ = Phase::kTransport;
          advanced = true;
        }
        break;
      case Phase::kTransport:
        if (std::abs(state.ee.x - release_x) <= 0.015 * rg &&
            frac_of(c, state.ee.y) >= kCarryHeight - 0.07) {
          phase_ = Phase::kOpen;
          advanced = true;
        }
        break;
      case Phase::kOpen:
        if (state.held != 0) {
          phase_ = Phase::kSettle;
          advanced = true;
        }
        break;
      case Phase::kSettle:
        if (settle_left_ <= 0) phase_ = Phase::kDone;
        break;
      case Phase::kDone:
        break;
    }
  }

  switch (phase_) {
    case Phase::kApproach:
      return {hover.x, hover.y, 1.0, pan_for(frac_of(c, obj.x))};
    case Phase::kDescend:
      return {obj.x, obj.y, 1.0, pan_for(frac_of(c, obj.x))};
    case Phase::kClose:
      return {obj.x, obj.y, kOracleGrip, pan_for(frac_of(c, obj.x))};
    case Phase::kLift:
      return {state.ee.x, carry_y, kOracleGrip, state.head_pan};
    case Phase::kTransport:
      return {release_x, carry_y, kOracleGrip, pan_for(frac_of(c, box.x))};
    case Phase::kOpen:
      return {state.ee.x, state.ee.y, 1.0, state.head_pan};
    case Phase::kSettle:
      --settle_left_;
      return {state.ee.x, state.ee.y, 1.0, state.head_pan};
    case Phase::kDone:
      break;
  }
  return state_q(state);
}

Manifest build_manifest(const EnvConfig& config) {
  config.validate();
  Manifest m;
  m.format_version = 1;
  m.dataset_name = "synthetic-manipulation";
  m.fps = config.fps;
  m.episode_count = 0;
  const int s = config.image_size;
  auto cam = [&](const char* name) {
    m.streams.push_back({name, StreamKind::kCamera, {s, s, 3}, Dtype::kU8, "rgb"});
  };
  cam("cam_active_left");
  cam("cam_active_right");
  cam("cam_static_left");
  cam("cam_static_right");
  cam("cam_wrist_left");
  cam("cam_wrist_right");
  m.streams.push_back({"q", StreamKind::kProprio, {4}, Dtype::kF32, "workspace"});
  m.streams.push_back({"qd", StreamKind::kProprio, {4}, Dtype::kF32, "workspace/s"});
  m.streams.push_back({"tau", StreamKind::kProprio, {4}, Dtype::kF32, "arb"});
  m.streams.push_back(
      {"f_pres", StreamKind::kProprio, {kPressureChannels}, Dtype::kF32, "normalized"});
  m.streams.push_back({"action", StreamKind::kAction, {4}, Dtype::kF32, "workspace"});
  m.streams.push_back({"timestamp", StreamKind::kTimestamp, {}, Dtype::kF64, "s"});
  m.validate();
  return m;
}

MasterEpisode scripted_demo(const EnvConfig& config, std::uint64_t seed) {
  const Manifest manifest = build_manifest(config);
  WorldState state = reset(config, seed);
  OracleController oracle(config, seed);

  std::vector<SensorFrame> frames;
  std::vector<std::array<double, 4>> actions;
  while (!oracle.done()) {
    if (state.step_index >= config.max_steps)
      throw EnvError("oracle exceeded max_steps=" + std::to_string(config.max_steps));
    SensorFrame frame = render_sensors(state, config);
    std::array<double, 4> action = oracle.plan(state);
    // Execute the f32-quantized action that the dataset stores, so replaying
    // the recorded action stream reproduces the trajectory bit for bit.
    for (double& v : action) v = static_cast<double>(static_cast<float>(v));
    frames.push_back(std::move(frame));
    actions.push_back(action);
    step(state, action, config);
  }
  if (frames.size() < 2) throw EnvError("oracle episode shorter than two frames");

  const std::uint32_t t = static_cast<std::uint32_t>(frames.size());
  MasterEpisode ep;
  for (const StreamDescriptor& d : manifest.streams) {
    StreamData sd;
    sd.name = d.name;
    sd.dtype = d.dtype;
    sd.dims = d.frame_shape;
    sd.t = t;
    if (d.kind == StreamKind::kCamera) {
      std::vector<std::uint8_t> bytes;
      bytes.reserve(static_cast<std::size_t>(t) * d.frame_elems());
      for (const SensorFrame& f : frames) {
        const std::vector<std::uint8_t>& src = frame_camera(f, d.name);
        bytes.insert(bytes.end(), src.begin(), src.end());
      }
      sd.values = std::move(bytes);
    } else if (d.kind == StreamKind::kTimestamp) {
      std::vector<double> ts;
      ts.reserve(t);
      for (const SensorFrame& f : frames) ts.push_back(f.timestamp);
      sd.values = std::move(ts);
    } else if (d.kind == StreamKind::kAction) {
      std::vector<float> vals;
      vals.reserve(static_cast<std::size_t>(t) * 4);
      for (const auto& a : actions)
        for (double v : a) vals.push_back(static_cast<float>(v));
      sd.values = std::move(vals);
    } else {
      std::vector<float> vals;
      vals.reserve(static_cast<std::size_t>(t) * d.frame_elems());
      for (const SensorFrame& f : frames) {
        if (d.name == "q")
          for (double v : f.q) vals.push_back(static_cast<float>(v));
        else if (d.name == "qd")
          for (double v : f.qd) vals.push_back(static_cast<float>(v));
        else if (d.name == "tau")
          for (double v : f.tau) vals.push_back(static_cast<float>(v));
        else
          for (double v : f.f_pres) vals.push_back(static_cast<float>(v));
      }
      sd.values = std::move(vals);
    }
    sd.check_consistent();
    ep.streams.push_back(std::move(sd));
  }
  check_episode_schema(manifest, ep);
  return ep;
}

}  // namespace actbench
