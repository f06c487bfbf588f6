#pragma once

// Deterministic 2D manipulation environment.
//
// A point effector with a grip aperture and a head-pan channel moves over a
// rectangular workspace, picks up a square object, and drops it into a box
// region. Sensors mirror a bimanual-robot recording rig: stereo static
// cameras see the whole workspace, stereo active cameras crop a window whose
// center is steered by head_pan, stereo wrist cameras crop around the
// effector, and the proprioceptive streams are q = [x, y, grip, head_pan],
// its backward difference qd, a PD-residual torque proxy tau, and a 2-channel
// fingertip pressure signal with configurable signal-to-noise ratio.
//
// Conventions (all positions normalized to the workspace unless noted):
//   - step(): clamp the target, move the effector under a per-step speed cap,
//     rate-limit grip and pan, let a held object track the effector, then
//     grasp (grip < 0.5 within kGraspRadius) or release (grip > 0.5).
//   - On grasp the object snaps to the effector position.
//   - f_pres clean signal = held ? kPressureMax * (0.5 - grip) / 0.5 : 0,
//     clamped to [0, kPressureMax]; noise sigma = kPressureRef *
//     10^(-snr_db / 20), with snr_db >= 200 meaning exactly zero noise.
//     kPressureRef is the clean value at the oracle's grip set point.
//   - tau = kTauKp * (last_target - q) - kTauKd * qd, plus kHoldLoad on the
//     y channel while holding.
//   - render_sensors() draws exactly kPressureChannels normal variates from
//     the state's generator per call, so frame-by-frame replay of a recorded
//     action stream reproduces every sensor byte.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "actbench/dataset.hpp"
#include "actbench/rng.hpp"

namespace actbench {

struct EnvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Dynamics.
inline constexpr double kSpeedCap = 0.04;   // effector distance per step
inline constexpr double kGripRate = 0.25;   // grip aperture change per step
inline constexpr double kPanRate = 0.08;    // head pan change per step
inline constexpr double kGraspRadius = 0.05;
inline constexpr double kApproachEps = 0.06;
inline constexpr double kLiftThreshold = 0.7;

// Pressure model.
inline constexpr int kPressureChannels = 2;
inline constexpr double kPressureMax = 1.0;
inline constexpr double kOracleGrip = 0.1;
inline constexpr double kPressureRef = 0.8;  // clean signal at kOracleGrip
inline constexpr double kNoiselessSnrDb = 200.0;

// Torque proxy.
inline constexpr double kTauKp = 1.0;
inline constexpr double kTauKd = 0.1;
inline constexpr double kHoldLoad = 0.3;

// Object spawn rectangle, as fractions of the workspace extent.
inline constexpr double kSpawnFracX0 = 0.15;
inline constexpr double kSpawnFracX1 = 0.85;
inline constexpr double kSpawnFracY0 = 0.10;
inline constexpr double kSpawnFracY1 = 0.50;

// Canonical object position (randomize_objects = false), workspace fractions.
inline constexpr double kCanonicalX = 0.4;
inline constexpr double kCanonicalY = 0.3;

struct EnvConfig {
  double workspace_min = 0.0;
  double workspace_max = 1.0;
  int object_count = 1;
  double object_size = 0.06;  // square side
  Vec2 box_center{0.8, 0.85};
  double box_half = 0.09;
  bool bimodal = false;  // adds alt_box; demos pick either box 50/50
  Vec2 alt_box_center{0.2, 0.85};
  int image_size = 32;
  double snr_db = 40.0;
  bool randomize_objects = true;
  int max_steps = 150;
  double fps = 30.0;

  void validate() const;  // throws std::invalid_argument
  double range() const { return workspace_max - workspace_min; }

  // Strict keys: unknown keys are rejected, absent keys keep defaults.
  static EnvConfig from_json(const std::string& text);
  static EnvConfig load(const std::string& path);
  std::string to_json() const;
};

struct WorldState {
  Vec2 ee{0.5, 0.75};
  double grip = 1.0;  // 1 open, 0 closed
  double head_pan = 0.5;
  std::vector<Vec2> objects;
  int held = -1;  // object index, -1 when free
  int step_index = 0;
  std::array<double, 4> prev_q{};     // q of the previous step, for qd
  std::array<double, 4> last_target{};  // latest clamped action, for tau
  Rng rng{0};
};

std::array<double, 4> state_q(const WorldState& state);

// Deterministic in (config, seed). Objects spawn uniformly in the spawn
// rectangle, or at the canonical position (offset per object) when
// randomize_objects is false.
WorldState reset(const EnvConfig& config, std::uint64_t seed);

// Applies one position-control step; see the header comment for the order.
void step(WorldState& state, const std::array<double, 4>& action, const EnvConfig& config);

// Center of the active-camera view for a pan value, as a workspace fraction;
// pan in [0, 1] sweeps [0.2, 0.8].
double pan_view_center(double pan);
// Pan value whose view centers on workspace fraction x.
double pan_for(double x_frac);

struct SensorFrame {
  std::vector<std::uint8_t> cam_active_left, cam_active_right;
  std::vector<std::uint8_t> cam_static_left, cam_static_right;
  std::vector<std::uint8_t> cam_wrist_left, cam_wrist_right;
  std::array<double, 4> q{}, qd{}, tau{};
  std::array<double, kPressureChannels> f_pres{};
  double timestamp = 0.0;
};

// Rasterizes the scene once and crops the six camera views; fills the
// proprioceptive channels from the state. Advances state.rng (noise draws).
SensorFrame render_sensors(WorldState& state, const EnvConfig& config);

// Camera bytes by manifest stream name; throws NotFoundError on other names.
const std::vector<std::uint8_t>& frame_camera(const SensorFrame& frame,
                                              const std::string& name);

// True when the point lies in the primary box, or in either box when bimodal.
bool object_in_box(Vec2 p, const EnvConfig& config);

struct SubtaskScore {
  bool approach = false;
  bool grasp = false;
  bool lift = false;
  bool transport = false;
  bool release = false;
  int execution_steps = 0;  // steps until first release, else steps taken

  int achieved() const {
    return (approach ? 1 : 0) + (grasp ? 1 : 0) + (lift ? 1 : 0) + (transport ? 1 : 0) +
           (release ? 1 : 0);
  }
  double fraction() const { return achieved() / 5.0; }
};

// Milestones over a trajectory of states (trajectory[0] = reset state).
// approach: effector within kApproachEps of object 0; grasp: held; lift:
// held above kLiftThreshold; transport: held with the object inside a box;
// release: object inside a box, not held. Later milestones only count when
// every predecessor was achieved. In bimodal configs either box qualifies.
SubtaskScore score_subtasks(const std::vector<WorldState>& trajectory,
                            const EnvConfig& config);

// Waypoint-following demonstrator: pan to the object, approach, descend,
// close the grip, lift, carry to the box (the chosen one when bimodal),
// open, settle. Waypoints are jittered per seed.
class OracleController {
 public:
  OracleController(const EnvConfig& config, std::uint64_t seed);

  std::array<double, 4> plan(const WorldState& state);
  bool done() const { return phase_ == Phase::kDone; }
  int chosen_box() const { return chosen_box_; }  // 0 primary, 1 alternate

 private:
  enum class Phase { kApproach, kDescend, kClose, kLift, kTransport, kOpen, kSettle, kDone };

  const EnvConfig* config_;
  Phase phase_ = Phase::kApproach;
  int chosen_box_ = 0;
  int settle_left_ = 0;
  Vec2 hover_jitter_{};
  double release_jitter_ = 0.0;
};

// Stream schema for datasets generated by this environment: six cameras,
// q / qd / tau / f_pres, action, timestamp, in that order.
Manifest build_manifest(const EnvConfig& config);

// Records one oracle episode: per step, render sensors, plan, record, step.
// Throws EnvError if the oracle exceeds config.max_steps.
MasterEpisode scripted_demo(const EnvConfig& config, std::uint64_t seed);

}  // namespace actbench
