#pragma once

#include "actbench/dataset.hpp"
#include "actbench/policy_name.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace actbench {

// Resolving a policy name against a manifest and applying it as a mask over
// master episodes. Masking is pure omission: retained streams and channels
// are copied bit-for-bit, frame counts and timestamps are untouched, excluded
// data is simply absent. A zero-fill mode keeps the full schema and writes
// zeros instead, for comparison experiments only.

struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChannelGroupMap {
  std::map<std::string, std::vector<int>> groups;

  // Shipped default: tag "A" selects the positional channels {0, 1}.
  static ChannelGroupMap defaults();
  // {"groups": {"A": [0, 1], ...}}
  static ChannelGroupMap from_json(const std::string& text);
  static ChannelGroupMap load(const std::filesystem::path& path);
};

// Camera selections map onto the stream naming convention
// cam_{active|static|wrist}_{left|right}; proprio blocks onto the canonical
// roster q, qd, tau, f_pres. q is always fully included.
struct SensorConfig {
  std::string policy;  // canonical formatted name
  std::vector<std::string> camera_streams;  // selected, in manifest order
  std::vector<int> q_channels;              // always all channels of q
  std::vector<int> qd_channels;             // empty = block excluded
  std::vector<int> tau_channels;
  std::vector<int> fpres_channels;
  int state_dim = 0;
  bool zero_fill = false;
};

SensorConfig resolve_config(const PolicyName& name, const ChannelGroupMap& groups,
                            const Manifest& manifest, bool zero_fill = false);

struct MaskedEpisode {
  std::int64_t episode_id = -1;
  std::uint32_t t = 0;
  std::vector<StreamData> cameras;  // manifest order
  std::vector<StreamData> proprio;  // retained blocks, q / qd / tau / f_pres order
  StreamData action;
  StreamData timestamp;
};

MaskedEpisode apply_mask(const MasterEpisode& episode, const Manifest& manifest,
                         const SensorConfig& config);

// s_t: concatenation of the retained proprio blocks at one frame, q first,
// then qd, tau, f_pres, ascending channel index within each block.
// Length == config.state_dim.
std::vector<double> assemble_state(const MaskedEpisode& masked, std::uint32_t frame,
                                   const SensorConfig& config);

}  // namespace actbench
