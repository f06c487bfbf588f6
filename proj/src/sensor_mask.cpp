#include "actbench/sensor_mask.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace actbench {

namespace {

const char* camera_base(CameraKind k) {
  switch (k) {
    case CameraKind::kStatic: return "cam_static";
    case CameraKind::kWrist: return "cam_wrist";
    case CameraKind::kActive: return "cam_active";
  }
  return "?";
}

const char* proprio_stream(ProprioKind k) {
  switch (k) {
    case ProprioKind::kPressure: return "f_pres";
    case ProprioKind::kVelocity: return "qd";
    case ProprioKind::kTorque: return "tau";
  }
  return "?";
}

std::vector<int> all_channels(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

int block_width(const Manifest& manifest, const std::string& name) {
  return manifest.stream(name).frame_shape[0];
}

// Channel subset of a rank-1 f32 stream, ascending indices.
StreamData take_channels(const StreamData& src, const std::vector<int>& ch) {
  const auto& in = std::get<std::vector<float>>(src.values);
  const int n = src.dims[0];
  StreamData out;
  out.name = src.name;
  out.dtype = Dtype::kF32;
  out.dims = {static_cast<int>(ch.size())};
  out.t = src.t;
  std::vector<float> v(ch.size() * src.t);
  for (std::uint32_t f = 0; f < src.t; ++f)
    for (std::size_t j = 0; j < ch.size(); ++j)
      v[f * ch.size() + j] = in[static_cast<std::size_t>(f) * static_cast<std::size_t>(n) +
                                static_cast<std::size_t>(ch[j])];
  out.values = std::move(v);
  return out;
}

// Full-width copy with everything outside `keep` forced to zero.
StreamData zero_fill_channels(const StreamData& src, const std::vector<int>& keep) {
  const auto& in = std::get<std::vector<float>>(src.values);
  const int n = src.dims[0];
  StreamData out = src;
  std::vector<float> v(in.size(), 0.0f);
  for (std::uint32_t f = 0; f < src.t; ++f)
    for (int c : keep)
      v[static_cast<std::size_t>(f) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)] =
          in[static_cast<std::size_t>(f) * static_cast<std::size_t>(n) +
             static_cast<std::size_t>(c)];
  out.values = std::move(v);
  return out;
}

StreamData zeros_like(const StreamData& src) {
  StreamData out = src;
  std::visit([](auto& v) { std::fill(v.begin(), v.end(), typename std::decay_t<decltype(v)>::value_type{}); },
             out.values);
  return out;
}

}  // namespace

ChannelGroupMap ChannelGroupMap::defaults() {
  ChannelGroupMap m;
  m.groups["A"] = {0, 1};
  return m;
}

ChannelGroupMap ChannelGroupMap::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("channel group map: ") + e.what());
  }
  ChannelGroupMap m;
  try {
    for (const auto& [tag, arr] : j.at("groups").items()) {
      std::vector<int> idx;
      for (const auto& v : arr) idx.push_back(v.get<int>());
      m.groups[tag] = std::move(idx);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("channel group map: ") + e.what());
  }
  return m;
}

ChannelGroupMap ChannelGroupMap::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("no channel group map at " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

SensorConfig resolve_config(const PolicyName& name, const ChannelGroupMap& groups,
                            const Manifest& manifest, bool zero_fill) {
  manifest.validate();
  SensorConfig config;
  config.policy = format_policy_name(name);
  config.zero_fill = zero_fill;

  std::set<std::string> cam_names;
  for (const CameraSel& sel : name.cameras) {
    std::vector<std::string> wanted;
    const std::string base = camera_base(sel.kind);
    if (sel.side != CameraSide::kRight) wanted.push_back(base + "_left");
    if (sel.side != CameraSide::kLeft) wanted.push_back(base + "_right");
    for (std::string& w : wanted) {
      const int idx = manifest.index_of(w);
      if (idx < 0 || manifest.streams[static_cast<std::size_t>(idx)].kind != StreamKind::kCamera)
        throw ResolutionError("manifest has no camera stream '" + w + "'");
      cam_names.insert(std::move(w));
    }
  }
  for (const StreamDescriptor& d : manifest.streams)
    if (cam_names.count(d.name)) config.camera_streams.push_back(d.name);

  if (manifest.index_of("q") < 0) throw ResolutionError("manifest has no proprio stream 'q'");
  config.q_channels = all_channels(block_width(manifest, "q"));

  std::set<int> qd, tau, fpres;
  for (const ProprioSel& sel : name.proprio) {
    const std::string stream = proprio_stream(sel.kind);
    const int idx = manifest.index_of(stream);
    if (idx < 0 || manifest.streams[static_cast<std::size_t>(idx)].kind != StreamKind::kProprio)
      throw ResolutionError("manifest has no proprio stream '" + stream + "'");
    const int width = block_width(manifest, stream);
    std::vector<int> sel_channels;
    if (sel.tag.empty()) {
      sel_channels = all_channels(width);
    } else {
      auto it = groups.groups.find(sel.tag);
      if (it == groups.groups.end())
        throw ResolutionError("unknown group tag '" + sel.tag + "'");
      sel_channels = it->second;
      for (int c : sel_channels)
        if (c < 0 || c >= width)
          throw ResolutionError("group tag '" + sel.tag + "' channel " + std::to_string(c) +
                                " out of bounds for '" + stream + "' of width " +
                                std::to_string(width));
    }
    std::set<int>& dst = sel.kind == ProprioKind::kVelocity ? qd
                         : sel.kind == ProprioKind::kTorque ? tau
                                                            : fpres;
    dst.insert(sel_channels.begin(), sel_channels.end());
  }
  config.qd_channels.assign(qd.begin(), qd.end());
  config.tau_channels.assign(tau.begin(), tau.end());
  config.fpres_channels.assign(fpres.begin(), fpres.end());

  if (zero_fill) {
    // the model sees the full-width state with zeros at excluded positions
    config.state_dim = block_width(manifest, "q");
    for (const char* b : {"qd", "tau", "f_pres"})
      if (manifest.index_of(b) >= 0) config.state_dim += block_width(manifest, b);
  } else {
    config.state_dim = static_cast<int>(config.q_channels.size() + config.qd_channels.size() +
                                        config.tau_channels.size() +
                                        config.fpres_channels.size());
  }
  return config;
}

MaskedEpisode apply_mask(const MasterEpisode& episode, const Manifest& manifest,
                         const SensorConfig& config) {
  check_episode_schema(manifest, episode);

  MaskedEpisode out;
  out.episode_id = episode.episode_id;
  out.t = episode.streams.empty() ? 0 : episode.streams[0].t;

  const std::set<std::string> selected_cams(config.camera_streams.begin(),
                                            config.camera_streams.end());
  for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
    const StreamDescriptor& d = manifest.streams[i];
    const StreamData& s = episode.streams[i];
    switch (d.kind) {
      case StreamKind::kCamera:
        if (selected_cams.count(d.name)) out.cameras.push_back(s);
        else if (config.zero_fill) out.cameras.push_back(zeros_like(s));
        break;
      case StreamKind::kAction:
        out.action = s;
        break;
      case StreamKind::kTimestamp:
        out.timestamp = s;
        break;
      case StreamKind::kProprio:
        break;  // handled below in fixed block order
    }
  }

  struct BlockSel {
    const char* name;
    const std::vector<int>* channels;
  };
  const BlockSel blocks[] = {{"q", &config.q_channels},
                             {"qd", &config.qd_channels},
                             {"tau", &config.tau_channels},
                             {"f_pres", &config.fpres_channels}};
  for (const BlockSel& b : blocks) {
    const int idx = manifest.index_of(b.name);
    if (idx < 0) {
      if (!b.channels->empty())
        throw SchemaError(std::string("config selects '") + b.name +
                          "' but the episode has no such stream");
      continue;
    }
    const StreamData& src = episode.streams[static_cast<std::size_t>(idx)];
    for (int c : *b.channels)
      if (c < 0 || c >= src.dims[0])
        throw SchemaError(std::string("config channel ") + std::to_string(c) +
                          " out of bounds for '" + b.name + "'");
    if (config.zero_fill) out.proprio.push_back(zero_fill_channels(src, *b.channels));
    else if (!b.channels->empty()) out.proprio.push_back(take_channels(src, *b.channels));
  }
  return out;
}

std::vector<double> assemble_state(const MaskedEpisode& masked, std::uint32_t frame,
                                   const SensorConfig& config) {
  if (frame >= masked.t)
    throw std::out_of_range("assemble_state: frame " + std::to_string(frame) + " of " +
                            std::to_string(masked.t));
  std::vector<double> s;
  s.reserve(static_cast<std::size_t>(config.state_dim));
  for (const StreamData& block : masked.proprio) {
    const auto& v = std::get<std::vector<float>>(block.values);
    const std::size_t k = static_cast<std::size_t>(block.dims[0]);
    for (std::size_t j = 0; j < k; ++j)
      s.push_back(static_cast<double>(v[frame * k + j]));
  }
  if (static_cast<int>(s.size()) != config.state_dim)
    throw SchemaError("assembled state has " + std::to_string(s.size()) + " channels, config says " +
                      std::to_string(config.state_dim));
  return s;
}

}  // namespace actbench
