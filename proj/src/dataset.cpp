#include "actbench/dataset.hpp"

#include "json.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

namespace actbench {

static_assert(std::endian::native == std::endian::little,
              "the container format is little-endian and so must be the host");
static_assert(sizeof(float) == 4 && sizeof(double) == 8 &&
                  std::numeric_limits<double>::is_iec559,
              "IEEE-754 host required");

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'U', 'A', 'F', '1'};
constexpr std::uint32_t kMaxStreams = 4096;
constexpr std::int64_t kMaxValuesPerStream = std::int64_t{1} << 31;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_raw(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

std::string issue_str(const ValidationIssue& issue) {
  std::string s = "episode " + std::to_string(issue.episode_id);
  if (issue.frame >= 0) s += " frame " + std::to_string(issue.frame);
  return s + ": " + issue.what;
}

}  // namespace

std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::kU8: return 1;
    case Dtype::kF32: return 4;
    case Dtype::kF64: return 8;
  }
  throw FormatError("unknown dtype code " + std::to_string(static_cast<int>(d)));
}

const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::kU8: return "u8";
    case Dtype::kF32: return "f32";
    case Dtype::kF64: return "f64";
  }
  return "?";
}

Dtype dtype_from_name(const std::string& s) {
  if (s == "u8") return Dtype::kU8;
  if (s == "f32") return Dtype::kF32;
  if (s == "f64") return Dtype::kF64;
  throw SchemaError("unknown dtype '" + s + "'");
}

const char* kind_name(StreamKind k) {
  switch (k) {
    case StreamKind::kCamera: return "camera";
    case StreamKind::kProprio: return "proprio";
    case StreamKind::kAction: return "action";
    case StreamKind::kTimestamp: return "timestamp";
  }
  return "?";
}

StreamKind kind_from_name(const std::string& s) {
  if (s == "camera") return StreamKind::kCamera;
  if (s == "proprio") return StreamKind::kProprio;
  if (s == "action") return StreamKind::kAction;
  if (s == "timestamp") return StreamKind::kTimestamp;
  throw SchemaError("unknown stream kind '" + s + "'");
}

int Manifest::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < streams.size(); ++i)
    if (streams[i].name == name) return static_cast<int>(i);
  return -1;
}

const StreamDescriptor& Manifest::stream(const std::string& name) const {
  int i = index_of(name);
  if (i < 0) throw SchemaError("manifest has no stream '" + name + "'");
  return streams[static_cast<std::size_t>(i)];
}

void Manifest::validate() const {
  if (format_version != 1)
    throw SchemaError("manifest format_version " + std::to_string(format_version) + " != 1");
  if (!(fps > 0.0)) throw SchemaError("manifest fps must be > 0");
  if (episode_count < 0) throw SchemaError("manifest episode_count must be >= 0");
  std::set<std::string> names;
  int n_ts = 0, n_act = 0;
  for (const StreamDescriptor& s : streams) {
    if (s.name.empty()) throw SchemaError("manifest stream with empty name");
    if (!names.insert(s.name).second)
      throw SchemaError("manifest duplicate stream name '" + s.name + "'");
    for (int d : s.frame_shape)
      if (d <= 0) throw SchemaError("stream '" + s.name + "' has non-positive dim");
    switch (s.kind) {
      case StreamKind::kCamera:
        if (s.frame_shape.size() != 3 || s.frame_shape[2] != 3 || s.dtype != Dtype::kU8)
          throw SchemaError("camera stream '" + s.name + "' must be (H,W,3) u8");
        break;
      case StreamKind::kProprio:
        if (s.frame_shape.size() != 1 || s.dtype != Dtype::kF32)
          throw SchemaError("proprio stream '" + s.name + "' must be rank-1 f32");
        break;
      case StreamKind::kAction:
        ++n_act;
        if (s.frame_shape.size() != 1 || s.dtype != Dtype::kF32)
          throw SchemaError("action stream '" + s.name + "' must be rank-1 f32");
        break;
      case StreamKind::kTimestamp:
        ++n_ts;
        if (!s.frame_shape.empty() || s.dtype != Dtype::kF64)
          throw SchemaError("timestamp stream '" + s.name + "' must be rank-0 f64");
        break;
    }
  }
  if (n_ts != 1) throw SchemaError("manifest must contain exactly one timestamp stream");
  if (n_act != 1) throw SchemaError("manifest must contain exactly one action stream");
}

std::int64_t StreamData::value_count() const {
  return std::visit([](const auto& v) { return static_cast<std::int64_t>(v.size()); }, values);
}

void StreamData::check_consistent() const {
  if (static_cast<std::size_t>(values.index()) != static_cast<std::size_t>(dtype))
    throw SchemaError("stream '" + name + "': value storage does not match dtype " +
                      dtype_name(dtype));
  for (int d : dims)
    if (d <= 0) throw SchemaError("stream '" + name + "': non-positive dim");
  const std::int64_t want = static_cast<std::int64_t>(t) * shape_numel(dims);
  if (value_count() != want)
    throw SchemaError("stream '" + name + "': " + std::to_string(value_count()) +
                      " values, expected " + std::to_string(want));
}

const StreamData* MasterEpisode::find(const std::string& name) const {
  for (const StreamData& s : streams)
    if (s.name == name) return &s;
  return nullptr;
}

void append_stream_block(std::string& out, const StreamData& s) {
  s.check_consistent();
  if (s.name.size() > 0xffff) throw SchemaError("stream name too long");
  if (s.dims.size() > 0xff) throw SchemaError("stream rank too large");
  put_u16(out, static_cast<std::uint16_t>(s.name.size()));
  out.append(s.name);
  out.push_back(static_cast<char>(s.dtype));
  out.push_back(static_cast<char>(s.dims.size()));
  for (int d : s.dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, s.t);
  std::visit(
      [&out](const auto& v) {
        put_raw(out, v.data(), v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type));
      },
      s.values);
}

std::uint8_t Cursor::u8() {
  if (off + 1 > buf.size()) fail("unexpected end of file");
  return static_cast<std::uint8_t>(buf[off++]);
}

std::uint16_t Cursor::u16() {
  if (off + 2 > buf.size()) fail("unexpected end of file");
  std::uint16_t v = static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[off])) |
                    static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[off + 1]) << 8);
  off += 2;
  return v;
}

std::uint32_t Cursor::u32() {
  if (off + 4 > buf.size()) fail("unexpected end of file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[off + static_cast<std::size_t>(i)])) << (8 * i);
  off += 4;
  return v;
}

void Cursor::bytes(void* dst, std::size_t n) {
  if (off + n > buf.size()) fail("unexpected end of file");
  std::memcpy(dst, buf.data() + off, n);
  off += n;
}

void Cursor::fail(const std::string& what) const {
  throw FormatError(context + what + " at byte " + std::to_string(off));
}

StreamData read_stream_block(Cursor& c) {
  StreamData s;
  const std::uint16_t name_len = c.u16();
  s.name.resize(name_len);
  if (name_len) c.bytes(s.name.data(), name_len);
  const std::uint8_t dtype_code = c.u8();
  if (dtype_code > 2) c.fail("bad dtype code " + std::to_string(dtype_code));
  s.dtype = static_cast<Dtype>(dtype_code);
  const std::uint8_t rank = c.u8();
  s.dims.resize(rank);
  for (int i = 0; i < rank; ++i) {
    const std::uint32_t d = c.u32();
    if (d == 0 || d > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
      c.fail("bad dim " + std::to_string(d));
    s.dims[static_cast<std::size_t>(i)] = static_cast<int>(d);
  }
  s.t = c.u32();
  const std::int64_t count = static_cast<std::int64_t>(s.t) * shape_numel(s.dims);
  if (count > kMaxValuesPerStream) c.fail("stream '" + s.name + "' too large");
  switch (s.dtype) {
    case Dtype::kU8: {
      std::vector<std::uint8_t> v(static_cast<std::size_t>(count));
      if (count) c.bytes(v.data(), v.size());
      s.values = std::move(v);
      break;
    }
    case Dtype::kF32: {
      std::vector<float> v(static_cast<std::size_t>(count));
      if (count) c.bytes(v.data(), v.size() * 4);
      s.values = std::move(v);
      break;
    }
    case Dtype::kF64: {
      std::vector<double> v(static_cast<std::size_t>(count));
      if (count) c.bytes(v.data(), v.size() * 8);
      s.values = std::move(v);
      break;
    }
  }
  return s;
}

std::string episode_filename(std::int64_t episode_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep_%05lld.uafd", static_cast<long long>(episode_id));
  return buf;
}

void check_episode_schema(const Manifest& manifest, const MasterEpisode& episode) {
  if (episode.streams.size() != manifest.streams.size())
    throw SchemaError("episode has " + std::to_string(episode.streams.size()) +
                      " streams, manifest lists " + std::to_string(manifest.streams.size()));
  std::uint32_t t0 = 0;
  for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
    const StreamDescriptor& d = manifest.streams[i];
    const StreamData& s = episode.streams[i];
    s.check_consistent();
    if (s.name != d.name)
      throw SchemaError("stream " + std::to_string(i) + " is '" + s.name + "', manifest says '" +
                        d.name + "'");
    if (s.dtype != d.dtype)
      throw SchemaError("stream '" + s.name + "' dtype " + dtype_name(s.dtype) +
                        " != manifest " + dtype_name(d.dtype));
    if (s.dims != d.frame_shape)
      throw SchemaError("stream '" + s.name + "' frame shape mismatch");
    if (i == 0) {
      t0 = s.t;
    } else if (s.t != t0) {
      throw ValidationError("synchronization: stream '" + s.name + "' has " +
                            std::to_string(s.t) + " frames, '" + manifest.streams[0].name +
                            "' has " + std::to_string(t0));
    }
  }
  if (t0 < 2) throw ValidationError("episode must have at least 2 frames, got " +
                                    std::to_string(t0));
}

namespace {

void check_timestamps_monotone(const Manifest& manifest, const MasterEpisode& episode) {
  for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
    if (manifest.streams[i].kind != StreamKind::kTimestamp) continue;
    const auto& ts = std::get<std::vector<double>>(episode.streams[i].values);
    for (std::size_t f = 1; f < ts.size(); ++f)
      if (!(ts[f] > ts[f - 1]))
        throw ValidationError("timestamps not strictly increasing at frame " +
                              std::to_string(f));
  }
}

}  // namespace

std::string encode_episode(const Manifest& manifest, const MasterEpisode& episode) {
  check_episode_schema(manifest, episode);
  check_timestamps_monotone(manifest, episode);
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(episode.streams.size()));
  for (const StreamData& s : episode.streams) append_stream_block(out, s);
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f.good()) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Manifest read_manifest(const std::filesystem::path& dataset_dir) {
  const std::filesystem::path path = dataset_dir / "manifest.json";
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("no manifest at " + path.string());
  ordered_json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    static const std::set<std::string> top_keys = {"format_version", "dataset_name", "fps",
                                                   "streams", "episode_count"};
    for (const auto& [key, _] : j.items())
      if (!top_keys.count(key)) throw SchemaError("manifest: unknown key '" + key + "'");
    m.format_version = j.at("format_version").get<int>();
    m.dataset_name = j.at("dataset_name").get<std::string>();
    m.fps = j.at("fps").get<double>();
    m.episode_count = j.at("episode_count").get<std::int64_t>();
    static const std::set<std::string> stream_keys = {"name", "kind", "shape", "dtype", "units"};
    for (const auto& sj : j.at("streams")) {
      for (const auto& [key, _] : sj.items())
        if (!stream_keys.count(key))
          throw SchemaError("manifest stream: unknown key '" + key + "'");
      StreamDescriptor d;
      d.name = sj.at("name").get<std::string>();
      d.kind = kind_from_name(sj.at("kind").get<std::string>());
      for (const auto& dim : sj.at("shape")) d.frame_shape.push_back(dim.get<int>());
      d.dtype = dtype_from_name(sj.at("dtype").get<std::string>());
      d.units = sj.at("units").get<std::string>();
      m.streams.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& dataset_dir, const Manifest& manifest) {
  manifest.validate();
  ordered_json j;
  j["format_version"] = manifest.format_version;
  j["dataset_name"] = manifest.dataset_name;
  j["fps"] = manifest.fps;
  j["streams"] = ordered_json::array();
  for (const StreamDescriptor& d : manifest.streams) {
    ordered_json sj;
    sj["name"] = d.name;
    sj["kind"] = kind_name(d.kind);
    sj["shape"] = d.frame_shape;
    sj["dtype"] = dtype_name(d.dtype);
    sj["units"] = d.units;
    j["streams"].push_back(std::move(sj));
  }
  j["episode_count"] = manifest.episode_count;
  write_file_atomic(dataset_dir / "manifest.json", j.dump(2) + "\n");
}

std::int64_t write_episode(const std::filesystem::path& dataset_dir, Manifest& manifest,
                           const MasterEpisode& episode) {
  manifest.validate();
  const std::string bytes = encode_episode(manifest, episode);
  const std::int64_t id = manifest.episode_count;
  std::filesystem::create_directories(dataset_dir);
  write_file_atomic(dataset_dir / episode_filename(id), bytes);
  manifest.episode_count = id + 1;
  write_manifest(dataset_dir, manifest);
  return id;
}

MasterEpisode read_episode_raw(const std::filesystem::path& dataset_dir,
                               std::int64_t episode_id) {
  const std::string fname = episode_filename(episode_id);
  const std::filesystem::path path = dataset_dir / fname;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("episode " + std::to_string(episode_id) + " not found: " +
                              path.string());
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Cursor c{buf, 0, fname + ": "};
  char magic[4];
  c.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    c.off = 0;
    c.fail("bad magic");
  }
  const std::uint32_t n_streams = c.u32();
  if (n_streams > kMaxStreams) c.fail("implausible stream count " + std::to_string(n_streams));
  MasterEpisode ep;
  ep.episode_id = episode_id;
  ep.streams.reserve(n_streams);
  for (std::uint32_t i = 0; i < n_streams; ++i) ep.streams.push_back(read_stream_block(c));
  if (!c.done()) c.fail("trailing bytes");
  return ep;
}

MasterEpisode read_episode(const std::filesystem::path& dataset_dir, std::int64_t episode_id,
                           const Manifest& manifest) {
  MasterEpisode ep = read_episode_raw(dataset_dir, episode_id);
  check_episode_schema(manifest, ep);
  return ep;
}

ValidationReport validate_sync(const std::filesystem::path& dataset_dir) {
  const Manifest manifest = read_manifest(dataset_dir);
  ValidationReport report;
  for (std::int64_t id = 0; id < manifest.episode_count; ++id) {
    ++report.episodes_checked;
    MasterEpisode ep;
    try {
      ep = read_episode_raw(dataset_dir, id);
    } catch (const std::exception& e) {
      report.issues.push_back({id, -1, e.what()});
      report.frame_counts.push_back(-1);
      continue;
    }
    report.frame_counts.push_back(ep.streams.empty() ? 0
                                                     : static_cast<std::int64_t>(ep.streams[0].t));
    try {
      check_episode_schema(manifest, ep);
    } catch (const std::exception& e) {
      report.issues.push_back({id, -1, e.what()});
      continue;
    }
    for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
      if (manifest.streams[i].kind != StreamKind::kTimestamp) continue;
      const auto& ts = std::get<std::vector<double>>(ep.streams[i].values);
      for (std::size_t f = 1; f < ts.size(); ++f)
        if (!(ts[f] > ts[f - 1]))
          report.issues.push_back(
              {id, static_cast<int>(f), "timestamps not strictly increasing"});
    }
  }
  report.ok = report.issues.empty();
  return report;
}

DatasetStats dataset_stats(const std::filesystem::path& dataset_dir) {
  const ValidationReport vr = validate_sync(dataset_dir);
  if (!vr.ok) throw ValidationError("dataset invalid: " + issue_str(vr.issues.front()));
  const Manifest manifest = read_manifest(dataset_dir);
  DatasetStats stats;
  stats.episodes = manifest.episode_count;
  for (const StreamDescriptor& d : manifest.streams) stats.stream_payload_bytes[d.name] = 0;
  for (std::int64_t id = 0; id < manifest.episode_count; ++id) {
    const MasterEpisode ep = read_episode(dataset_dir, id, manifest);
    stats.frames += ep.streams[0].t;
    for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
      const StreamData& s = ep.streams[i];
      stats.stream_payload_bytes[s.name] += s.payload_bytes();
      if (manifest.streams[i].kind == StreamKind::kTimestamp) {
        const auto& ts = std::get<std::vector<double>>(s.values);
        stats.duration_seconds += ts.back() - ts.front();
      }
    }
  }
  stats.data_limited = stats.episodes <= 250;
  return stats;
}

}  // namespace actbench
