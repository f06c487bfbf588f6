#pragma once

#include "actbench/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace actbench {

// Episode container format.
//
// A dataset directory holds `manifest.json` plus one `ep_{id:05}.uafd` file
// per episode. Episode files are little-endian throughout:
//
//   magic "UAF1" | u32 stream_count | stream blocks in manifest order
//
// and each stream block is
//
//   u16 name_len | name bytes | u8 dtype (0=u8, 1=f32, 2=f64) | u8 rank |
//   u32 dims[rank] | u32 frame_count T | T * prod(dims) packed values
//
// The same block layout carries named parameter tensors in checkpoint files.

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Dtype : std::uint8_t { kU8 = 0, kF32 = 1, kF64 = 2 };

std::size_t dtype_size(Dtype d);
const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& s);

enum class StreamKind { kCamera, kProprio, kAction, kTimestamp };

const char* kind_name(StreamKind k);
StreamKind kind_from_name(const std::string& s);

struct StreamDescriptor {
  std::string name;
  StreamKind kind = StreamKind::kProprio;
  Shape frame_shape;  // per-frame; empty for rank-0 timestamp
  Dtype dtype = Dtype::kF32;
  std::string units;

  std::int64_t frame_elems() const { return shape_numel(frame_shape); }
};

struct Manifest {
  int format_version = 1;
  std::string dataset_name;
  double fps = 30.0;
  std::vector<StreamDescriptor> streams;
  std::int64_t episode_count = 0;

  int index_of(const std::string& name) const;  // -1 when absent
  const StreamDescriptor& stream(const std::string& name) const;
  // Unique names, fps > 0, exactly one timestamp and one action stream,
  // camera (H,W,3) u8, proprio/action rank-1 f32, timestamp rank-0 f64.
  void validate() const;
};

using StreamValues =
    std::variant<std::vector<std::uint8_t>, std::vector<float>, std::vector<double>>;

struct StreamData {
  std::string name;
  Dtype dtype = Dtype::kF32;
  Shape dims;  // per-frame shape
  std::uint32_t t = 0;
  StreamValues values;

  std::int64_t value_count() const;
  std::int64_t payload_bytes() const { return value_count() * static_cast<std::int64_t>(dtype_size(dtype)); }
  // values length must be t * prod(dims) and variant member must match dtype
  void check_consistent() const;

  bool operator==(const StreamData&) const = default;
};

struct MasterEpisode {
  std::int64_t episode_id = -1;
  std::vector<StreamData> streams;  // manifest order

  const StreamData* find(const std::string& name) const;
  bool operator==(const MasterEpisode&) const = default;
};

// low-level block codec (shared with checkpoints)
void append_stream_block(std::string& out, const StreamData& s);

struct Cursor {
  const std::string& buf;
  std::size_t off = 0;
  std::string context;  // prefixed to error messages

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  void bytes(void* dst, std::size_t n);
  bool done() const { return off == buf.size(); }
  [[noreturn]] void fail(const std::string& what) const;
};

StreamData read_stream_block(Cursor& c);

std::string episode_filename(std::int64_t episode_id);

// Stream roster, dtypes, frame shapes, and equal per-stream frame counts
// (T >= 2). Throws SchemaError / ValidationError.
void check_episode_schema(const Manifest& manifest, const MasterEpisode& episode);

std::string encode_episode(const Manifest& manifest, const MasterEpisode& episode);

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

Manifest read_manifest(const std::filesystem::path& dataset_dir);
void write_manifest(const std::filesystem::path& dataset_dir, const Manifest& manifest);

// Validates the episode against the manifest (schema, equal T >= 2, strictly
// increasing timestamps), persists it, and bumps manifest.episode_count both
// in memory and on disk. Returns the assigned episode id.
std::int64_t write_episode(const std::filesystem::path& dataset_dir, Manifest& manifest,
                           const MasterEpisode& episode);

// Structural decode only: magic, version, block framing, no trailing bytes.
// Cross-stream synchronization is validate_sync's job.
MasterEpisode read_episode_raw(const std::filesystem::path& dataset_dir,
                               std::int64_t episode_id);

// read_episode_raw plus strict checks against the manifest (stream roster,
// dtypes, dims, equal frame counts).
MasterEpisode read_episode(const std::filesystem::path& dataset_dir, std::int64_t episode_id,
                           const Manifest& manifest);

struct ValidationIssue {
  std::int64_t episode_id = -1;
  int frame = -1;  // -1 when not frame-specific
  std::string what;
};

struct ValidationReport {
  bool ok = false;
  std::int64_t episodes_checked = 0;
  std::vector<std::int64_t> frame_counts;  // per episode; -1 for unreadable
  std::vector<ValidationIssue> issues;
};

ValidationReport validate_sync(const std::filesystem::path& dataset_dir);

struct DatasetStats {
  std::int64_t episodes = 0;
  std::int64_t frames = 0;
  double duration_seconds = 0.0;
  std::map<std::string, std::int64_t> stream_payload_bytes;
  bool data_limited = false;  // episodes <= 250
};

DatasetStats dataset_stats(const std::filesystem::path& dataset_dir);

}  // namespace actbench
