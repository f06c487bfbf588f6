#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace actbench {

struct ParseError : std::runtime_error {
  std::size_t position;
  ParseError(const std::string& what, std::size_t pos)
      : std::runtime_error(what + " at byte " + std::to_string(pos)), position(pos) {}
};

// Enumerator order is the canonical print order.
enum class CameraKind { kStatic, kWrist, kActive };
enum class CameraSide { kBoth, kLeft, kRight };
enum class ProprioKind { kPressure, kVelocity, kTorque };

struct CameraSel {
  CameraKind kind = CameraKind::kActive;
  CameraSide side = CameraSide::kBoth;
  bool operator==(const CameraSel&) const = default;
};

struct ProprioSel {
  ProprioKind kind = ProprioKind::kPressure;
  std::string tag;  // empty = all channels; otherwise one uppercase letter
  bool operator==(const ProprioSel&) const = default;
};

struct PolicyName {
  std::vector<CameraSel> cameras;
  std::vector<ProprioSel> proprio;
  bool operator==(const PolicyName&) const = default;
};

// Grammar:
//   name    := cameras ['-' proprio]
//   cameras := camtok+     camtok  := ('A'|'S'|'W') ['_' ('L'|'R')]
//   proprio := proptok+    proptok := ('P'|'V'|'T') ['_' tag]
// where tag is one uppercase letter. Tokenization is greedy left-to-right and
// an underscore suffix binds to the immediately preceding letter. Duplicate
// (kind, side) or (kind, tag) tokens are rejected.
PolicyName parse_policy_name(const std::string& text);

// Canonical order: cameras S, W, A (Both < Left < Right within a kind);
// proprio P, V, T (untagged first, then tags alphabetically).
PolicyName normalize_policy_name(PolicyName name);

// Prints the normalized form; parse(format(n)) == normalize(n).
std::string format_policy_name(const PolicyName& name);

}  // namespace actbench
