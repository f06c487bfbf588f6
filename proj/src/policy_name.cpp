#include "actbench/policy_name.hpp"

#include <algorithm>
#include <tuple>

namespace actbench {

namespace {

char camera_letter(CameraKind k) {
  switch (k) {
    case CameraKind::kStatic: return 'S';
    case CameraKind::kWrist: return 'W';
    case CameraKind::kActive: return 'A';
  }
  return '?';
}

char proprio_letter(ProprioKind k) {
  switch (k) {
    case ProprioKind::kPressure: return 'P';
    case ProprioKind::kVelocity: return 'V';
    case ProprioKind::kTorque: return 'T';
  }
  return '?';
}

}  // namespace

PolicyName parse_policy_name(const std::string& text) {
  if (text.empty()) throw ParseError("empty policy name", 0);
  PolicyName out;
  std::size_t i = 0;

  while (i < text.size() && text[i] != '-') {
    const std::size_t tok = i;
    CameraSel sel;
    switch (text[i]) {
      case 'A': sel.kind = CameraKind::kActive; break;
      case 'S': sel.kind = CameraKind::kStatic; break;
      case 'W': sel.kind = CameraKind::kWrist; break;
      default:
        throw ParseError(std::string("unknown camera letter '") + text[i] + "'", i);
    }
    ++i;
    if (i < text.size() && text[i] == '_') {
      ++i;
      if (i >= text.size()) throw ParseError("dangling underscore", i);
      if (text[i] == 'L') sel.side = CameraSide::kLeft;
      else if (text[i] == 'R') sel.side = CameraSide::kRight;
      else throw ParseError(std::string("camera side must be 'L' or 'R', got '") + text[i] + "'", i);
      ++i;
    }
    if (std::find(out.cameras.begin(), out.cameras.end(), sel) != out.cameras.end())
      throw ParseError("duplicate camera token", tok);
    out.cameras.push_back(sel);
  }
  if (out.cameras.empty()) throw ParseError("empty camera part", i);

  if (i < text.size()) {
    ++i;  // consume '-'
    if (i >= text.size()) throw ParseError("empty proprio part", i);
    while (i < text.size()) {
      const std::size_t tok = i;
      ProprioSel sel;
      switch (text[i]) {
        case 'P': sel.kind = ProprioKind::kPressure; break;
        case 'V': sel.kind = ProprioKind::kVelocity; break;
        case 'T': sel.kind = ProprioKind::kTorque; break;
        default:
          throw ParseError(std::string("unknown proprio letter '") + text[i] + "'", i);
      }
      ++i;
      if (i < text.size() && text[i] == '_') {
        ++i;
        if (i >= text.size()) throw ParseError("dangling underscore", i);
        if (text[i] < 'A' || text[i] > 'Z')
          throw ParseError(std::string("group tag must be one uppercase letter, got '") +
                               text[i] + "'",
                           i);
        sel.tag = std::string(1, text[i]);
        ++i;
      }
      if (std::find(out.proprio.begin(), out.proprio.end(), sel) != out.proprio.end())
        throw ParseError("duplicate proprio token", tok);
      out.proprio.push_back(sel);
    }
  }
  return out;
}

PolicyName normalize_policy_name(PolicyName name) {
  std::sort(name.cameras.begin(), name.cameras.end(), [](const CameraSel& a, const CameraSel& b) {
    return std::tuple(static_cast<int>(a.kind), static_cast<int>(a.side)) <
           std::tuple(static_cast<int>(b.kind), static_cast<int>(b.side));
  });
  std::sort(name.proprio.begin(), name.proprio.end(),
            [](const ProprioSel& a, const ProprioSel& b) {
              return std::tuple(static_cast<int>(a.kind), a.tag) <
                     std::tuple(static_cast<int>(b.kind), b.tag);
            });
  return name;
}

std::string format_policy_name(const PolicyName& name) {
  const PolicyName n = normalize_policy_name(name);
  std::string out;
  for (const CameraSel& c : n.cameras) {
    out.push_back(camera_letter(c.kind));
    if (c.side == CameraSide::kLeft) out += "_L";
    else if (c.side == CameraSide::kRight) out += "_R";
  }
  if (!n.proprio.empty()) {
    out.push_back('-');
    for (const ProprioSel& p : n.proprio) {
      out.push_back(proprio_letter(p.kind));
      if (!p.tag.empty()) out += "_" + p.tag;
    }
  }
  return out;
}

}  // namespace actbench
