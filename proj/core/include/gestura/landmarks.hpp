// SPDX-License-Identifier: Apache-2.0
//
// Hand-landmark streams in the 21-point MediaPipe layout.
//
// Coordinates follow the normalized image convention: x grows to the right,
// y grows downward, and z is relative depth with more negative values closer
// to the camera. Producers working in other spaces must normalize first.
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/geometry.hpp"

namespace gestura {

using Landmark = Vec3;

inline constexpr std::size_t kLandmarkCount = 21;

/// x and y outside this range are treated as corrupt detector output.
inline constexpr double kCoordinateMin = -0.5;
inline constexpr double kCoordinateMax = 1.5;

enum class Handedness { Right, Left };
enum class SourceView { FirstPerson, ThirdPerson };

enum class Finger { Thumb = 0, Index = 1, Middle = 2, Ring = 3, Pinky = 4 };

inline constexpr std::array<Finger, 5> kAllFingers = {Finger::Thumb, Finger::Index, Finger::Middle,
                                                      Finger::Ring, Finger::Pinky};

/// Canonical landmark indices.
namespace lm {
inline constexpr std::size_t kWrist = 0;
inline constexpr std::size_t kThumbCmc = 1;
inline constexpr std::size_t kThumbMcp = 2;
inline constexpr std::size_t kThumbIp = 3;
inline constexpr std::size_t kThumbTip = 4;
inline constexpr std::size_t kIndexMcp = 5;
inline constexpr std::size_t kMiddleMcp = 9;
inline constexpr std::size_t kRingMcp = 13;
inline constexpr std::size_t kPinkyMcp = 17;
}  // namespace lm

/// Joint indices of a finger. For the thumb, `pip` is the IP joint and `mcp`
/// the thumb MCP; `dip` is unused (equals `pip`).
struct FingerJoints {
  std::size_t mcp;
  std::size_t pip;
  std::size_t dip;
  std::size_t tip;
};

constexpr FingerJoints joints_of(Finger f) {
  if (f == Finger::Thumb) return {lm::kThumbMcp, lm::kThumbIp, lm::kThumbIp, lm::kThumbTip};
  const auto base = static_cast<std::size_t>(f) * 4 + 1;
  return {base, base + 1, base + 2, base + 3};
}

std::string_view finger_name(Finger f);

/// Index of a canonical landmark name such as "WRIST" or "INDEX_FINGER_TIP".
/// Throws Error{UnknownLandmarkName}.
std::size_t landmark_index(std::string_view name);

/// Inverse of landmark_index. Throws Error{InvalidArgument} for index > 20.
std::string_view landmark_name(std::size_t index);

struct HandLandmarkFrame {
  double timestamp = 0.0;
  Handedness handedness = Handedness::Right;
  std::array<Landmark, kLandmarkCount> landmarks{};
  /// False when the producer supplied 2D points only (z substituted with 0).
  bool has_depth = true;

  const Landmark& operator[](std::size_t i) const { return landmarks[i]; }
  Landmark& operator[](std::size_t i) { return landmarks[i]; }

  friend bool operator==(const HandLandmarkFrame&, const HandLandmarkFrame&) = default;
};

struct LandmarkStream {
  SourceView source_view = SourceView::ThirdPerson;
  Handedness handedness = Handedness::Right;
  std::vector<HandLandmarkFrame> frames;

  friend bool operator==(const LandmarkStream&, const LandmarkStream&) = default;
};

/// Parses the JSON stream format:
///   {"source_view":"third_person","handedness":"right",
///    "frames":[{"t":0.0,"lm":[[x,y,z], ... 21 entries]}, ...]}
/// Each landmark may also be given as [x,y]; the frame is then 2D.
/// Throws Error with MalformedInput, BadLandmarkCount or NonMonotonicTimestamps.
LandmarkStream parse_landmark_stream(std::string_view raw);

std::string serialize_landmark_stream(const LandmarkStream& stream);

/// Checks the per-frame invariants; throws the same errors as the parser.
void validate_frame(const HandLandmarkFrame& frame);

std::string_view to_string(Handedness h);
std::string_view to_string(SourceView v);

}  // namespace gestura
