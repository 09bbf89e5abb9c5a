// SPDX-License-Identifier: Apache-2.0
//
// The six geometric hand rules and the 19-entry per-frame pose vector.
//
// Every rule answers with a three-way verdict: a definite positive, a
// definite negative, or Unsure when the measurement falls strictly inside the
// band between its two thresholds. Degenerate geometry (coincident joints)
// also yields Unsure/Unknown.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gestura/landmarks.hpp"

namespace gestura {

enum class ThreeWay : std::int8_t { Negative = -1, Unsure = 0, Positive = 1 };
enum class ThumbDirection : std::int8_t { Down = -1, Unsure = 0, Up = 1 };

/// Order matches the one-hot layout of pose rows 14-19.
enum class PalmOrientation : std::int8_t { Left, Right, Down, Up, Inward, Outward, Unknown };

enum class FingerPair { IndexMiddle = 0, MiddleRing = 1, RingPinky = 2 };

inline constexpr std::array<FingerPair, 3> kAllFingerPairs = {
    FingerPair::IndexMiddle, FingerPair::MiddleRing, FingerPair::RingPinky};

std::pair<Finger, Finger> fingers_of(FingerPair pair);
std::string_view to_string(FingerPair pair);
std::string_view to_string(PalmOrientation p);

/// Which coordinates the proximity and contact distances use.
enum class DistanceMode { XY, XYZ };

struct ThresholdPair {
  double low = 0.0;
  double high = 0.0;

  friend bool operator==(const ThresholdPair&, const ThresholdPair&) = default;
};

/// Defaults are the values tuned on the third-person HaGRID subsample.
struct RuleThresholds {
  ThresholdPair flexion_thumb{16.0, 38.0};     // degrees
  ThresholdPair flexion_finger{57.0, 74.0};    // degrees
  ThresholdPair proximity{0.024, 0.029};       // normalized units
  ThresholdPair contact{0.046, 0.055};         // normalized units
  double thumb_dir_angle_threshold = 40.0;     // degrees
  double palm_angle_threshold = 41.0;          // degrees
  DistanceMode distance_mode = DistanceMode::XY;

  /// Throws Error{InvalidArgument} unless every value is > 0 and low < high.
  void validate() const;

  friend bool operator==(const RuleThresholds&, const RuleThresholds&) = default;
};

void to_json(nlohmann::json& j, const RuleThresholds& th);
void from_json(const nlohmann::json& j, RuleThresholds& th);

RuleThresholds parse_thresholds(std::string_view raw);
std::string serialize_thresholds(const RuleThresholds& th);

/// Collects non-fatal notes such as degenerate geometry.
struct Diagnostics {
  std::vector<std::string> warnings;
};

/// Classification against a pair: value <= low -> Positive, value >= high -> Negative.
ThreeWay classify(double value, ThresholdPair th);

// Raw measurements. nullopt marks degenerate geometry.

/// Total bending angle in degrees (IP for the thumb, PIP + DIP otherwise).
std::optional<double> flexion_curl(const HandLandmarkFrame& frame, Finger finger);

/// Mean of the three joint-level minimal distances between two adjacent fingers.
std::optional<double> proximity_distance(const HandLandmarkFrame& frame, FingerPair pair,
                                         DistanceMode mode);

/// Thumb tip to fingertip distance. `finger` must not be the thumb.
double contact_distance(const HandLandmarkFrame& frame, Finger finger, DistanceMode mode);

struct DirectionMatch {
  double angle_deg = 0.0;
  int reference = 0;  // index into the rule's reference list
};

/// Closest of {down, up} to the thumb MCP->TIP vector.
std::optional<DirectionMatch> thumb_direction_match(const HandLandmarkFrame& frame);

/// Palm normal for the frame's handedness, or nullopt when degenerate.
std::optional<Vec3> palm_normal(const HandLandmarkFrame& frame);

/// Closest palm reference; `reference` is a PalmOrientation value.
std::optional<DirectionMatch> palm_direction_match(const HandLandmarkFrame& frame);

// Verdicts.

ThreeWay flexion(const HandLandmarkFrame& frame, Finger finger, const RuleThresholds& th,
                 Diagnostics* diag = nullptr);
ThreeWay proximity(const HandLandmarkFrame& frame, FingerPair pair, const RuleThresholds& th,
                   Diagnostics* diag = nullptr);
ThreeWay contact(const HandLandmarkFrame& frame, Finger finger, const RuleThresholds& th,
                 Diagnostics* diag = nullptr);
ThumbDirection thumb_pointing(const HandLandmarkFrame& frame, ThreeWay thumb_flexion,
                              const RuleThresholds& th, Diagnostics* diag = nullptr);
PalmOrientation palm_orientation(const HandLandmarkFrame& frame, const RuleThresholds& th,
                                 Diagnostics* diag = nullptr);

struct HandCenter {
  Vec3 center;
  /// Image-plane distance between index MCP and pinky MCP.
  double hand_width = 0.0;
};

HandCenter hand_center(const HandLandmarkFrame& frame);

inline constexpr std::size_t kPoseRows = 19;

/// Rows 1-5 flexion (thumb..pinky), 6-8 proximity, 9-12 thumb contact
/// (index..pinky), 13 thumb direction, 14-19 palm one-hot
/// [left,right,down,up,inward,outward]. Stored zero-based.
using FramePoseVector = std::array<std::int8_t, kPoseRows>;

FramePoseVector encode_pose_vector(const HandLandmarkFrame& frame, const RuleThresholds& th,
                                   Diagnostics* diag = nullptr);

/// True when the vector satisfies the value-range and one-hot invariants.
bool is_valid_pose_vector(const FramePoseVector& v);

/// Row labels used by text renderings, zero-based.
std::string_view pose_row_label(std::size_t row);

}  // namespace gestura
