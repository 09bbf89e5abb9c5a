// SPDX-License-Identifier: Apache-2.0
//
// Gesture windows and the two-channel gesture state matrix.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gestura/landmarks.hpp"
#include "gestura/rules.hpp"

namespace gestura {

inline constexpr double kSampleInterval = 0.2;

/// Chest-level trigger. `chest_line` is a normalized image y (y grows
/// downward), so a hand is "raised" when its center y <= chest_line.
struct SegmentationConfig {
  double chest_line = 0.55;
  int trigger_frames = 2;
  double end_hold = 0.6;  // seconds below the line that close a window

  void validate() const;
};

void to_json(nlohmann::json& j, const SegmentationConfig& cfg);
void from_json(const nlohmann::json& j, SegmentationConfig& cfg);

struct GestureWindow {
  double start_time = 0.0;
  double end_time = 0.0;
  std::vector<HandLandmarkFrame> frames;

  double duration() const { return end_time - start_time; }
};

bool is_raised(const HandLandmarkFrame& frame, const SegmentationConfig& cfg);

/// Non-overlapping windows in time order. A window opens at the first of
/// `trigger_frames` consecutive raised frames and ends at the last raised
/// frame before the hand stays below the line for `end_hold` seconds (or
/// the stream ends). Throws Error{LeftHandUnsupported} / Error{EmptyStream}.
std::vector<GestureWindow> detect_gesture_windows(const LandmarkStream& stream,
                                                  const SegmentationConfig& cfg = {});

/// Number of samples for a window of the given duration: floor(d / 0.2) + 1.
std::size_t sample_count(double duration);

/// Nearest frame (ties to the earlier one) for each instant start + 0.2 k.
std::vector<HandLandmarkFrame> sample_window(const GestureWindow& window);

struct GestureStateMatrix {
  /// One 19-entry pose vector per column.
  std::vector<FramePoseVector> channel1;
  /// Hand center per column: horizontal (0 left .. 1 right), vertical
  /// (0 bottom .. 1 top), depth (raw z) when `has_depth`.
  std::vector<Vec3> channel2;
  bool has_depth = true;
  double hand_width = 0.0;
  double sample_interval = kSampleInterval;

  std::size_t columns() const { return channel1.size(); }
  std::size_t movement_rows() const { return has_depth ? 3 : 2; }

  /// Throws Error{InvalidArgument} when an invariant does not hold.
  void validate() const;

  friend bool operator==(const GestureStateMatrix&, const GestureStateMatrix&) = default;
};

GestureStateMatrix build_state_matrix(const std::vector<HandLandmarkFrame>& samples,
                                      const RuleThresholds& th, Diagnostics* diag = nullptr);

/// Convenience: detect, sample and build one matrix per window.
std::vector<GestureStateMatrix> encode_stream(const LandmarkStream& stream,
                                              const RuleThresholds& th,
                                              const SegmentationConfig& cfg = {});

/// Version tag written into both renderings.
inline constexpr int kMatrixFormatVersion = 1;

/// Deterministic prompt rendering (integer pose rows, 3-decimal movement rows).
std::string serialize_matrix(const GestureStateMatrix& m);

/// Pose rows only (the part sent with the pose-description prompt).
std::string serialize_pose_channel(const GestureStateMatrix& m);

/// Movement rows for columns [first, last] plus hand width.
std::string serialize_movement_channel(const GestureStateMatrix& m, std::size_t first,
                                       std::size_t last);

/// Parses serialize_matrix output. Movement values are read back at the
/// printed 3-decimal precision.
GestureStateMatrix parse_matrix_text(std::string_view text);

/// {"version","T","interval","hand_width","channel1":[19 rows],"channel2":[2|3 rows]}
nlohmann::json matrix_to_json(const GestureStateMatrix& m);
GestureStateMatrix matrix_from_json(const nlohmann::json& j);

}  // namespace gestura
