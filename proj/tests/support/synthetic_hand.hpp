// SPDX-License-Identifier: Apache-2.0
//
// Synthetic 21-landmark hands with prescribed joint angles, and landmark
// streams with a chest-level raise.
#pragma once

#include <array>
#include <random>
#include <vector>

#include "gestura/landmarks.hpp"

namespace gestura::testing {

/// Joint bends in degrees. For fingers: MCP, PIP, DIP. For the thumb: MCP, IP
/// (the third entry is unused).
struct HandPose {
  std::array<std::array<double, 3>, 5> bend{};
  double splay_deg = 8.0;         // angle between neighbouring finger directions
  double thumb_abduct_deg = 40.0; // thumb direction away from the index side
  double yaw_deg = 0.0;           // rotation about the image vertical axis
  double pitch_deg = 0.0;         // rotation about the image horizontal axis
  double roll_deg = 0.0;          // rotation in the image plane
  double size = 0.25;             // wrist to middle fingertip, roughly
  Vec3 center{0.5, 0.5, 0.0};     // target landmark mean
};

/// Flat open hand facing the camera.
HandPose open_hand();
/// All fingers curled, thumb folded.
HandPose fist();

HandLandmarkFrame make_hand(const HandPose& pose, Handedness hand = Handedness::Right, double t = 0.0,
                            bool has_depth = true);

struct RandomHandOptions {
  /// Fraction of frames with 21 independent random points instead of an
  /// articulated hand.
  double chaos_fraction = 0.25;
  bool allow_left = true;
  bool allow_2d = true;
};

HandLandmarkFrame random_hand(std::mt19937_64& rng, const RandomHandOptions& opt = {});

/// One keyframe of a stream: hand pose and the target mean position.
struct StreamKey {
  int t_ms = 0;
  HandPose pose;
};

/// Frames every `step_ms` from the first to the last key, pose angles and
/// position linearly interpolated between keys.
LandmarkStream make_stream(const std::vector<StreamKey>& keys, int step_ms = 33,
                           Handedness hand = Handedness::Right, bool has_depth = true);

/// Random stream with integer-millisecond timestamps and zero or more raises.
LandmarkStream random_stream(std::mt19937_64& rng);

}  // namespace gestura::testing
