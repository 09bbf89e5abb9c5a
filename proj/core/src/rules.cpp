// SPDX-License-Identifier: Apache-2.0
#include "gestura/rules.hpp"

#include <nlohmann/json.hpp>

#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr Vec3 kUp{0.0, -1.0, 0.0};
constexpr Vec3 kDown{0.0, 1.0, 0.0};

struct PalmReference {
  PalmOrientation orientation;
  Vec3 direction;
};

// Scan order decides ties.
constexpr std::array<PalmReference, 6> kPalmReferences = {{
    {PalmOrientation::Right, {1.0, 0.0, 0.0}},
    {PalmOrientation::Left, {-1.0, 0.0, 0.0}},
    {PalmOrientation::Down, {0.0, 1.0, 0.0}},
    {PalmOrientation::Up, {0.0, -1.0, 0.0}},
    {PalmOrientation::Outward, {0.0, 0.0, -1.0}},
    {PalmOrientation::Inward, {0.0, 0.0, 1.0}},
}};

constexpr double kMinPalmNormal = 1e-9;

Vec3 project(Vec3 p, DistanceMode mode) { return mode == DistanceMode::XY ? flatten_xy(p) : p; }

void warn(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warnings.push_back(std::move(message));
}

void check_pair(const ThresholdPair& p, const char* name) {
  if (!(p.low > 0.0) || !(p.high > 0.0) || !(p.low < p.high)) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " thresholds must satisfy 0 < low < high");
  }
}

ThresholdPair pair_from_json(const json& j, const char* key) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 2) {
    throw Error(ErrorCode::MalformedInput, std::string(key) + " must be [low, high]");
  }
  return {arr[0].get<double>(), arr[1].get<double>()};
}

}  // namespace

std::pair<Finger, Finger> fingers_of(FingerPair pair) {
  switch (pair) {
    case FingerPair::IndexMiddle: return {Finger::Index, Finger::Middle};
    case FingerPair::MiddleRing: return {Finger::Middle, Finger::Ring};
    case FingerPair::RingPinky: return {Finger::Ring, Finger::Pinky};
  }
  return {Finger::Index, Finger::Middle};
}

std::string_view to_string(FingerPair pair) {
  switch (pair) {
    case FingerPair::IndexMiddle: return "index_middle";
    case FingerPair::MiddleRing: return "middle_ring";
    case FingerPair::RingPinky: return "ring_pinky";
  }
  return "?";
}

std::string_view to_string(PalmOrientation p) {
  switch (p) {
    case PalmOrientation::Left: return "left";
    case PalmOrientation::Right: return "right";
    case PalmOrientation::Down: return "down";
    case PalmOrientation::Up: return "up";
    case PalmOrientation::Inward: return "inward";
    case PalmOrientation::Outward: return "outward";
    case PalmOrientation::Unknown: return "unknown";
  }
  return "?";
}

void RuleThresholds::validate() const {
  check_pair(flexion_thumb, "flexion_thumb");
  check_pair(flexion_finger, "flexion_finger");
  check_pair(proximity, "proximity");
  check_pair(contact, "contact");
  if (!(thumb_dir_angle_threshold > 0.0) || !(palm_angle_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "angle thresholds must be > 0");
  }
}

void to_json(json& j, const RuleThresholds& th) {
  j = json{
      {"flexion_thumb", {th.flexion_thumb.low, th.flexion_thumb.high}},
      {"flexion_finger", {th.flexion_finger.low, th.flexion_finger.high}},
      {"proximity", {th.proximity.low, th.proximity.high}},
      {"contact", {th.contact.low, th.contact.high}},
      {"thumb_dir_angle_threshold", th.thumb_dir_angle_threshold},
      {"palm_angle_threshold", th.palm_angle_threshold},
      {"distance_mode", th.distance_mode == DistanceMode::XY ? "xy" : "xyz"},
  };
}

void from_json(const json& j, RuleThresholds& th) {
  RuleThresholds out;
  try {
    if (j.contains("flexion_thumb")) out.flexion_thumb = pair_from_json(j, "flexion_thumb");
    if (j.contains("flexion_finger")) out.flexion_finger = pair_from_json(j, "flexion_finger");
    if (j.contains("proximity")) out.proximity = pair_from_json(j, "proximity");
    if (j.contains("contact")) out.contact = pair_from_json(j, "contact");
    if (j.contains("thumb_dir_angle_threshold")) {
      out.thumb_dir_angle_threshold = j.at("thumb_dir_angle_threshold").get<double>();
    }
    if (j.contains("palm_angle_threshold")) {
      out.palm_angle_threshold = j.at("palm_angle_threshold").get<double>();
    }
    if (j.contains("distance_mode")) {
      const auto mode = j.at("distance_mode").get<std::string>();
      if (mode == "xy") {
        out.distance_mode = DistanceMode::XY;
      } else if (mode == "xyz") {
        out.distance_mode = DistanceMode::XYZ;
      } else {
        throw Error(ErrorCode::MalformedInput, "distance_mode must be 'xy' or 'xyz'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  out.validate();
  th = out;
}

RuleThresholds parse_thresholds(std::string_view raw) {
  try {
    return json::parse(raw).get<RuleThresholds>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
}

std::string serialize_thresholds(const RuleThresholds& th) { return json(th).dump(2) + "\n"; }

ThreeWay classify(double value, ThresholdPair th) {
  if (value <= th.low) return ThreeWay::Positive;
  if (value >= th.high) return ThreeWay::Negative;
  return ThreeWay::Unsure;
}

std::optional<double> flexion_curl(const HandLandmarkFrame& frame, Finger finger) {
  const auto j = joints_of(finger);
  if (finger == Finger::Thumb) {
    return angle_deg(frame[j.pip] - frame[j.mcp], frame[j.tip] - frame[j.pip]);
  }
  const auto a = angle_deg(frame[j.pip] - frame[j.mcp], frame[j.dip] - frame[j.pip]);
  const auto b = angle_deg(frame[j.dip] - frame[j.pip], frame[j.tip] - frame[j.dip]);
  if (!a || !b) return std::nullopt;
  return *a + *b;
}

std::optional<double> proximity_distance(const HandLandmarkFrame& frame, FingerPair pair,
                                         DistanceMode mode) {
  const auto [f1, f2] = fingers_of(pair);
  const auto j1 = joints_of(f1);
  const auto j2 = joints_of(f2);
  const std::array<Vec3, 3> line1 = {project(frame[j1.pip], mode), project(frame[j1.dip], mode),
                                     project(frame[j1.tip], mode)};
  const std::array<Vec3, 3> line2 = {project(frame[j2.pip], mode), project(frame[j2.dip], mode),
                                     project(frame[j2.tip], mode)};
  const auto length = [](const std::array<Vec3, 3>& l) {
    return distance(l[0], l[1]) + distance(l[1], l[2]);
  };
  if (length(line1) < kMinDirectionNorm || length(line2) < kMinDirectionNorm) return std::nullopt;

  double total = 0.0;
  for (std::size_t level = 0; level < 3; ++level) {
    const double d12 = point_polyline_distance(line1[level], line2);
    const double d21 = point_polyline_distance(line2[level], line1);
    total += std::min(d12, d21);
  }
  return total / 3.0;
}

double contact_distance(const HandLandmarkFrame& frame, Finger finger, DistanceMode mode) {
  if (finger == Finger::Thumb) {
    throw Error(ErrorCode::InvalidArgument, "contact is defined between the thumb and another finger");
  }
  return distance(project(frame[lm::kThumbTip], mode), project(frame[joints_of(finger).tip], mode));
}

std::optional<DirectionMatch> thumb_direction_match(const HandLandmarkFrame& frame) {
  const Vec3 v = frame[lm::kThumbTip] - frame[lm::kThumbMcp];
  const auto down = angle_deg(v, kDown);
  const auto up = angle_deg(v, kUp);
  if (!down || !up) return std::nullopt;
  // Scan order [down, up]; strict comparison keeps the first on ties.
  if (*up < *down) return DirectionMatch{*up, static_cast<int>(ThumbDirection::Up)};
  return DirectionMatch{*down, static_cast<int>(ThumbDirection::Down)};
}

std::optional<Vec3> palm_normal(const HandLandmarkFrame& frame) {
  const Vec3 v1 = frame[lm::kIndexMcp] - frame[lm::kPinkyMcp];
  const Vec3 v2 = frame[lm::kMiddleMcp] - frame[lm::kWrist];
  const Vec3 n = frame.handedness == Handedness::Right ? cross(v2, v1) : cross(v1, v2);
  if (!(norm(n) >= kMinPalmNormal)) return std::nullopt;
  return n;
}

std::optional<DirectionMatch> palm_direction_match(const HandLandmarkFrame& frame) {
  const auto n = palm_normal(frame);
  if (!n) return std::nullopt;
  std::optional<DirectionMatch> best;
  for (const auto& ref : kPalmReferences) {
    const auto a = angle_deg(*n, ref.direction, kMinPalmNormal);
    if (a && (!best || *a < best->angle_deg)) {
      best = DirectionMatch{*a, static_cast<int>(ref.orientation)};
    }
  }
  return best;
}

ThreeWay flexion(const HandLandmarkFrame& frame, Finger finger, const RuleThresholds& th,
                 Diagnostics* diag) {
  const auto curl = flexion_curl(frame, finger);
  if (!curl) {
    warn(diag, "degenerate geometry: zero-length bone in " + std::string(finger_name(finger)));
    return ThreeWay::Unsure;
  }
  return classify(*curl, finger == Finger::Thumb ? th.flexion_thumb : th.flexion_finger);
}

ThreeWay proximity(const HandLandmarkFrame& frame, FingerPair pair, const RuleThresholds& th,
                   Diagnostics* diag) {
  const auto d = proximity_distance(frame, pair, th.distance_mode);
  if (!d) {
    warn(diag, "degenerate geometry: collapsed finger in pair " + std::string(to_string(pair)));
    return ThreeWay::Unsure;
  }
  return classify(*d, th.proximity);
}

ThreeWay contact(const HandLandmarkFrame& frame, Finger finger, const RuleThresholds& th,
                 Diagnostics* diag) {
  const double d = contact_distance(frame, finger, th.distance_mode);
  if (!std::isfinite(d)) {
    warn(diag, "non-finite contact distance");
    return ThreeWay::Unsure;
  }
  return classify(d, th.contact);
}

ThumbDirection thumb_pointing(const HandLandmarkFrame& frame, ThreeWay thumb_flexion,
                              const RuleThresholds& th, Diagnostics* diag) {
  if (thumb_flexion != ThreeWay::Positive) return ThumbDirection::Unsure;
  const auto match = thumb_direction_match(frame);
  if (!match) {
    warn(diag, "degenerate geometry: thumb MCP and tip coincide");
    return ThumbDirection::Unsure;
  }
  if (match->angle_deg > th.thumb_dir_angle_threshold) return ThumbDirection::Unsure;
  return static_cast<ThumbDirection>(match->reference);
}

PalmOrientation palm_orientation(const HandLandmarkFrame& frame, const RuleThresholds& th,
                                 Diagnostics* diag) {
  const auto match = palm_direction_match(frame);
  if (!match) {
    warn(diag, "degenerate geometry: palm normal vanishes");
    return PalmOrientation::Unknown;
  }
  if (match->angle_deg > th.palm_angle_threshold) return PalmOrientation::Unknown;
  const auto orientation = static_cast<PalmOrientation>(match->reference);
  if (!frame.has_depth &&
      (orientation == PalmOrientation::Inward || orientation == PalmOrientation::Outward)) {
    return PalmOrientation::Unknown;
  }
  return orientation;
}

HandCenter hand_center(const HandLandmarkFrame& frame) {
  Vec3 sum;
  for (const auto& p : frame.landmarks) sum = sum + p;
  HandCenter out;
  out.center = sum * (1.0 / static_cast<double>(kLandmarkCount));
  out.hand_width = distance(flatten_xy(frame[lm::kIndexMcp]), flatten_xy(frame[lm::kPinkyMcp]));
  return out;
}

FramePoseVector encode_pose_vector(const HandLandmarkFrame& frame, const RuleThresholds& th,
                                   Diagnostics* diag) {
  FramePoseVector v{};
  for (std::size_t i = 0; i < kAllFingers.size(); ++i) {
    v[i] = static_cast<std::int8_t>(flexion(frame, kAllFingers[i], th, diag));
  }
  for (std::size_t i = 0; i < kAllFingerPairs.size(); ++i) {
    v[5 + i] = static_cast<std::int8_t>(proximity(frame, kAllFingerPairs[i], th, diag));
  }
  for (std::size_t i = 1; i < kAllFingers.size(); ++i) {
    v[8 + i - 1] = static_cast<std::int8_t>(contact(frame, kAllFingers[i], th, diag));
  }
  const auto thumb = static_cast<ThreeWay>(v[0]);
  v[12] = static_cast<std::int8_t>(thumb_pointing(frame, thumb, th, diag));
  const auto palm = palm_orientation(frame, th, diag);
  if (palm != PalmOrientation::Unknown) v[13 + static_cast<std::size_t>(palm)] = 1;
  return v;
}

bool is_valid_pose_vector(const FramePoseVector& v) {
  for (std::size_t i = 0; i < 13; ++i) {
    if (v[i] < -1 || v[i] > 1) return false;
  }
  int ones = 0;
  for (std::size_t i = 13; i < kPoseRows; ++i) {
    if (v[i] != 0 && v[i] != 1) return false;
    ones += v[i];
  }
  return ones <= 1;
}

std::string_view pose_row_label(std::size_t row) {
  static constexpr std::array<std::string_view, kPoseRows> kLabels = {
      "flexion_thumb",  "flexion_index",     "flexion_middle",  "flexion_ring",
      "flexion_pinky",  "proximity_index_middle", "proximity_middle_ring",
      "proximity_ring_pinky", "contact_thumb_index", "contact_thumb_middle",
      "contact_thumb_ring", "contact_thumb_pinky", "thumb_direction",
      "palm_left",      "palm_right",        "palm_down",       "palm_up",
      "palm_inward",    "palm_outward",
  };
  return row < kLabels.size() ? kLabels[row] : std::string_view("?");
}

}  // namespace gestura
