// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace gestura::oracle {
namespace {

constexpr double kPi = 3.14159265358979323846;

P3 at(const HandLandmarkFrame& f, std::size_t i, bool flat = false) {
  return {f.landmarks[i].x, f.landmarks[i].y, flat ? 0.0 : f.landmarks[i].z};
}
P3 sub(const P3& a, const P3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dotp(const P3& a, const P3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
P3 crossp(const P3& a, const P3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double len(const P3& a) { return std::sqrt(dotp(a, a)); }

int three_way(double v, ThresholdPair th) {
  if (v <= th.low) return 1;
  if (v >= th.high) return -1;
  return 0;
}

// Landmark indices written out rather than taken from the library.
constexpr int kMcp[5] = {2, 5, 9, 13, 17};

}  // namespace

double angle_between(const P3& a, const P3& b) {
  if (len(a) < 1e-12 || len(b) < 1e-12) return -1.0;
  return std::atan2(len(crossp(a, b)), dotp(a, b)) * 180.0 / kPi;
}

double point_to_segment(const P3& p, const P3& a, const P3& b) {
  const P3 ab = sub(b, a);
  if (dotp(sub(p, a), ab) <= 0.0) return len(sub(p, a));
  if (dotp(sub(p, b), sub(a, b)) <= 0.0) return len(sub(p, b));
  return len(crossp(sub(p, a), ab)) / len(ab);
}

int flexion(const HandLandmarkFrame& f, int finger, const RuleThresholds& th) {
  const auto m = static_cast<std::size_t>(kMcp[finger]);
  if (finger == 0) {
    const double a = angle_between(sub(at(f, 3), at(f, 2)), sub(at(f, 4), at(f, 3)));
    return a < 0 ? 0 : three_way(a, th.flexion_thumb);
  }
  const double a = angle_between(sub(at(f, m + 1), at(f, m)), sub(at(f, m + 2), at(f, m + 1)));
  const double b = angle_between(sub(at(f, m + 2), at(f, m + 1)), sub(at(f, m + 3), at(f, m + 2)));
  if (a < 0 || b < 0) return 0;
  return three_way(a + b, th.flexion_finger);
}

int proximity(const HandLandmarkFrame& f, int pair, const RuleThresholds& th) {
  const bool flat = th.distance_mode == DistanceMode::XY;
  const auto m1 = static_cast<std::size_t>(kMcp[pair + 1]);
  const auto m2 = static_cast<std::size_t>(kMcp[pair + 2]);
  const P3 a[3] = {at(f, m1 + 1, flat), at(f, m1 + 2, flat), at(f, m1 + 3, flat)};
  const P3 b[3] = {at(f, m2 + 1, flat), at(f, m2 + 2, flat), at(f, m2 + 3, flat)};
  if (len(sub(a[1], a[0])) + len(sub(a[2], a[1])) < 1e-12) return 0;
  if (len(sub(b[1], b[0])) + len(sub(b[2], b[1])) < 1e-12) return 0;
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double ab = std::min(point_to_segment(a[k], b[0], b[1]), point_to_segment(a[k], b[1], b[2]));
    const double ba = std::min(point_to_segment(b[k], a[0], a[1]), point_to_segment(b[k], a[1], a[2]));
    sum += std::min(ab, ba);
  }
  return three_way(sum / 3.0, th.proximity);
}

int contact(const HandLandmarkFrame& f, int finger, const RuleThresholds& th) {
  const bool flat = th.distance_mode == DistanceMode::XY;
  const auto tip = static_cast<std::size_t>(kMcp[finger] + 3);
  return three_way(len(sub(at(f, 4, flat), at(f, tip, flat))), th.contact);
}

int thumb_direction(const HandLandmarkFrame& f, const RuleThresholds& th) {
  if (flexion(f, 0, th) != 1) return 0;
  const P3 v = sub(at(f, 4), at(f, 2));
  const double down = angle_between(v, {0, 1, 0});
  const double up = angle_between(v, {0, -1, 0});
  if (down < 0) return 0;
  const bool is_up = up < down;
  const double best = is_up ? up : down;
  if (best > th.thumb_dir_angle_threshold) return 0;
  return is_up ? 1 : -1;
}

int palm_row(const HandLandmarkFrame& f, const RuleThresholds& th) {
  const P3 v1 = sub(at(f, 5), at(f, 17));
  const P3 v2 = sub(at(f, 9), at(f, 0));
  const P3 n = f.handedness == Handedness::Right ? crossp(v2, v1) : crossp(v1, v2);
  if (len(n) < 1e-9) return -1;
  // Scan order right, left, down, up, outward, inward; value = one-hot row.
  const std::array<std::pair<P3, int>, 6> refs = {{
      {{1, 0, 0}, 1},
      {{-1, 0, 0}, 0},
      {{0, 1, 0}, 2},
      {{0, -1, 0}, 3},
      {{0, 0, -1}, 5},
      {{0, 0, 1}, 4},
  }};
  double best = 1e9;
  int row = -1;
  for (const auto& [dir, r] : refs) {
    const double a = angle_between(n, dir);
    if (a < best) {
      best = a;
      row = r;
    }
  }
  if (best > th.palm_angle_threshold) return -1;
  if (!f.has_depth && (row == 4 || row == 5)) return -1;
  return row;
}

std::array<int, 19> pose_vector(const HandLandmarkFrame& f, const RuleThresholds& th) {
  std::array<int, 19> v{};
  for (int i = 0; i < 5; ++i) v[i] = flexion(f, i, th);
  for (int i = 0; i < 3; ++i) v[5 + i] = proximity(f, i, th);
  for (int i = 1; i < 5; ++i) v[7 + i] = contact(f, i, th);
  v[12] = thumb_direction(f, th);
  const int row = palm_row(f, th);
  if (row >= 0) v[13 + row] = 1;
  return v;
}

P3 centroid(const HandLandmarkFrame& f) {
  P3 s{0, 0, 0};
  for (std::size_t i = 0; i < 21; ++i) {
    s[0] += f.landmarks[i].x;
    s[1] += f.landmarks[i].y;
    s[2] += f.landmarks[i].z;
  }
  return {s[0] / 21.0, s[1] / 21.0, s[2] / 21.0};
}

}  // namespace gestura::oracle
