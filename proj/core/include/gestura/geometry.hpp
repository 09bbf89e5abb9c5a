// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>

namespace gestura {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
constexpr Vec3 operator*(double s, Vec3 a) { return a * s; }

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double distance(Vec3 a, Vec3 b) { return norm(a - b); }

constexpr Vec3 flatten_xy(Vec3 a) { return {a.x, a.y, 0.0}; }

inline bool is_finite(Vec3 a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Vectors shorter than this are treated as having no direction.
inline constexpr double kMinDirectionNorm = 1e-12;

/// Unsigned angle between two vectors in degrees, or nullopt when either is
/// (numerically) zero-length.
inline std::optional<double> angle_deg(Vec3 a, Vec3 b, double min_norm = kMinDirectionNorm) {
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na >= min_norm) || !(nb >= min_norm)) return std::nullopt;
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

/// Euclidean distance from `p` to the closed segment [a, b].
inline double point_segment_distance(Vec3 p, Vec3 a, Vec3 b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

/// Minimum distance from `p` to an open polyline through `vertices` (>= 1 vertex).
inline double point_polyline_distance(Vec3 p, std::span<const Vec3> vertices) {
  if (vertices.size() == 1) return distance(p, vertices.front());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
    best = std::min(best, point_segment_distance(p, vertices[i], vertices[i + 1]));
  }
  return best;
}

}  // namespace gestura
