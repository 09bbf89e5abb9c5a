// SPDX-License-Identifier: Apache-2.0
#include "gestura/landmarks.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kLandmarkCount> kNames = {
    "WRIST",
    "THUMB_CMC",
    "THUMB_MCP",
    "THUMB_IP",
    "THUMB_TIP",
    "INDEX_FINGER_MCP",
    "INDEX_FINGER_PIP",
    "INDEX_FINGER_DIP",
    "INDEX_FINGER_TIP",
    "MIDDLE_FINGER_MCP",
    "MIDDLE_FINGER_PIP",
    "MIDDLE_FINGER_DIP",
    "MIDDLE_FINGER_TIP",
    "RING_FINGER_MCP",
    "RING_FINGER_PIP",
    "RING_FINGER_DIP",
    "RING_FINGER_TIP",
    "PINKY_MCP",
    "PINKY_PIP",
    "PINKY_DIP",
    "PINKY_TIP",
};

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedInput, what); }

Handedness parse_handedness(const json& j) {
  if (!j.is_string()) malformed("handedness must be a string");
  const auto s = j.get<std::string>();
  if (s == "right") return Handedness::Right;
  if (s == "left") return Handedness::Left;
  malformed("unknown handedness '" + s + "'");
}

SourceView parse_source_view(const json& j) {
  if (!j.is_string()) malformed("source_view must be a string");
  const auto s = j.get<std::string>();
  if (s == "third_person") return SourceView::ThirdPerson;
  if (s == "first_person") return SourceView::FirstPerson;
  malformed("unknown source_view '" + s + "'");
}

double number_at(const json& arr, std::size_t i) {
  if (!arr.at(i).is_number()) malformed("landmark coordinate is not a number");
  return arr.at(i).get<double>();
}

}  // namespace

std::string_view finger_name(Finger f) {
  switch (f) {
    case Finger::Thumb: return "thumb";
    case Finger::Index: return "index";
    case Finger::Middle: return "middle";
    case Finger::Ring: return "ring";
    case Finger::Pinky: return "pinky";
  }
  return "?";
}

std::size_t landmark_index(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return i;
  }
  throw Error(ErrorCode::UnknownLandmarkName, std::string(name));
}

std::string_view landmark_name(std::size_t index) {
  if (index >= kNames.size()) {
    throw Error(ErrorCode::InvalidArgument, "landmark index " + std::to_string(index));
  }
  return kNames[index];
}

std::string_view to_string(Handedness h) { return h == Handedness::Right ? "right" : "left"; }

std::string_view to_string(SourceView v) {
  return v == SourceView::ThirdPerson ? "third_person" : "first_person";
}

void validate_frame(const HandLandmarkFrame& frame) {
  if (!std::isfinite(frame.timestamp) || frame.timestamp < 0.0) {
    malformed("timestamp must be finite and >= 0");
  }
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    const auto& p = frame.landmarks[i];
    if (!is_finite(p)) malformed("non-finite coordinate at landmark " + std::to_string(i));
    if (p.x < kCoordinateMin || p.x > kCoordinateMax || p.y < kCoordinateMin ||
        p.y > kCoordinateMax) {
      malformed("coordinate out of range at landmark " + std::to_string(i));
    }
  }
}

LandmarkStream parse_landmark_stream(std::string_view raw) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
  if (!doc.is_object()) malformed("stream document must be an object");

  LandmarkStream stream;
  if (doc.contains("source_view")) stream.source_view = parse_source_view(doc["source_view"]);
  if (!doc.contains("handedness")) malformed("missing 'handedness'");
  stream.handedness = parse_handedness(doc["handedness"]);
  if (!doc.contains("frames") || !doc["frames"].is_array()) malformed("missing 'frames' array");

  const auto& frames = doc["frames"];
  stream.frames.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& jf = frames[f];
    if (!jf.is_object() || !jf.contains("t") || !jf["t"].is_number() || !jf.contains("lm") ||
        !jf["lm"].is_array()) {
      malformed("frame " + std::to_string(f) + " needs numeric 't' and array 'lm'");
    }
    const auto& lms = jf["lm"];
    if (lms.size() != kLandmarkCount) {
      throw Error(ErrorCode::BadLandmarkCount, "frame " + std::to_string(f) + " has " +
                                                   std::to_string(lms.size()) + " landmarks");
    }
    HandLandmarkFrame frame;
    frame.timestamp = jf["t"].get<double>();
    frame.handedness = stream.handedness;
    std::size_t dims = 0;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
      const auto& p = lms[i];
      if (!p.is_array() || (p.size() != 2 && p.size() != 3)) {
        malformed("landmark must be [x,y] or [x,y,z]");
      }
      if (dims == 0) dims = p.size();
      if (p.size() != dims) malformed("mixed 2D/3D landmarks within a frame");
      frame.landmarks[i] = {number_at(p, 0), number_at(p, 1), dims == 3 ? number_at(p, 2) : 0.0};
    }
    frame.has_depth = dims == 3;
    validate_frame(frame);
    if (!stream.frames.empty() && frame.timestamp <= stream.frames.back().timestamp) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  "frame " + std::to_string(f) + " at t=" + std::to_string(frame.timestamp));
    }
    stream.frames.push_back(frame);
  }
  return stream;
}

std::string serialize_landmark_stream(const LandmarkStream& stream) {
  json doc;
  doc["source_view"] = to_string(stream.source_view);
  doc["handedness"] = to_string(stream.handedness);
  json frames = json::array();
  for (const auto& frame : stream.frames) {
    json lms = json::array();
    for (const auto& p : frame.landmarks) {
      lms.push_back(frame.has_depth ? json::array({p.x, p.y, p.z}) : json::array({p.x, p.y}));
    }
    frames.push_back({{"t", frame.timestamp}, {"lm", std::move(lms)}});
  }
  doc["frames"] = std::move(frames);
  return doc.dump();
}

}  // namespace gestura
