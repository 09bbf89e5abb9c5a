// SPDX-License-Identifier: Apache-2.0
#include "gestura/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <nlohmann/json.hpp>

#include "gestura/error.hpp"

namespace gestura {

void SegmentationConfig::validate() const {
  if (!std::isfinite(chest_line)) throw Error(ErrorCode::InvalidArgument, "chest_line must be finite");
  if (trigger_frames < 1) throw Error(ErrorCode::InvalidArgument, "trigger_frames must be >= 1");
  if (!(end_hold >= 0.0)) throw Error(ErrorCode::InvalidArgument, "end_hold must be >= 0");
}

void to_json(nlohmann::json& j, const SegmentationConfig& cfg) {
  j = {{"chest_line", cfg.chest_line},
       {"trigger_frames", cfg.trigger_frames},
       {"end_hold", cfg.end_hold}};
}

void from_json(const nlohmann::json& j, SegmentationConfig& cfg) {
  SegmentationConfig out;
  try {
    out.chest_line = j.value("chest_line", out.chest_line);
    out.trigger_frames = j.value("trigger_frames", out.trigger_frames);
    out.end_hold = j.value("end_hold", out.end_hold);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  out.validate();
  cfg = out;
}

bool is_raised(const HandLandmarkFrame& frame, const SegmentationConfig& cfg) {
  return hand_center(frame).center.y <= cfg.chest_line;
}

std::vector<GestureWindow> detect_gesture_windows(const LandmarkStream& stream,
                                                  const SegmentationConfig& cfg) {
  cfg.validate();
  if (stream.handedness == Handedness::Left) {
    throw Error(ErrorCode::LeftHandUnsupported, "only right-hand streams can be encoded");
  }
  if (stream.frames.empty()) throw Error(ErrorCode::EmptyStream, "stream has no frames");

  const auto& frames = stream.frames;
  std::vector<GestureWindow> windows;

  const auto close = [&](std::size_t first, std::size_t last) {
    if (frames[last].timestamp <= frames[first].timestamp) return;
    GestureWindow w;
    w.start_time = frames[first].timestamp;
    w.end_time = frames[last].timestamp;
    w.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(first),
                    frames.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    windows.push_back(std::move(w));
  };

  bool open = false;
  std::size_t run_start = 0;
  int run_length = 0;
  std::size_t window_start = 0;
  std::size_t last_raised = 0;
  std::optional<double> below_since;

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool raised = is_raised(frames[i], cfg);
    if (!open) {
      if (!raised) {
        run_length = 0;
        continue;
      }
      if (run_length == 0) run_start = i;
      if (++run_length >= cfg.trigger_frames) {
        open = true;
        window_start = run_start;
        last_raised = i;
        below_since.reset();
      }
      continue;
    }
    if (raised) {
      last_raised = i;
      below_since.reset();
      continue;
    }
    if (!below_since) below_since = frames[i].timestamp;
    if (frames[i].timestamp - *below_since >= cfg.end_hold) {
      close(window_start, last_raised);
      open = false;
      run_length = 0;
    }
  }
  if (open) close(window_start, last_raised);
  return windows;
}

std::size_t sample_count(double duration) {
  if (!(duration >= 0.0)) return 1;
  // The epsilon absorbs representation error in multiples of 0.2.
  return static_cast<std::size_t>(std::floor(duration / kSampleInterval + 1e-9)) + 1;
}

std::vector<HandLandmarkFrame> sample_window(const GestureWindow& window) {
  if (window.frames.empty()) throw Error(ErrorCode::InvalidArgument, "empty gesture window");
  const auto& frames = window.frames;
  const std::size_t count = sample_count(window.duration());
  std::vector<HandLandmarkFrame> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double target = window.start_time + kSampleInterval * static_cast<double>(k);
    auto it = std::lower_bound(frames.begin(), frames.end(), target,
                               [](const HandLandmarkFrame& f, double t) { return f.timestamp < t; });
    if (it == frames.end()) {
      it = std::prev(frames.end());
    } else if (it != frames.begin()) {
      const auto prev = std::prev(it);
      if (target - prev->timestamp <= it->timestamp - target) it = prev;
    }
    out.push_back(*it);
  }
  return out;
}

void GestureStateMatrix::validate() const {
  if (channel1.empty()) throw Error(ErrorCode::InvalidArgument, "matrix has no columns");
  if (channel2.size() != channel1.size()) {
    throw Error(ErrorCode::InvalidArgument, "channel column counts differ");
  }
  for (const auto& col : channel1) {
    if (!is_valid_pose_vector(col)) throw Error(ErrorCode::InvalidArgument, "invalid pose column");
  }
  for (const auto& c : channel2) {
    if (!is_finite(c) || c.x < kCoordinateMin || c.x > kCoordinateMax || c.y < kCoordinateMin ||
        c.y > kCoordinateMax) {
      throw Error(ErrorCode::InvalidArgument, "movement value out of range");
    }
  }
  if (!std::isfinite(hand_width) || !(hand_width > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "hand_width must be > 0");
  }
}

GestureStateMatrix build_state_matrix(const std::vector<HandLandmarkFrame>& samples,
                                      const RuleThresholds& th, Diagnostics* diag) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no samples");
  GestureStateMatrix m;
  m.has_depth = std::all_of(samples.begin(), samples.end(),
                            [](const HandLandmarkFrame& f) { return f.has_depth; });
  double width_sum = 0.0;
  for (const auto& frame : samples) {
    m.channel1.push_back(encode_pose_vector(frame, th, diag));
    const auto hc = hand_center(frame);
    m.channel2.push_back({hc.center.x, 1.0 - hc.center.y, m.has_depth ? hc.center.z : 0.0});
    width_sum += hc.hand_width;
  }
  m.hand_width = width_sum / static_cast<double>(samples.size());
  return m;
}

std::vector<GestureStateMatrix> encode_stream(const LandmarkStream& stream,
                                              const RuleThresholds& th,
                                              const SegmentationConfig& cfg) {
  std::vector<GestureStateMatrix> out;
  for (const auto& window : detect_gesture_windows(stream, cfg)) {
    out.push_back(build_state_matrix(sample_window(window), th));
  }
  return out;
}

}  // namespace gestura
