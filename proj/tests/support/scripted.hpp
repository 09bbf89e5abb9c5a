// SPDX-License-Identifier: Apache-2.0
//
// Building blocks for scripted dialogue tests.
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gestura/context_library.hpp"
#include "gestura/encoder.hpp"
#include "gestura/llm.hpp"

namespace gestura::testing {

using Fixture = ScriptedBackend::Fixture;

inline Fixture reply(std::string text) { return {false, {}, std::move(text), {}}; }
inline Fixture reply(const char* text) { return reply(std::string(text)); }
inline Fixture reply(const nlohmann::json& j) { return reply(j.dump()); }
inline Fixture failure(std::string kind) { return {false, {}, {}, std::move(kind)}; }

inline nlohmann::json pose_json(int start, int end) {
  return {{"candidate_gestures", {"Open palm facing the camera", "Stop sign"}}, {"time_span", {start, end}}};
}
inline nlohmann::json movement_json() { return {{"movement", "The hand moves right by one hand width."}}; }
inline nlohmann::json question_json(std::string q) { return {{"thought", "Need context."}, {"question", std::move(q)}}; }
inline nlohmann::json conclusion_json(nlohmann::json ids) {
  return {{"thought", "Ranking the candidates."}, {"conclusion", std::move(ids)}};
}
inline nlohmann::json answer_json(std::string a) { return {{"thought", "Looked it up."}, {"answer", std::move(a)}}; }

/// Pose and movement replies that describe columns [0, end].
inline std::vector<Fixture> description_fixtures(int end = 2) {
  return {reply(pose_json(0, end)), reply(movement_json())};
}

/// T-column matrix of a flat open hand drifting right.
inline GestureStateMatrix small_matrix(std::size_t T = 3) {
  GestureStateMatrix m;
  for (std::size_t i = 0; i < T; ++i) {
    m.channel1.push_back({1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 1});
    m.channel2.push_back({0.4 + 0.05 * static_cast<double>(i), 0.6, -0.05});
  }
  m.hand_width = 0.05;
  return m;
}

/// Five functions on three devices, gaze resting on the television.
inline ContextLibrary small_library() {
  using nlohmann::json;
  ContextLibrary lib;
  lib.add({"function_list", "Functions available on the interface.",
           json::array({{{"id", "1"}, {"name", "Turn on lamp"}, {"device", "lamp"}, {"location", {0.0, 0.0, 0.0}}},
                        {{"id", "2"}, {"name", "Turn off lamp"}, {"device", "lamp"}, {"location", {0.0, 0.0, 0.0}}},
                        {{"id", "3"}, {"name", "Turn on television"}, {"device", "television"}, {"location", {3.0, 0.0, 0.0}}},
                        {{"id", "4"}, {"name", "Next channel"}, {"device", "television"}, {"location", {3.0, 0.0, 0.0}}},
                        {{"id", "5"}, {"name", "Play music"}, {"device", "speaker"}, {"location", {0.0, 3.0, 0.0}}}}),
           std::nullopt});
  lib.add({"gaze", "Where the user looked recently.",
           json::array({{{"t", 0.0}, {"position", {2.9, 0.1, 0.0}}}, {{"t", 0.5}, {"position", {3.1, -0.1, 0.0}}}}),
           std::string("gaze_target")});
  lib.add({"history", "Recent interactions.", json::array({{{"function", "1"}, {"time", "19:00"}}}), std::nullopt});
  lib.add({"external", "Time and weather.", json{{"time", "20:00"}}, std::nullopt});
  return lib;
}

}  // namespace gestura::testing
