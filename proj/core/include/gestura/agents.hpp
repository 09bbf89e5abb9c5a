// SPDX-License-Identifier: Apache-2.0
//
// The three agents: gesture description (pose then movement), gesture
// inference, and context management, plus the dialogue loop between the
// last two.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gestura/context_library.hpp"
#include "gestura/encoder.hpp"
#include "gestura/llm.hpp"
#include "gestura/prompts.hpp"

namespace gestura {

inline constexpr std::size_t kMaxConclusion = 5;

/// First JSON object embedded in `raw` (code fences and prose around it are
/// ignored). nullopt when there is none.
std::optional<nlohmann::json> extract_json_object(std::string_view raw);

struct AgentConfig {
  std::string model_id = std::string(kDefaultModelId);
  double temperature = 0.0;
  /// Extra attempts after a malformed reply, each with a format reminder.
  int repair_retries = 1;
};

struct TranscriptTurn {
  std::string role;  // description_pose, description_movement, inference, context
  int round = 0;
  std::string raw;
  nlohmann::json parsed;                // null when the reply never parsed
  std::vector<std::string> rejected;    // malformed replies that were repaired
  UsageRecord usage;                    // summed over the reply and its repairs
  std::string note;
};

struct Transcript {
  std::vector<TranscriptTurn> turns;
  nlohmann::json outcome;  // null until a session finishes

  UsageRecord total_usage() const;
  /// One JSON object per line; the outcome record comes last.
  std::string to_jsonl() const;
};

struct PoseDescription {
  std::string candidate_gestures;  // newline-separated lines
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<std::string> warnings;
};

/// One completion with the pose prompt. The span is clamped to [0, T-1].
/// Throws ParseError after the repair budget, TransportError from the backend.
PoseDescription describe_pose(const GestureStateMatrix& m, const AgentPromptSet& prompts, ChatBackend& llm,
                              const AgentConfig& cfg = {}, Transcript* transcript = nullptr);

/// Movement rows of columns [start, end] sent with the movement prompt.
std::string describe_movement(const GestureStateMatrix& m, std::size_t start, std::size_t end,
                              const AgentPromptSet& prompts, ChatBackend& llm, const AgentConfig& cfg = {},
                              Transcript* transcript = nullptr);

/// Bullet list: pose lines then movement lines, "- " prefixed, joined by
/// newlines, no trailing separator.
std::string compose_description(const PoseDescription& pose, std::string_view movement);

struct InferenceTurn {
  std::string thought;
  std::optional<std::string> question;
  std::optional<std::vector<std::string>> conclusion;
};

/// Requires a non-empty thought and exactly one of question (non-empty text)
/// or conclusion (a non-empty list of string or integer ids). Duplicates and
/// overlong lists are left to session validation. Throws Error{ParseError}.
InferenceTurn parse_inference_turn(std::string_view raw);

struct ContextTurn {
  std::string thought;
  std::string answer;
};

/// {"thought", "answer"}; non-string answers are serialized. Throws Error{ParseError}.
ContextTurn parse_context_turn(std::string_view raw);

enum class ContextSetting { Baseline, OnlyGaze, OnlyHistoryExternal, All };

inline constexpr std::array<ContextSetting, 4> kAllSettings = {
    ContextSetting::Baseline, ContextSetting::OnlyGaze, ContextSetting::OnlyHistoryExternal,
    ContextSetting::All};

std::string_view to_string(ContextSetting s);
ContextSetting parse_setting(std::string_view s);  // Error{InvalidArgument}

/// Library exposed under a setting. The function list is always kept.
ContextLibrary apply_setting(const ContextLibrary& lib, ContextSetting setting);

struct SessionConfig {
  AgentConfig agent;
  int max_rounds = 10;
};

enum class SessionStatus { Concluded, Negative, TransportFailure };

std::string_view to_string(SessionStatus s);

struct SessionResult {
  SessionStatus status = SessionStatus::Negative;
  std::vector<std::string> conclusion;  // ranked, unique, known ids
  int rounds = 0;                       // inference turns, including a forced one
  int questions = 0;
  std::string cause;                    // why the session ended without a conclusion
  Transcript transcript;
};

/// Dialogue loop. Each inference turn is one round; questions go to the
/// context agent and its answer (placeholders resolved) comes back. After
/// `max_rounds` questions one forced-conclusion turn is requested. Unknown
/// and duplicate ids are dropped and the list capped at five; an empty
/// result is Negative. Backend failures end the session with
/// TransportFailure and the partial transcript. Throws Error{UnknownContext}
/// when the library has no function list.
SessionResult run_inference_session(const std::string& description, const ContextLibrary& lib,
                                    const AgentPromptSet& prompts, ChatBackend& llm,
                                    const SessionConfig& cfg = {},
                                    const CalculatorRegistry& registry = CalculatorRegistry::with_builtins(),
                                    Transcript transcript = {});

/// describe_pose, describe_movement, compose_description and the session.
/// Description failures are reported as Negative (parse) or TransportFailure.
SessionResult ground_gesture(const GestureStateMatrix& m, const ContextLibrary& lib, const AgentPromptSet& prompts,
                             ChatBackend& llm, const SessionConfig& cfg = {},
                             const CalculatorRegistry& registry = CalculatorRegistry::with_builtins());

}  // namespace gestura
