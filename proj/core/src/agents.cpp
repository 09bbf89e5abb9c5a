// SPDX-License-Identifier: Apache-2.0
#include "gestura/agents.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr std::string_view kReminder =
    "Your previous reply could not be used. Reply again with exactly one JSON object in the "
    "documented output format and nothing else.";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(const std::string& why) { throw Error(ErrorCode::ParseError, why); }

json object_or_fail(std::string_view raw) {
  auto doc = extract_json_object(raw);
  if (!doc) parse_fail("no JSON object in reply");
  return std::move(*doc);
}

bool is_transport(ErrorCode c) {
  return c == ErrorCode::TransportError || c == ErrorCode::RateLimited || c == ErrorCode::AuthError ||
         c == ErrorCode::FixtureExhausted;
}

json usage_json(const UsageRecord& u) {
  return {{"input_tokens", u.input_tokens},
          {"output_tokens", u.output_tokens},
          {"latency_s", u.latency_s},
          {"approximate", u.approximate}};
}

// One agent turn with the repair budget. The accepted reply (or, on
// failure, the final rejected one) ends up in `turn.raw`.
template <class T, class Parse>
std::optional<T> ask(ChatBackend& llm, std::vector<ChatMessage>& history, const AgentConfig& cfg, Parse parse,
                     TranscriptTurn& turn) {
  for (int attempt = 0;; ++attempt) {
    CompletionRequest req{history, cfg.temperature, cfg.model_id};
    const auto c = llm.complete(req);
    turn.usage += c.usage;
    history.push_back({Role::Assistant, c.text});
    try {
      T value = parse(c.text);
      turn.raw = c.text;
      return value;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      if (attempt >= cfg.repair_retries) {
        turn.raw = c.text;
        turn.note = e.what();
        return std::nullopt;
      }
      turn.rejected.push_back(c.text);
      history.push_back({Role::User, std::string(kReminder) + "\n" + e.what()});
    }
  }
}

std::vector<std::string> bullet_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    for (const std::string_view marker : {"- ", "* ", "• "}) {
      if (t.starts_with(marker)) {
        t = trim(t.substr(marker.size()));
        break;
      }
    }
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string join_lines(const json& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array() && !v.empty()) {
    std::string out;
    for (const auto& line : v) {
      if (!line.is_string()) parse_fail(std::string(field) + " entries must be strings");
      if (!out.empty()) out += '\n';
      out += line.get<std::string>();
    }
    return out;
  }
  parse_fail(std::string(field) + " must be a string or a list of strings");
}

std::string function_id_of(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  parse_fail("conclusion ids must be strings or integers");
}

}  // namespace

UsageRecord Transcript::total_usage() const {
  UsageRecord total;
  for (const auto& t : turns) total += t.usage;
  return total;
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& t : turns) {
    json line = {{"role", t.role}, {"round", t.round}, {"raw", t.raw}, {"parsed", t.parsed}};
    if (!t.rejected.empty()) line["rejected"] = t.rejected;
    line["usage"] = usage_json(t.usage);
    if (!t.note.empty()) line["note"] = t.note;
    out += line.dump();
    out += '\n';
  }
  if (!outcome.is_null()) {
    out += outcome.dump();
    out += '\n';
  }
  return out;
}

PoseDescription describe_pose(const GestureStateMatrix& m, const AgentPromptSet& prompts, ChatBackend& llm,
                              const AgentConfig& cfg, Transcript* transcript) {
  m.validate();
  const std::size_t T = m.columns();
  std::vector<ChatMessage> history = {
      {Role::System, render_template(prompts.description_pose, {{"sample_interval", "0.2"}})},
      {Role::User, serialize_pose_channel(m)}};

  const auto parse = [T](std::string_view raw) {
    const auto doc = object_or_fail(raw);
    if (!doc.contains("candidate_gestures")) parse_fail("missing candidate_gestures");
    if (!doc.contains("time_span")) parse_fail("missing time_span");
    PoseDescription p;
    p.candidate_gestures = join_lines(doc.at("candidate_gestures"), "candidate_gestures");
    if (trim(p.candidate_gestures).empty()) parse_fail("candidate_gestures is empty");
    const auto& span = doc.at("time_span");
    if (!span.is_array() || span.size() != 2 || !span[0].is_number_integer() || !span[1].is_number_integer()) {
      parse_fail("time_span must be [start, end] column indices");
    }
    auto clamp = [&](long long v, const char* which) {
      const auto last = static_cast<long long>(T) - 1;
      if (v < 0 || v > last) {
        const auto c = std::clamp(v, 0LL, last);
        p.warnings.push_back(std::string("time_span ") + which + " " + std::to_string(v) + " clamped to " +
                             std::to_string(c));
        return static_cast<std::size_t>(c);
      }
      return static_cast<std::size_t>(v);
    };
    p.start = clamp(span[0].get<long long>(), "start");
    p.end = clamp(span[1].get<long long>(), "end");
    if (p.start > p.end) parse_fail("time_span start is after end");
    return p;
  };

  TranscriptTurn turn{"description_pose", 0, {}, nullptr, {}, {}, {}};
  std::optional<PoseDescription> pose;
  try {
    pose = ask<PoseDescription>(llm, history, cfg, parse, turn);
  } catch (const Error& e) {
    turn.note = e.what();
    if (transcript) transcript->turns.push_back(std::move(turn));
    throw;
  }
  if (pose) {
    turn.parsed = {{"candidate_gestures", bullet_lines(pose->candidate_gestures)},
                   {"time_span", {pose->start, pose->end}}};
    for (const auto& w : pose->warnings) turn.note += (turn.note.empty() ? "" : "; ") + w;
  }
  if (transcript) transcript->turns.push_back(turn);
  if (!pose) throw Error(ErrorCode::ParseError, "pose description: " + turn.note);
  return *pose;
}

std::string describe_movement(const GestureStateMatrix& m, std::size_t start, std::size_t end,
                              const AgentPromptSet& prompts, ChatBackend& llm, const AgentConfig& cfg,
                              Transcript* transcript) {
  if (start > end || end >= m.columns()) throw Error(ErrorCode::InvalidArgument, "movement span out of range");
  std::vector<ChatMessage> history = {
      {Role::System, render_template(prompts.description_movement, {{"sample_interval", "0.2"}})},
      {Role::User, serialize_movement_channel(m, start, end)}};

  const auto parse = [](std::string_view raw) {
    const auto doc = object_or_fail(raw);
    if (!doc.contains("movement")) parse_fail("missing movement");
    return join_lines(doc.at("movement"), "movement");
  };

  TranscriptTurn turn{"description_movement", 0, {}, nullptr, {}, {}, {}};
  std::optional<std::string> movement;
  try {
    movement = ask<std::string>(llm, history, cfg, parse, turn);
  } catch (const Error& e) {
    turn.note = e.what();
    if (transcript) transcript->turns.push_back(std::move(turn));
    throw;
  }
  if (movement) turn.parsed = {{"movement", *movement}};
  if (transcript) transcript->turns.push_back(turn);
  if (!movement) throw Error(ErrorCode::ParseError, "movement description: " + turn.note);
  return *movement;
}

std::string compose_description(const PoseDescription& pose, std::string_view movement) {
  std::string out;
  auto lines = bullet_lines(pose.candidate_gestures);
  for (auto& l : bullet_lines(movement)) lines.push_back(std::move(l));
  for (const auto& l : lines) {
    if (!out.empty()) out += '\n';
    out += "- " + l;
  }
  return out;
}

InferenceTurn parse_inference_turn(std::string_view raw) {
  const auto doc = object_or_fail(raw);
  InferenceTurn turn;
  if (!doc.contains("thought") || !doc.at("thought").is_string()) parse_fail("missing thought");
  turn.thought = doc.at("thought").get<std::string>();
  if (trim(turn.thought).empty()) parse_fail("thought is empty");

  const bool has_q = doc.contains("question") && !doc.at("question").is_null();
  const bool has_c = doc.contains("conclusion") && !doc.at("conclusion").is_null();
  if (has_q == has_c) parse_fail("reply needs exactly one of question or conclusion");
  if (has_q) {
    const auto& q = doc.at("question");
    if (!q.is_string() || trim(q.get<std::string>()).empty()) parse_fail("question must be non-empty text");
    turn.question = q.get<std::string>();
    return turn;
  }
  const auto& c = doc.at("conclusion");
  if (!c.is_array() || c.empty()) parse_fail("conclusion must be a non-empty list of function ids");
  std::vector<std::string> ids;
  for (const auto& v : c) ids.push_back(function_id_of(v));
  turn.conclusion = std::move(ids);
  return turn;
}

ContextTurn parse_context_turn(std::string_view raw) {
  const auto doc = object_or_fail(raw);
  if (!doc.contains("answer") || doc.at("answer").is_null()) parse_fail("missing answer");
  ContextTurn turn;
  turn.thought = doc.value("thought", std::string());
  const auto& a = doc.at("answer");
  turn.answer = a.is_string() ? a.get<std::string>() : a.dump();
  return turn;
}

std::string_view to_string(ContextSetting s) {
  switch (s) {
    case ContextSetting::Baseline: return "baseline";
    case ContextSetting::OnlyGaze: return "only_gaze";
    case ContextSetting::OnlyHistoryExternal: return "only_history_external";
    case ContextSetting::All: return "all";
  }
  return "all";
}

ContextSetting parse_setting(std::string_view s) {
  for (const auto v : kAllSettings) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown context setting '" + std::string(s) + "'");
}

ContextLibrary apply_setting(const ContextLibrary& lib, ContextSetting setting) {
  std::vector<std::string> keep = {std::string(ctx::kFunctionList)};
  switch (setting) {
    case ContextSetting::Baseline: break;
    case ContextSetting::OnlyGaze: keep.emplace_back(ctx::kGaze); break;
    case ContextSetting::OnlyHistoryExternal:
      keep.emplace_back(ctx::kHistory);
      keep.emplace_back(ctx::kExternal);
      break;
    case ContextSetting::All: return lib;
  }
  return lib.filtered(keep);
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Concluded: return "concluded";
    case SessionStatus::Negative: return "negative";
    case SessionStatus::TransportFailure: return "transport_failure";
  }
  return "negative";
}

SessionResult run_inference_session(const std::string& description, const ContextLibrary& lib,
                                    const AgentPromptSet& prompts, ChatBackend& llm, const SessionConfig& cfg,
                                    const CalculatorRegistry& registry, Transcript transcript) {
  if (cfg.max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max_rounds must be >= 1");
  std::set<std::string> known;
  for (const auto& f : lib.functions()) known.insert(f.id);

  SessionResult result;
  result.transcript = std::move(transcript);
  auto& turns = result.transcript.turns;

  std::vector<ChatMessage> inference = {
      {Role::System, render_template(prompts.inference, {{"max_rounds", std::to_string(cfg.max_rounds)},
                                                         {"max_conclusions", std::to_string(kMaxConclusion)}})},
      {Role::User, "Gesture description:\n" + description}};
  std::vector<ChatMessage> context = {
      {Role::System, render_template(prompts.context, {{"library", render_library_prompt(lib)},
                                                       {"library_values", render_library_values(lib)}})}};

  const auto finish = [&](SessionStatus status, std::string cause) {
    result.status = status;
    result.cause = std::move(cause);
    const auto total = result.transcript.total_usage();
    result.transcript.outcome = {{"role", "outcome"},
                                 {"status", to_string(status)},
                                 {"conclusion", result.conclusion},
                                 {"rounds", result.rounds},
                                 {"questions", result.questions},
                                 {"cause", result.cause},
                                 {"usage", usage_json(total)}};
    return result;
  };

  for (int round = 1;; ++round) {
    result.rounds = round;
    const bool forced = round > cfg.max_rounds;
    TranscriptTurn turn{"inference", round, {}, nullptr, {}, {}, forced ? "forced conclusion turn" : ""};
    std::optional<InferenceTurn> parsed;
    try {
      parsed = ask<InferenceTurn>(llm, inference, cfg.agent, parse_inference_turn, turn);
    } catch (const Error& e) {
      if (!is_transport(e.code())) throw;
      turn.note = e.what();
      turns.push_back(std::move(turn));
      return finish(SessionStatus::TransportFailure, e.what());
    }
    if (!parsed) {
      turns.push_back(std::move(turn));
      return finish(SessionStatus::Negative, "malformed inference reply after repair");
    }
    json p = {{"thought", parsed->thought}};

    if (parsed->conclusion) {
      std::vector<std::string> dropped;
      for (const auto& id : *parsed->conclusion) {
        const bool dup = std::find(result.conclusion.begin(), result.conclusion.end(), id) != result.conclusion.end();
        if (!known.contains(id) || dup) {
          dropped.push_back(id);
        } else if (result.conclusion.size() < kMaxConclusion) {
          result.conclusion.push_back(id);
        } else {
          dropped.push_back(id);
        }
      }
      p["conclusion"] = *parsed->conclusion;
      turn.parsed = std::move(p);
      if (!dropped.empty()) {
        json d = dropped;
        turn.note += (turn.note.empty() ? "" : "; ") + std::string("dropped ids ") + d.dump();
      }
      turns.push_back(std::move(turn));
      if (result.conclusion.empty()) return finish(SessionStatus::Negative, "conclusion has no valid function id");
      return finish(SessionStatus::Concluded, "");
    }

    p["question"] = *parsed->question;
    turn.parsed = std::move(p);
    if (forced) {
      turns.push_back(std::move(turn));
      return finish(SessionStatus::Negative, "no conclusion after the forced turn");
    }
    ++result.questions;
    if (round == cfg.max_rounds) {
      turn.note = "question limit reached; answer withheld";
      turns.push_back(std::move(turn));
      inference.push_back({Role::User, "You have used all " + std::to_string(cfg.max_rounds) +
                                           " questions. Reply now with a conclusion listing at most " +
                                           std::to_string(kMaxConclusion) + " function ids."});
      continue;
    }
    turns.push_back(std::move(turn));

    context.push_back({Role::User, *parsed->question});
    TranscriptTurn reply{"context", round, {}, nullptr, {}, {}, {}};
    std::optional<ContextTurn> answer;
    try {
      answer = ask<ContextTurn>(llm, context, cfg.agent, parse_context_turn, reply);
    } catch (const Error& e) {
      if (!is_transport(e.code())) throw;
      reply.note = e.what();
      turns.push_back(std::move(reply));
      return finish(SessionStatus::TransportFailure, e.what());
    }
    if (!answer) {
      // Deliver the raw reply rather than stall the dialogue.
      answer = ContextTurn{{}, reply.raw};
    }
    auto resolved = resolve_placeholders(answer->answer, lib, registry);
    for (const auto& f : resolved.failures) reply.note += (reply.note.empty() ? "" : "; ") + f;
    reply.parsed = {{"thought", answer->thought}, {"answer", resolved.text}};
    turns.push_back(std::move(reply));
    inference.push_back({Role::User, "Context Management Agent: " + resolved.text});
  }
}

SessionResult ground_gesture(const GestureStateMatrix& m, const ContextLibrary& lib, const AgentPromptSet& prompts,
                             ChatBackend& llm, const SessionConfig& cfg, const CalculatorRegistry& registry) {
  Transcript transcript;
  std::string description;
  try {
    const auto pose = describe_pose(m, prompts, llm, cfg.agent, &transcript);
    const auto movement = describe_movement(m, pose.start, pose.end, prompts, llm, cfg.agent, &transcript);
    description = compose_description(pose, movement);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParseError && !is_transport(e.code())) throw;
    SessionResult r;
    r.status = e.code() == ErrorCode::ParseError ? SessionStatus::Negative : SessionStatus::TransportFailure;
    r.cause = e.what();
    r.transcript = std::move(transcript);
    r.transcript.outcome = {{"role", "outcome"},
                            {"status", to_string(r.status)},
                            {"conclusion", json::array()},
                            {"rounds", 0},
                            {"questions", 0},
                            {"cause", r.cause},
                            {"usage", usage_json(r.transcript.total_usage())}};
    return r;
  }
  transcript.turns.push_back({"description", 0, description, description, {}, {}, {}});
  return run_inference_session(description, lib, prompts, llm, cfg, registry, std::move(transcript));
}

}  // namespace gestura
