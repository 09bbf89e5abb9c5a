// SPDX-License-Identifier: Apache-2.0
//
// Top-k evaluation over a task manifest under the four context settings.
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gestura/agents.hpp"
#include "gestura/encoder.hpp"

namespace gestura {

struct TaskRecord {
  std::string id;
  std::string scenario;
  std::filesystem::path stream;  // landmark stream JSON
  std::size_t window = 0;        // gesture window to ground
  nlohmann::json functions;      // function list entries
  nlohmann::json gaze;           // null when absent
  nlohmann::json history;
  nlohmann::json external;
  std::string truth;
  std::filesystem::path fixtures;  // optional scripted responses for this task

  std::size_t function_count() const { return functions.size(); }
};

/// JSON list of tasks (or {"tasks": [...]}). Each context field is inline
/// JSON, a path string, or {"path": ...}; paths resolve against `base_dir`.
/// Throws Error{MalformedInput} when the truth id is not a listed function.
std::vector<TaskRecord> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir = {});

/// Function list, gaze (with the gaze_target calculator), history and
/// external contexts that the task provides.
ContextLibrary build_task_library(const TaskRecord& task);

/// 1-based position of `truth`; nullopt when absent or the list is empty.
std::optional<std::size_t> topk_rank(std::span<const std::string> conclusion, std::string_view truth);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Fractions for one repetition.
struct TopKScore {
  double top1 = 0.0;
  double top3 = 0.0;
  double top5 = 0.0;
  double negative = 1.0;
};

TopKScore score_ranks(std::span<const std::optional<std::size_t>> ranks);

struct Metrics {
  MeanStd top1, top3, top5, negative;
  std::size_t repetitions = 0;
};

/// Mean and sample standard deviation (n - 1; 0 for one repetition).
/// Checks top1 <= top3 <= top5 and negative + top5 = 1; throws std::logic_error.
Metrics aggregate(std::span<const TopKScore> reps);
void check_metrics(const Metrics& m);

/// Closed-form expected Top-k of uniform guessing: mean of min(k, N_i) / N_i.
Metrics random_guess_baseline(std::span<const std::size_t> function_counts);
Metrics random_guess_baseline(std::span<const TaskRecord> tasks);

struct TaskOutcome {
  std::string task_id;
  int repetition = 0;
  SessionStatus status = SessionStatus::Negative;
  std::vector<std::string> conclusion;
  std::optional<std::size_t> rank;
  int rounds = 0;
  int questions = 0;
  UsageRecord usage;
  bool has_usage = false;
  bool pipeline_error = false;  // input or encoding failure before the dialogue
  std::string cause;
  std::string transcript_jsonl;

  /// The dialogue ran to a conclusion or a model-side Negative.
  bool completed() const { return !pipeline_error && status != SessionStatus::TransportFailure; }
};

struct SettingResult {
  ContextSetting setting = ContextSetting::All;
  Metrics metrics;
  std::vector<TaskOutcome> outcomes;  // repetition-major, then manifest order

  std::size_t completed() const;
};

/// Backend for one session. Called once per (task, setting, repetition).
using BackendFactory =
    std::function<std::shared_ptr<ChatBackend>(const TaskRecord& task, ContextSetting setting, int repetition)>;

struct EvalOptions {
  int repetitions = 3;
  unsigned jobs = 1;
  SessionConfig session;
  RuleThresholds thresholds;
  SegmentationConfig segmentation;
};

/// Runs matrix -> description -> session for every task and repetition.
/// Per-task failures are scored Negative with the cause recorded; the run
/// itself never stops early.
SettingResult run_setting(std::span<const TaskRecord> tasks, ContextSetting setting, const AgentPromptSet& prompts,
                          const BackendFactory& backends, const EvalOptions& options = {},
                          const CalculatorRegistry& registry = CalculatorRegistry::with_builtins());

struct CostSummary {
  std::size_t sessions = 0;  // sessions with usage records
  double mean_rounds = 0.0;
  double mean_input_tokens = 0.0;
  double mean_output_tokens = 0.0;
  double mean_latency_s = 0.0;
  bool approximate = false;
};

/// nullopt when no session produced usage records.
std::optional<CostSummary> summarize_cost(std::span<const TaskOutcome> outcomes);

struct EvalReport {
  std::vector<SettingResult> settings;
  Metrics random_guess;
  std::size_t tasks = 0;
};

/// Fractions in JSON; missing cost values are null.
nlohmann::json report_to_json(const EvalReport& report);
/// Percentages with two decimals; missing cost values are "NA".
std::string report_to_csv(const EvalReport& report);

}  // namespace gestura
