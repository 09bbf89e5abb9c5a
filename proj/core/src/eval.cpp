// SPDX-License-Identifier: Apache-2.0
#include "gestura/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr double kMetricTolerance = 1e-9;

constexpr std::string_view kFunctionListDescription =
    "Functions available on the current interface. Each entry has an `id`, a `name` and a `location` "
    "([x, y] or [x, y, z]) on the interface. Conclusions must use these ids.\n";
constexpr std::string_view kGazeDescription =
    "Recent gaze samples of the user. Each sample has a timestamp `t` in seconds and a `position` in the "
    "same coordinates as function locations. The function nearest to where the user looked during the "
    "last second can be computed.\n";
constexpr std::string_view kHistoryDescription = "The user's recent interactions with the interface, oldest first.\n";
constexpr std::string_view kExternalDescription =
    "Other information about the situation, such as the environment, device states or the user's task.\n";

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Inline JSON, a path string, or {"path": ...}.
json context_field(const json& task, const char* key, const std::filesystem::path& base) {
  if (!task.contains(key) || task.at(key).is_null()) return nullptr;
  const auto& v = task.at(key);
  if (v.is_string()) return json::parse(read_file(resolve(base, v.get<std::string>())));
  if (v.is_object() && v.size() == 1 && v.contains("path")) {
    return json::parse(read_file(resolve(base, v.at("path").get<std::string>())));
  }
  return v;
}

double sample_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  for (const double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  out.std = sample_std(xs, out.mean);
  return out;
}

TaskOutcome run_task(const TaskRecord& task, int repetition, ContextSetting setting, const AgentPromptSet& prompts,
                     const BackendFactory& backends, const EvalOptions& options,
                     const CalculatorRegistry& registry) {
  TaskOutcome out;
  out.task_id = task.id;
  out.repetition = repetition;
  out.status = SessionStatus::Negative;

  GestureStateMatrix matrix;
  ContextLibrary lib;
  try {
    const auto stream = parse_landmark_stream(read_file(task.stream));
    const auto matrices = encode_stream(stream, options.thresholds, options.segmentation);
    if (task.window >= matrices.size()) {
      throw Error(ErrorCode::MalformedInput, "stream has " + std::to_string(matrices.size()) +
                                                 " gesture windows, task uses window " +
                                                 std::to_string(task.window));
    }
    matrix = matrices[task.window];
    lib = apply_setting(build_task_library(task), setting);
  } catch (const std::exception& e) {
    out.pipeline_error = true;
    out.cause = e.what();
    return out;
  }

  try {
    const auto backend = backends(task, setting, repetition);
    if (!backend) throw Error(ErrorCode::TransportError, "no backend for task " + task.id);
    auto r = ground_gesture(matrix, lib, prompts, *backend, options.session, registry);
    out.status = r.status;
    out.conclusion = r.conclusion;
    out.rounds = r.rounds;
    out.questions = r.questions;
    out.cause = r.cause;
    out.usage = r.transcript.total_usage();
    // Turns that failed before any completion carry no usage.
    out.has_usage = std::any_of(r.transcript.turns.begin(), r.transcript.turns.end(), [](const TranscriptTurn& t) {
      return t.role != "description" && (t.usage.input_tokens > 0 || t.usage.output_tokens > 0);
    });
    out.transcript_jsonl = r.transcript.to_jsonl();
  } catch (const Error& e) {
    const bool transport = e.code() == ErrorCode::TransportError || e.code() == ErrorCode::AuthError ||
                           e.code() == ErrorCode::RateLimited || e.code() == ErrorCode::FixtureExhausted;
    out.status = transport ? SessionStatus::TransportFailure : SessionStatus::Negative;
    out.pipeline_error = !transport;
    out.cause = e.what();
  } catch (const std::exception& e) {
    out.pipeline_error = true;
    out.cause = e.what();
  }
  if (out.status == SessionStatus::Concluded) out.rank = topk_rank(out.conclusion, task.truth);
  return out;
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

json metrics_json(const Metrics& m) {
  return {{"top1", mean_std_json(m.top1)},
          {"top3", mean_std_json(m.top3)},
          {"top5", mean_std_json(m.top5)},
          {"negative", mean_std_json(m.negative)},
          {"repetitions", m.repetitions}};
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, const char* fmt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

std::vector<TaskRecord> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  std::vector<TaskRecord> tasks;
  try {
    const auto doc = json::parse(json_text);
    const auto& list = doc.is_object() ? doc.at("tasks") : doc;
    if (!list.is_array()) throw Error(ErrorCode::MalformedInput, "manifest must list tasks");
    for (const auto& jt : list) {
      TaskRecord t;
      t.id = jt.at("id").is_string() ? jt.at("id").get<std::string>() : jt.at("id").dump();
      t.scenario = jt.value("scenario", std::string());
      t.stream = resolve(base_dir, jt.at("stream").get<std::string>());
      t.window = jt.value("window", std::size_t{0});
      t.functions = context_field(jt, "functions", base_dir);
      t.gaze = context_field(jt, "gaze", base_dir);
      t.history = context_field(jt, "history", base_dir);
      t.external = context_field(jt, "external", base_dir);
      const auto& truth = jt.at("truth");
      t.truth = truth.is_string() ? truth.get<std::string>() : truth.dump();
      if (jt.contains("fixtures")) t.fixtures = resolve(base_dir, jt.at("fixtures").get<std::string>());

      if (!t.functions.is_array() || t.functions.empty()) {
        throw Error(ErrorCode::MalformedInput, "task " + t.id + ": function list must be a non-empty array");
      }
      bool found = false;
      for (const auto& f : t.functions) found = found || f.get<FunctionEntry>().id == t.truth;
      if (!found) throw Error(ErrorCode::MalformedInput, "task " + t.id + ": truth '" + t.truth + "' is not listed");
      tasks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("manifest: ") + e.what());
  }
  return tasks;
}

ContextLibrary build_task_library(const TaskRecord& task) {
  ContextLibrary lib;
  lib.add({std::string(ctx::kFunctionList), std::string(kFunctionListDescription), task.functions, std::nullopt});
  if (!task.gaze.is_null()) {
    lib.add({std::string(ctx::kGaze), std::string(kGazeDescription), task.gaze, std::string("gaze_target")});
  }
  if (!task.history.is_null()) {
    lib.add({std::string(ctx::kHistory), std::string(kHistoryDescription), task.history, std::nullopt});
  }
  if (!task.external.is_null()) {
    lib.add({std::string(ctx::kExternal), std::string(kExternalDescription), task.external, std::nullopt});
  }
  return lib;
}

std::optional<std::size_t> topk_rank(std::span<const std::string> conclusion, std::string_view truth) {
  for (std::size_t i = 0; i < conclusion.size(); ++i) {
    if (conclusion[i] == truth) return i + 1;
  }
  return std::nullopt;
}

TopKScore score_ranks(std::span<const std::optional<std::size_t>> ranks) {
  if (ranks.empty()) throw Error(ErrorCode::EmptyDataset, "no task outcomes to score");
  std::size_t c1 = 0, c3 = 0, c5 = 0;
  for (const auto& r : ranks) {
    if (!r) continue;
    c1 += *r <= 1;
    c3 += *r <= 3;
    c5 += *r <= 5;
  }
  const auto n = static_cast<double>(ranks.size());
  TopKScore s;
  s.top1 = static_cast<double>(c1) / n;
  s.top3 = static_cast<double>(c3) / n;
  s.top5 = static_cast<double>(c5) / n;
  s.negative = static_cast<double>(ranks.size() - c5) / n;
  return s;
}

void check_metrics(const Metrics& m) {
  const auto in_unit = [](double v) { return v >= -kMetricTolerance && v <= 1.0 + kMetricTolerance; };
  if (!in_unit(m.top1.mean) || !in_unit(m.top5.mean) || !in_unit(m.negative.mean)) {
    throw std::logic_error("metric outside [0, 1]");
  }
  if (m.top1.mean > m.top3.mean + kMetricTolerance || m.top3.mean > m.top5.mean + kMetricTolerance) {
    throw std::logic_error("top-k metrics are not monotone");
  }
  if (std::abs(m.negative.mean + m.top5.mean - 1.0) > kMetricTolerance) {
    throw std::logic_error("negative + top5 != 1");
  }
}

Metrics aggregate(std::span<const TopKScore> reps) {
  if (reps.empty()) throw Error(ErrorCode::EmptyDataset, "no repetitions to aggregate");
  std::vector<double> t1, t3, t5, neg;
  for (const auto& r : reps) {
    t1.push_back(r.top1);
    t3.push_back(r.top3);
    t5.push_back(r.top5);
    neg.push_back(r.negative);
  }
  Metrics m;
  m.top1 = mean_std(t1);
  m.top3 = mean_std(t3);
  m.top5 = mean_std(t5);
  m.negative = mean_std(neg);
  m.repetitions = reps.size();
  check_metrics(m);
  return m;
}

Metrics random_guess_baseline(std::span<const std::size_t> function_counts) {
  if (function_counts.empty()) throw Error(ErrorCode::EmptyDataset, "no tasks");
  TopKScore s{0.0, 0.0, 0.0, 0.0};
  for (const auto n : function_counts) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "task without functions");
    const auto N = static_cast<double>(n);
    s.top1 += std::min<double>(1, N) / N;
    s.top3 += std::min<double>(3, N) / N;
    s.top5 += std::min<double>(5, N) / N;
  }
  const auto tasks = static_cast<double>(function_counts.size());
  s.top1 /= tasks;
  s.top3 /= tasks;
  s.top5 /= tasks;
  s.negative = 1.0 - s.top5;
  const std::array<TopKScore, 1> one = {s};
  return aggregate(one);
}

Metrics random_guess_baseline(std::span<const TaskRecord> tasks) {
  std::vector<std::size_t> counts;
  for (const auto& t : tasks) counts.push_back(t.function_count());
  return random_guess_baseline(counts);
}

std::size_t SettingResult::completed() const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const TaskOutcome& o) { return o.completed(); }));
}

SettingResult run_setting(std::span<const TaskRecord> tasks, ContextSetting setting, const AgentPromptSet& prompts,
                          const BackendFactory& backends, const EvalOptions& options,
                          const CalculatorRegistry& registry) {
  if (options.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "no tasks");

  const std::size_t n = tasks.size() * static_cast<std::size_t>(options.repetitions);
  SettingResult result;
  result.setting = setting;
  result.outcomes.resize(n);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const int rep = static_cast<int>(i / tasks.size());
      result.outcomes[i] = run_task(tasks[i % tasks.size()], rep, setting, prompts, backends, options, registry);
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<TopKScore> reps;
  for (int r = 0; r < options.repetitions; ++r) {
    std::vector<std::optional<std::size_t>> ranks;
    for (std::size_t t = 0; t < tasks.size(); ++t) ranks.push_back(result.outcomes[r * tasks.size() + t].rank);
    reps.push_back(score_ranks(ranks));
  }
  result.metrics = aggregate(reps);
  return result;
}

std::optional<CostSummary> summarize_cost(std::span<const TaskOutcome> outcomes) {
  CostSummary c;
  for (const auto& o : outcomes) {
    if (!o.has_usage) continue;
    ++c.sessions;
    c.mean_rounds += o.rounds;
    c.mean_input_tokens += static_cast<double>(o.usage.input_tokens);
    c.mean_output_tokens += static_cast<double>(o.usage.output_tokens);
    c.mean_latency_s += o.usage.latency_s;
    c.approximate = c.approximate || o.usage.approximate;
  }
  if (c.sessions == 0) return std::nullopt;
  const auto n = static_cast<double>(c.sessions);
  c.mean_rounds /= n;
  c.mean_input_tokens /= n;
  c.mean_output_tokens /= n;
  c.mean_latency_s /= n;
  return c;
}

json report_to_json(const EvalReport& report) {
  json settings = json::array();
  for (const auto& s : report.settings) {
    json entry = {{"setting", to_string(s.setting)},
                  {"metrics", metrics_json(s.metrics)},
                  {"sessions", s.outcomes.size()},
                  {"completed", s.completed()}};
    if (const auto c = summarize_cost(s.outcomes)) {
      entry["cost"] = {{"sessions", c->sessions},
                       {"mean_rounds", c->mean_rounds},
                       {"mean_input_tokens", c->mean_input_tokens},
                       {"mean_output_tokens", c->mean_output_tokens},
                       {"mean_tokens", c->mean_input_tokens + c->mean_output_tokens},
                       {"mean_latency_s", c->mean_latency_s},
                       {"tokens_approximate", c->approximate}};
    } else {
      entry["cost"] = {{"sessions", 0},
                       {"mean_rounds", nullptr},
                       {"mean_input_tokens", nullptr},
                       {"mean_output_tokens", nullptr},
                       {"mean_tokens", nullptr},
                       {"mean_latency_s", nullptr},
                       {"tokens_approximate", nullptr}};
    }
    json failures = json::array();
    for (const auto& o : s.outcomes) {
      if (!o.cause.empty()) {
        failures.push_back({{"task", o.task_id}, {"repetition", o.repetition}, {"status", to_string(o.status)},
                            {"cause", o.cause}});
      }
    }
    entry["failures"] = failures;
    settings.push_back(entry);
  }
  return {{"tasks", report.tasks}, {"settings", settings}, {"random_guess", metrics_json(report.random_guess)}};
}

std::string report_to_csv(const EvalReport& report) {
  std::string out =
      "setting,top1_mean,top1_std,top3_mean,top3_std,top5_mean,top5_std,negative_mean,negative_std,"
      "mean_rounds,mean_input_tokens,mean_output_tokens,mean_latency_s,tokens_approximate\n";
  const auto metric_cols = [](const Metrics& m) {
    return pct(m.top1.mean) + "," + pct(m.top1.std) + "," + pct(m.top3.mean) + "," + pct(m.top3.std) + "," +
           pct(m.top5.mean) + "," + pct(m.top5.std) + "," + pct(m.negative.mean) + "," + pct(m.negative.std);
  };
  for (const auto& s : report.settings) {
    out += std::string(to_string(s.setting)) + "," + metric_cols(s.metrics) + ",";
    if (const auto c = summarize_cost(s.outcomes)) {
      out += fixed(c->mean_rounds, "%.2f") + "," + fixed(c->mean_input_tokens, "%.1f") + "," +
             fixed(c->mean_output_tokens, "%.1f") + "," + fixed(c->mean_latency_s, "%.3f") + "," +
             (c->approximate ? "true" : "false");
    } else {
      out += "NA,NA,NA,NA,NA";
    }
    out += '\n';
  }
  out += "random_guess," + metric_cols(report.random_guess) + ",NA,NA,NA,NA,NA\n";
  return out;
}

}  // namespace gestura
