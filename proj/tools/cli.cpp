// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gestura/agents.hpp"
#include "gestura/context_library.hpp"
#include "gestura/encoder.hpp"
#include "gestura/error.hpp"
#include "gestura/eval.hpp"
#include "gestura/llm.hpp"
#include "gestura/prompts.hpp"
#include "gestura/rules.hpp"
#include "gestura/tuner.hpp"

namespace gestura::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::TransportError:
    case ErrorCode::AuthError:
    case ErrorCode::RateLimited:
    case ErrorCode::FixtureExhausted:
      return kTransportFailure;
    default:
      return kInputError;
  }
}

// --backend scripted:<fixtures.json> | live:<config.json>
struct BackendSpec {
  enum class Kind { None, Scripted, Live } kind = Kind::None;
  fs::path path;
  std::vector<ScriptedBackend::Fixture> fixtures;
  std::shared_ptr<ChatBackend> live;

  static BackendSpec parse(const std::string& spec, std::uint64_t seed) {
    BackendSpec b;
    if (spec.empty()) return b;
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "backend must be scripted:<file> or live:<file>");
    const auto kind = spec.substr(0, colon);
    b.path = spec.substr(colon + 1);
    if (!fs::is_regular_file(b.path)) throw Error(ErrorCode::Io, "backend file not found: " + b.path.string());
    if (kind == "scripted") {
      b.kind = Kind::Scripted;
      b.fixtures = parse_fixtures(read_file(b.path));
    } else if (kind == "live") {
      b.kind = Kind::Live;
      RetryPolicy policy;
      policy.seed = seed;
      b.live = with_retry(make_http_backend(parse_http_config(read_file(b.path))), policy);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown backend kind '" + kind + "'");
    }
    return b;
  }

  // Scripted backends restart their sequence for every session.
  std::shared_ptr<ChatBackend> session_backend() const {
    switch (kind) {
      case Kind::Scripted: return std::make_shared<ScriptedBackend>(fixtures);
      case Kind::Live: return live;
      case Kind::None: break;
    }
    return nullptr;
  }
};

RuleThresholds load_thresholds(const std::string& path) {
  return path.empty() ? RuleThresholds{} : parse_thresholds(read_file(path));
}

SegmentationConfig load_segmentation(const std::string& path) {
  if (path.empty()) return {};
  try {
    return json::parse(read_file(path)).get<SegmentationConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("segmentation config: ") + e.what());
  }
}

GestureStateMatrix load_matrix(const fs::path& p) {
  const auto text = read_file(p);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return matrix_from_json(json::parse(text));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedInput, std::string("matrix: ") + e.what());
    }
  }
  return parse_matrix_text(text);
}

ContextLibrary load_library_or_empty(const fs::path& p) {
  if (!fs::exists(p)) return {};
  return parse_library(read_file(p));
}

// --- encode ------------------------------------------------------------------

struct EncodeArgs {
  std::string stream;
  std::string thresholds;
  std::string segmentation;
  std::string out_dir;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  const auto th = load_thresholds(a.thresholds);
  const auto seg = load_segmentation(a.segmentation);
  const auto stream = parse_landmark_stream(read_file(a.stream));
  const auto matrices = encode_stream(stream, th, seg);
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto stem = fs::path(a.out_dir) / ("window_" + std::to_string(i));
    write_atomic(stem.string() + ".matrix.json", matrix_to_json(matrices[i]).dump(2) + "\n");
    write_atomic(stem.string() + ".prompt.txt", serialize_matrix(matrices[i]));
  }
  out << matrices.size() << (matrices.size() == 1 ? " window\n" : " windows\n");
  return kOk;
}

// --- tune --------------------------------------------------------------------

struct TuneArgs {
  std::string dataset;
  std::string grid;
  std::string base;
  std::string out;
  std::string report;
  double unsure_weight = 0.2;
  double error_weight = 1.0;
  unsigned jobs = 1;
};

int cmd_tune(const TuneArgs& a, std::ostream& out, std::ostream& err) {
  const auto samples = parse_labeled_dataset(read_file(a.dataset), fs::path(a.dataset).parent_path());
  TuneOptions opt;
  if (!a.grid.empty()) {
    try {
      opt.grid = json::parse(read_file(a.grid)).get<GridSpec>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedInput, std::string("grid: ") + e.what());
    }
  }
  opt.base = load_thresholds(a.base);
  opt.weights.unsure = a.unsure_weight;
  opt.weights.error = a.error_weight;
  opt.weights.validate();
  opt.jobs = a.jobs;

  const auto ambiguous = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const LabeledSample& s) { return s.label.ambiguous(); }));
  err << "filtered " << ambiguous << " ambiguous samples of " << samples.size() << "\n";

  const auto report = tune_all(samples, opt);
  write_atomic(a.out, serialize_thresholds(report.thresholds));
  const auto doc = tune_report_to_json(report);
  if (!a.report.empty()) write_atomic(a.report, doc.dump(2) + "\n");
  for (const auto& r : doc.at("rules")) {
    out << r.at("rule").get<std::string>() << ": loss " << r.at("loss").get<double>() << ", error "
        << r.at("error").get<double>() << ", unsure " << r.at("unsure").get<double>() << "\n";
  }
  return kOk;
}

// --- ground ------------------------------------------------------------------

struct SessionArgs {
  std::string prompts;
  std::string backend;
  int max_rounds = 10;
  int repair_retries = 1;
  std::string model_id = std::string(kDefaultModelId);
  std::uint64_t seed = 0;
  std::string debug_log;
  bool debug_bodies = false;
};

SessionConfig session_config(const SessionArgs& a) {
  SessionConfig cfg;
  cfg.max_rounds = a.max_rounds;
  cfg.agent.repair_retries = a.repair_retries;
  cfg.agent.model_id = a.model_id;
  if (cfg.max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "--max-rounds must be >= 1");
  if (cfg.agent.repair_retries < 0) throw Error(ErrorCode::InvalidArgument, "--repair-retries must be >= 0");
  return cfg;
}

AgentPromptSet load_prompts(const std::string& dir) {
  return AgentPromptSet::load(dir.empty() ? default_prompt_dir() : fs::path(dir));
}

struct GroundArgs {
  std::string matrix;
  std::string library;
  std::string setting = "all";
  std::string transcript;
  std::string conclusion;
  SessionArgs session;
};

int cmd_ground(const GroundArgs& a, std::ostream& out, std::ostream& err) {
  const auto matrix = load_matrix(a.matrix);
  const auto full = parse_library(read_file(a.library));
  if (!full.contains(ctx::kFunctionList)) {
    throw Error(ErrorCode::UnknownContext, "context library has no function_list");
  }
  full.functions();
  const auto lib = apply_setting(full, parse_setting(a.setting));
  const auto prompts = load_prompts(a.session.prompts);
  const auto cfg = session_config(a.session);
  const auto spec = BackendSpec::parse(a.session.backend, a.session.seed);
  if (spec.kind == BackendSpec::Kind::None) throw Error(ErrorCode::InvalidArgument, "--backend is required");

  auto backend = spec.session_backend();
  std::ofstream log;
  if (!a.session.debug_log.empty()) {
    log.open(a.session.debug_log, std::ios::app);
    backend = std::make_shared<LoggingBackend>(backend, log, a.session.debug_bodies);
  }

  const auto result = ground_gesture(matrix, lib, prompts, *backend, cfg);
  if (!a.transcript.empty()) write_atomic(a.transcript, result.transcript.to_jsonl());
  const json conclusion = {{"status", to_string(result.status)},
                           {"conclusion", result.conclusion},
                           {"rounds", result.rounds},
                           {"questions", result.questions},
                           {"cause", result.cause}};
  if (!a.conclusion.empty()) write_atomic(a.conclusion, conclusion.dump(2) + "\n");
  out << conclusion.dump() << "\n";
  switch (result.status) {
    case SessionStatus::Concluded: return kOk;
    case SessionStatus::Negative: return kNegative;
    case SessionStatus::TransportFailure:
      err << "transport failure: " << result.cause << "\n";
      return kTransportFailure;
  }
  return kOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string settings = "baseline,only_gaze,only_history_external,all";
  int repetitions = 3;
  unsigned jobs = 1;
  std::string thresholds;
  std::string segmentation;
  std::string out_json;
  std::string out_csv;
  std::string transcripts;
  SessionArgs session;
};

std::vector<ContextSetting> parse_settings(const std::string& list) {
  std::vector<ContextSetting> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto s = parse_setting(item);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no context settings selected");
  return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto tasks = parse_manifest(read_file(a.manifest), fs::path(a.manifest).parent_path());
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "manifest has no tasks");
  const auto settings = parse_settings(a.settings);
  const auto prompts = load_prompts(a.session.prompts);
  const auto spec = BackendSpec::parse(a.session.backend, a.session.seed);

  // Per-task fixture files take precedence over --backend.
  std::map<std::string, std::vector<ScriptedBackend::Fixture>> task_fixtures;
  for (const auto& t : tasks) {
    if (!t.fixtures.empty()) {
      task_fixtures[t.id] = parse_fixtures(read_file(t.fixtures));
    } else if (spec.kind == BackendSpec::Kind::None) {
      throw Error(ErrorCode::InvalidArgument, "task " + t.id + " has no fixtures and no --backend was given");
    }
  }
  std::ofstream log;
  if (!a.session.debug_log.empty()) log.open(a.session.debug_log, std::ios::app);
  const BackendFactory factory = [&](const TaskRecord& t, ContextSetting, int) -> std::shared_ptr<ChatBackend> {
    std::shared_ptr<ChatBackend> b;
    if (const auto it = task_fixtures.find(t.id); it != task_fixtures.end()) {
      b = std::make_shared<ScriptedBackend>(it->second);
    } else {
      b = spec.session_backend();
    }
    if (log.is_open()) b = std::make_shared<LoggingBackend>(b, log, a.session.debug_bodies);
    return b;
  };

  EvalOptions opt;
  opt.repetitions = a.repetitions;
  opt.jobs = a.jobs;
  opt.session = session_config(a.session);
  opt.thresholds = load_thresholds(a.thresholds);
  opt.segmentation = load_segmentation(a.segmentation);

  EvalReport report;
  report.tasks = tasks.size();
  report.random_guess = random_guess_baseline(tasks);
  bool starved = false;
  for (const auto s : settings) {
    auto r = run_setting(tasks, s, prompts, factory, opt);
    for (const auto& o : r.outcomes) {
      if (!o.cause.empty()) {
        err << to_string(s) << " task " << o.task_id << " rep " << o.repetition << ": " << o.cause << "\n";
      }
    }
    if (!a.transcripts.empty()) {
      fs::create_directories(a.transcripts);
      for (const auto& o : r.outcomes) {
        const auto name = std::string(to_string(s)) + "_" + o.task_id + "_rep" + std::to_string(o.repetition) + ".jsonl";
        write_atomic(fs::path(a.transcripts) / name, o.transcript_jsonl);
      }
    }
    starved = starved || r.completed() == 0;
    report.settings.push_back(std::move(r));
  }

  const auto csv = report_to_csv(report);
  if (!a.out_json.empty()) write_atomic(a.out_json, report_to_json(report).dump(2) + "\n");
  if (!a.out_csv.empty()) write_atomic(a.out_csv, csv);
  out << csv;
  if (starved) {
    err << "at least one setting completed no task\n";
    return kTransportFailure;
  }
  return kOk;
}

// --- context -----------------------------------------------------------------

struct ContextAddArgs {
  std::string library;
  std::string name;
  std::string description;
  std::string description_file;
  std::string values;
  std::string calculator;
};

int cmd_context_add(const ContextAddArgs& a, std::ostream& out) {
  auto lib = load_library_or_empty(a.library);
  ContextType c;
  c.name = a.name;
  c.description_md = a.description_file.empty() ? a.description : read_file(a.description_file);
  if (!a.values.empty()) {
    try {
      c.values = json::parse(read_file(a.values));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedInput, std::string("values: ") + e.what());
    }
  }
  if (!a.calculator.empty()) c.calculator_id = a.calculator;
  lib.add(std::move(c));
  write_atomic(a.library, serialize_library(lib));
  out << "added " << a.name << " (" << lib.size() << " contexts)\n";
  return kOk;
}

struct ContextShowArgs {
  std::string library;
  std::string name;
  std::string path;
  bool prompt = false;
};

int cmd_context_show(const ContextShowArgs& a, std::ostream& out) {
  const auto lib = parse_library(read_file(a.library));
  if (a.prompt) {
    out << render_library_prompt(lib);
  } else if (!a.name.empty()) {
    out << lib.retrieve(a.name, a.path).dump(2) << "\n";
  } else {
    for (const auto& c : lib.entries()) {
      out << c.name << (c.calculator_id ? " [calculator: " + *c.calculator_id + "]" : "") << "\n";
    }
  }
  return kOk;
}

void add_session_flags(CLI::App* cmd, SessionArgs& s) {
  cmd->add_option("--prompts", s.prompts, "Prompt asset directory (default: shipped prompts)")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--backend", s.backend, "scripted:<fixtures.json> or live:<config.json>");
  cmd->add_option("--max-rounds", s.max_rounds, "Questions allowed before a forced conclusion")
      ->capture_default_str();
  cmd->add_option("--repair-retries", s.repair_retries, "Format-reminder retries per malformed reply")
      ->capture_default_str();
  cmd->add_option("--model", s.model_id, "Model id sent with every request")->capture_default_str();
  cmd->add_option("--seed", s.seed, "Seed for retry jitter")->capture_default_str();
  cmd->add_option("--debug-log", s.debug_log, "Append one JSON line per completion to this file");
  cmd->add_flag("--debug-bodies", s.debug_bodies, "Include redacted message bodies in the debug log");
}

}  // namespace

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f.flush()) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::Io, "cannot replace " + path.string() + ": " + ec.message());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gesture encoding, threshold tuning and LLM grounding", "gestura"};
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Encode a landmark stream into gesture state matrices");
  encode->add_option("stream", enc.stream, "Landmark stream JSON")->required()->check(CLI::ExistingFile);
  encode->add_option("-o,--out", enc.out_dir, "Output directory")->required();
  encode->add_option("--thresholds", enc.thresholds, "Rule thresholds JSON")->check(CLI::ExistingFile);
  encode->add_option("--segmentation", enc.segmentation, "Gesture window config JSON")->check(CLI::ExistingFile);

  TuneArgs tun;
  auto* tune = app.add_subcommand("tune", "Grid-search rule thresholds on a labeled dataset");
  tune->add_option("dataset", tun.dataset, "Labeled samples (JSON lines)")->required()->check(CLI::ExistingFile);
  tune->add_option("-o,--out", tun.out, "Output thresholds JSON")->required();
  tune->add_option("--grid", tun.grid, "Grid specification JSON")->check(CLI::ExistingFile);
  tune->add_option("--base", tun.base, "Starting thresholds JSON")->check(CLI::ExistingFile);
  tune->add_option("--report", tun.report, "Loss report JSON");
  tune->add_option("--unsure-weight", tun.unsure_weight, "Loss of an unsure verdict")->capture_default_str();
  tune->add_option("--error-weight", tun.error_weight, "Loss of a wrong verdict")->capture_default_str();
  tune->add_option("-j,--jobs", tun.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  GroundArgs gnd;
  auto* ground = app.add_subcommand("ground", "Describe a gesture matrix and ground it to a function");
  ground->add_option("matrix", gnd.matrix, "Matrix JSON or text")->required()->check(CLI::ExistingFile);
  ground->add_option("-l,--library", gnd.library, "Context library JSON")->required()->check(CLI::ExistingFile);
  ground->add_option("--setting", gnd.setting, "baseline | only_gaze | only_history_external | all")
      ->capture_default_str();
  ground->add_option("--transcript", gnd.transcript, "Transcript output (JSON lines)");
  ground->add_option("--conclusion", gnd.conclusion, "Conclusion output JSON");
  add_session_flags(ground, gnd.session);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Top-k evaluation over a task manifest");
  eval->add_option("manifest", ev.manifest, "Task manifest JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--settings", ev.settings, "Comma-separated context settings")->capture_default_str();
  eval->add_option("--repetitions", ev.repetitions, "Repetitions per setting")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  eval->add_option("-j,--jobs", ev.jobs, "Concurrent sessions")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--thresholds", ev.thresholds, "Rule thresholds JSON")->check(CLI::ExistingFile);
  eval->add_option("--segmentation", ev.segmentation, "Gesture window config JSON")->check(CLI::ExistingFile);
  eval->add_option("--json", ev.out_json, "Report JSON output");
  eval->add_option("--csv", ev.out_csv, "Report CSV output");
  eval->add_option("--transcripts", ev.transcripts, "Directory for per-session transcripts");
  add_session_flags(eval, ev.session);

  auto* context = app.add_subcommand("context", "Manage a context library file");
  context->require_subcommand(1);
  ContextAddArgs cadd;
  auto* add = context->add_subcommand("add", "Add a context type");
  add->add_option("-l,--library", cadd.library, "Library JSON (created when missing)")->required();
  add->add_option("-n,--name", cadd.name, "Context name")->required();
  auto* desc = add->add_option("-d,--description", cadd.description, "Markdown description");
  auto* desc_file = add->add_option("--description-file", cadd.description_file, "Markdown description file")
                        ->check(CLI::ExistingFile);
  desc->excludes(desc_file);
  add->add_option("--values", cadd.values, "Values JSON file")->check(CLI::ExistingFile);
  add->add_option("--calculator", cadd.calculator, "Calculator id for placeholder calculation");

  ContextShowArgs cshow;
  auto* show = context->add_subcommand("show", "Print a library, one context, or its prompt rendering");
  show->add_option("-l,--library", cshow.library, "Library JSON")->required()->check(CLI::ExistingFile);
  show->add_option("-n,--name", cshow.name, "Context to print");
  show->add_option("--path", cshow.path, "Path inside the context values (a/b/0, first, last)");
  show->add_flag("--prompt", cshow.prompt, "Print the prompt rendering of the library");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  try {
    if (encode->parsed()) return cmd_encode(enc, out);
    if (tune->parsed()) return cmd_tune(tun, out, err);
    if (ground->parsed()) return cmd_ground(gnd, out, err);
    if (eval->parsed()) return cmd_eval(ev, out, err);
    if (add->parsed()) return cmd_context_add(cadd, out);
    if (show->parsed()) return cmd_context_show(cshow, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace gestura::cli
