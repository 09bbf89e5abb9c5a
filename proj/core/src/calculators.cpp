// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "gestura/context_library.hpp"
#include "gestura/error.hpp"
#include "subprocess.hpp"

namespace gestura {
namespace {

using nlohmann::json;

constexpr std::string_view kOpener = "{{CALC:";
constexpr std::string_view kCloser = "}}";

bool is_id_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '-' || c == '.';
}

// Parses a placeholder starting at text[pos] (which must be the opener).
std::optional<Placeholder> parse_at(std::string_view text, std::size_t pos) {
  if (text.substr(pos, kOpener.size()) != kOpener) return std::nullopt;
  std::size_t i = pos + kOpener.size();
  const std::size_t id_start = i;
  while (i < text.size() && is_id_char(text[i])) ++i;
  if (i == id_start) return std::nullopt;
  Placeholder p;
  p.calculator_id = std::string(text.substr(id_start, i - id_start));
  p.offset = pos;
  if (text.substr(i, kCloser.size()) == kCloser) {
    p.length = i + kCloser.size() - pos;
    return p;
  }
  if (i >= text.size() || text[i] != ':') return std::nullopt;
  const std::size_t args_start = i + 1;
  // JSON arguments may themselves contain "}}"; take the first closer that
  // leaves a parseable document.
  for (auto close = text.find(kCloser, args_start); close != std::string_view::npos;
       close = text.find(kCloser, close + 1)) {
    const auto candidate = text.substr(args_start, close - args_start);
    auto args = json::parse(candidate, nullptr, false);
    if (!args.is_discarded()) {
      p.args = std::move(args);
      p.length = close + kCloser.size() - pos;
      return p;
    }
  }
  return std::nullopt;
}

struct GazeSample {
  double t = 0.0;
  std::vector<double> position;
};

std::vector<GazeSample> gaze_samples(const ContextLibrary& lib) {
  if (!lib.contains(ctx::kGaze)) throw Error(ErrorCode::CalculatorFailure, "no gaze context");
  const auto values = lib.retrieve(ctx::kGaze);
  if (!values.is_array()) throw Error(ErrorCode::CalculatorFailure, "gaze values must be an array");
  std::vector<GazeSample> out;
  for (const auto& s : values) {
    GazeSample g;
    g.t = s.value("t", 0.0);
    if (s.contains("position")) {
      g.position = s.at("position").get<std::vector<double>>();
    } else {
      for (const char* axis : {"x", "y", "z"}) {
        if (s.contains(axis)) g.position.push_back(s.at(axis).get<double>());
      }
    }
    if (g.position.empty()) throw Error(ErrorCode::CalculatorFailure, "gaze sample without coordinates");
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GazeSample> recent(std::vector<GazeSample> samples, double window) {
  if (samples.empty()) return samples;
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) last = std::max(last, s.t);
  std::erase_if(samples, [&](const GazeSample& s) { return s.t < last - window; });
  return samples;
}

double window_arg(const json& args) {
  if (args.is_object() && args.contains("window")) return args.at("window").get<double>();
  return kDefaultGazeWindow;
}

std::string gaze_target(const ContextLibrary& lib, const json& args) {
  const auto samples = recent(gaze_samples(lib), window_arg(args));
  if (samples.empty()) throw Error(ErrorCode::CalculatorFailure, "no gaze samples");
  const std::size_t dims = samples.front().position.size();
  std::vector<double> centroid(dims, 0.0);
  for (const auto& s : samples) {
    if (s.position.size() != dims) throw Error(ErrorCode::CalculatorFailure, "mixed gaze dimensions");
    for (std::size_t d = 0; d < dims; ++d) centroid[d] += s.position[d];
  }
  for (auto& c : centroid) c /= static_cast<double>(samples.size());

  const auto functions = lib.functions();
  const FunctionEntry* best = nullptr;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const auto& f : functions) {
    const std::size_t n = std::min(dims, f.location.size());
    if (n == 0) continue;
    double d2 = 0.0;
    for (std::size_t d = 0; d < n; ++d) d2 += (f.location[d] - centroid[d]) * (f.location[d] - centroid[d]);
    if (d2 < best_d2 || (d2 == best_d2 && best && function_id_less(f.id, best->id))) {
      best_d2 = d2;
      best = &f;
    }
  }
  if (best == nullptr) throw Error(ErrorCode::CalculatorFailure, "no function has a location");
  return best->device.empty() ? best->name : best->device;
}

std::string gaze_trace(const ContextLibrary& lib, const json& args) {
  json out = json::array();
  for (const auto& s : recent(gaze_samples(lib), window_arg(args))) {
    out.push_back({{"t", s.t}, {"position", s.position}});
  }
  return out.dump();
}

}  // namespace

Placeholder parse_placeholder(std::string_view token) {
  auto p = parse_at(token, 0);
  if (!p || p->length != token.size()) {
    throw Error(ErrorCode::ParseError, "malformed placeholder '" + std::string(token) + "'");
  }
  return *p;
}

std::vector<Placeholder> find_placeholders(std::string_view text) {
  std::vector<Placeholder> out;
  for (auto pos = text.find(kOpener); pos != std::string_view::npos;) {
    if (auto p = parse_at(text, pos)) {
      out.push_back(*p);
      pos = text.find(kOpener, pos + p->length);
    } else {
      pos = text.find(kOpener, pos + 1);
    }
  }
  return out;
}

bool has_unresolved_placeholders(std::string_view text) {
  return text.find(kOpener) != std::string_view::npos;
}

CalculatorRegistry CalculatorRegistry::with_builtins() {
  CalculatorRegistry r;
  r.add({"gaze_target", CalculatorKind::InProcess, gaze_target, {}, 0.0});
  r.add({"gaze_trace", CalculatorKind::InProcess, gaze_trace, {}, 0.0});
  return r;
}

void CalculatorRegistry::add(CalculatorSpec spec) {
  if (spec.id.empty()) throw Error(ErrorCode::InvalidArgument, "calculator id is empty");
  if (specs_.contains(spec.id)) throw Error(ErrorCode::DuplicateName, "calculator " + spec.id);
  const auto id = spec.id;
  specs_.emplace(id, std::move(spec));
}

bool CalculatorRegistry::contains(std::string_view id) const { return specs_.find(id) != specs_.end(); }

std::string CalculatorRegistry::run(std::string_view id, const ContextLibrary& lib,
                                    const json& args) const {
  const auto it = specs_.find(id);
  if (it == specs_.end()) throw Error(ErrorCode::UnknownCalculator, std::string(id));
  const auto& spec = it->second;
  if (spec.kind == CalculatorKind::InProcess) {
    try {
      return spec.fn(lib, args);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CalculatorFailure) throw;
      throw Error(ErrorCode::CalculatorFailure, spec.id + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::CalculatorFailure, spec.id + ": " + e.what());
    }
  }
  const json input = {{"library", json::parse(serialize_library(lib))}, {"args", args}};
  const auto result = detail::run_process(spec.command, input.dump(), spec.timeout_s);
  if (result.timed_out) throw Error(ErrorCode::CalculatorFailure, spec.id + ": timed out");
  if (result.exit_code != 0) {
    throw Error(ErrorCode::CalculatorFailure,
                spec.id + ": exit " + std::to_string(result.exit_code) + ": " + result.err);
  }
  auto text = result.out;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string calculate(const ContextLibrary& lib, const CalculatorRegistry& registry,
                      std::string_view placeholder) {
  const auto p = parse_placeholder(placeholder);
  return registry.run(p.calculator_id, lib, p.args);
}

ResolvedText resolve_placeholders(std::string_view text, const ContextLibrary& lib,
                                  const CalculatorRegistry& registry) {
  ResolvedText out;
  std::size_t cursor = 0;
  for (auto pos = text.find(kOpener); pos != std::string_view::npos; pos = text.find(kOpener, cursor)) {
    out.text.append(text.substr(cursor, pos - cursor));
    if (const auto p = parse_at(text, pos)) {
      try {
        auto value = registry.run(p->calculator_id, lib, p->args);
        // A calculator must not be able to inject a new placeholder.
        for (auto at = value.find(kOpener); at != std::string::npos; at = value.find(kOpener, at)) {
          value.replace(at, 2, "{ {");
        }
        out.text += value;
      } catch (const Error& e) {
        out.failures.push_back(e.what());
        out.text += "[calculation unavailable: " + std::string(to_string(e.code())) + "]";
      }
      cursor = pos + p->length;
    } else {
      const auto close = text.find(kCloser, pos);
      out.failures.push_back("malformed placeholder");
      out.text += "[calculation unavailable: malformed placeholder]";
      cursor = close == std::string_view::npos ? text.size() : close + kCloser.size();
    }
  }
  out.text.append(text.substr(cursor));
  return out;
}

}  // namespace gestura
