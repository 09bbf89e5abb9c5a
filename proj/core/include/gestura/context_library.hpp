// SPDX-License-Identifier: Apache-2.0
//
// Named context types served to the context-management agent, plus the
// calculator mechanism that resolves {{CALC:<id>[:<json-args>]}} placeholders.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace gestura {

/// Well-known context names.
namespace ctx {
inline constexpr std::string_view kFunctionList = "function_list";
inline constexpr std::string_view kGaze = "gaze";
inline constexpr std::string_view kHistory = "history";
inline constexpr std::string_view kExternal = "external";
}  // namespace ctx

struct ContextType {
  std::string name;
  std::string description_md;
  nlohmann::json values;
  std::optional<std::string> calculator_id;

  friend bool operator==(const ContextType&, const ContextType&) = default;
};

/// One interface function. `location` has 2 or 3 coordinates.
struct FunctionEntry {
  std::string id;
  std::string name;
  std::vector<double> location;
  std::string device;  // optional grouping, e.g. the appliance a function belongs to
  std::string raw;     // optional raw metadata (for example extracted markup)
};

void to_json(nlohmann::json& j, const FunctionEntry& f);
void from_json(const nlohmann::json& j, FunctionEntry& f);

/// Orders ids numerically when both are integers, lexicographically otherwise.
bool function_id_less(std::string_view a, std::string_view b);

/// Insertion-ordered, name-unique collection of context types. A const
/// library may be read from many threads; `add` needs exclusive access.
class ContextLibrary {
 public:
  /// Throws Error{DuplicateName}, or Error{InvalidArgument} for an empty name/description.
  void add(ContextType ctx);

  bool contains(std::string_view name) const;
  const ContextType& at(std::string_view name) const;  // Error{UnknownContext}

  /// Whole values document, or the sub-tree at `path`. Paths are
  /// '/'-separated object keys or array indices; "first"/"last" address
  /// array ends. Throws Error{UnknownContext} / Error{BadPath}.
  nlohmann::json retrieve(std::string_view name, std::string_view path = {}) const;

  /// Function list entries parsed from the "function_list" context.
  std::vector<FunctionEntry> functions() const;

  /// Copy containing only the named contexts (order preserved).
  ContextLibrary filtered(const std::vector<std::string>& names) const;

  const std::vector<ContextType>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  friend bool operator==(const ContextLibrary&, const ContextLibrary&) = default;

 private:
  std::vector<ContextType> entries_;
};

/// {"contexts":[{"name","description_md","values","calculator_id"}]}
ContextLibrary parse_library(std::string_view raw);
std::string serialize_library(const ContextLibrary& lib);

/// Markdown introduction of every context (names and descriptions, never values).
std::string render_library_prompt(const ContextLibrary& lib);

/// JSON dump of the values of every context, keyed by name.
std::string render_library_values(const ContextLibrary& lib);

// --- calculators -----------------------------------------------------------

struct Placeholder {
  std::string calculator_id;
  nlohmann::json args;  // null when absent
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Parses a single placeholder token. Throws Error{ParseError}.
Placeholder parse_placeholder(std::string_view token);

/// All well-formed placeholders in `text`, in order.
std::vector<Placeholder> find_placeholders(std::string_view text);

/// True when `text` still contains a "{{CALC:" opener.
bool has_unresolved_placeholders(std::string_view text);

using CalculatorFn = std::function<std::string(const ContextLibrary&, const nlohmann::json& args)>;

enum class CalculatorKind { InProcess, ExternalProcess };

struct CalculatorSpec {
  std::string id;
  CalculatorKind kind = CalculatorKind::InProcess;
  CalculatorFn fn;                   // InProcess
  std::vector<std::string> command;  // ExternalProcess argv
  double timeout_s = 30.0;
};

class CalculatorRegistry {
 public:
  /// Registry with the built-in gaze_target and gaze_trace calculators.
  static CalculatorRegistry with_builtins();

  /// Throws Error{DuplicateName}.
  void add(CalculatorSpec spec);
  bool contains(std::string_view id) const;

  /// Runs a calculator. External processes receive
  /// {"library": <library JSON>, "args": <args>} on stdin and answer on
  /// stdout with exit status 0. Throws UnknownCalculator / CalculatorFailure.
  std::string run(std::string_view id, const ContextLibrary& lib, const nlohmann::json& args) const;

 private:
  std::map<std::string, CalculatorSpec, std::less<>> specs_;
};

/// Runs the calculator named by one placeholder token.
std::string calculate(const ContextLibrary& lib, const CalculatorRegistry& registry,
                      std::string_view placeholder);

struct ResolvedText {
  std::string text;
  std::vector<std::string> failures;  // one note per placeholder that could not be computed
};

/// Replaces every placeholder in `text`. Failed calculations are replaced by
/// a bracketed note so the result never contains an unresolved token.
ResolvedText resolve_placeholders(std::string_view text, const ContextLibrary& lib,
                                  const CalculatorRegistry& registry);

/// Gaze aggregation window used by the built-in calculators, in seconds.
inline constexpr double kDefaultGazeWindow = 1.0;

}  // namespace gestura
