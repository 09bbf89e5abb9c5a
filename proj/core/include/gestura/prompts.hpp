// SPDX-License-Identifier: Apache-2.0
//
// Markdown prompt templates for the three agents. Templates use
// {{lowercase_name}} variables; every variable must be bound at render time.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gestura {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Variables referenced by a template, in order of first use.
std::vector<std::string> template_variables(std::string_view tmpl);

/// Single-pass substitution; inserted values are not re-scanned.
/// Throws Error{UnboundTemplateVariable}.
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

/// Body of the markdown section whose heading is `name` (case-insensitive),
/// up to the next heading of the same or higher level. Empty when absent.
std::string section_body(std::string_view markdown, std::string_view name);
bool has_section(std::string_view markdown, std::string_view name);

/// Number of top-level list items ("- ", "* " or "1. ") in a section body.
std::size_t count_list_items(std::string_view section);

struct AgentPromptSet {
  std::string description_pose;
  std::string description_movement;
  std::string inference;
  std::string context;

  /// Reads description_pose.md, description_movement.md, inference.md and
  /// context.md. Throws Error{Io} / Error{MissingPromptSection}.
  static AgentPromptSet load(const std::filesystem::path& dir);

  /// Structural check: pose/movement need Introduction, Procedure, Examples;
  /// inference/context need Introduction, Requirements, Prohibitions, Output Format.
  void validate() const;
};

/// Directory of the prompt assets shipped with the library.
std::filesystem::path default_prompt_dir();

}  // namespace gestura
