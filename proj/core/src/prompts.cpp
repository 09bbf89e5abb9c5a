// SPDX-License-Identifier: Apache-2.0
#include "gestura/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gestura/error.hpp"

#ifndef GESTURA_PROMPT_DIR
#define GESTURA_PROMPT_DIR "prompts"
#endif

namespace gestura {
namespace {

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";

bool is_var_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Length of a variable token at tmpl[pos], 0 if none.
std::size_t var_token(std::string_view tmpl, std::size_t pos, std::string_view* name) {
  if (tmpl.substr(pos, kOpen.size()) != kOpen) return 0;
  std::size_t i = pos + kOpen.size();
  if (i >= tmpl.size() || !(tmpl[i] >= 'a' && tmpl[i] <= 'z')) return 0;
  const std::size_t start = i;
  while (i < tmpl.size() && is_var_char(tmpl[i])) ++i;
  if (tmpl.substr(i, kClose.size()) != kClose) return 0;
  *name = tmpl.substr(start, i - start);
  return i + kClose.size() - pos;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct Heading {
  int level = 0;
  std::string_view title;
};

Heading heading_of(std::string_view line) {
  int level = 0;
  while (static_cast<std::size_t>(level) < line.size() && line[level] == '#') ++level;
  if (level == 0 || static_cast<std::size_t>(level) >= line.size() || line[level] != ' ') return {};
  return {level, trim(line.substr(level))};
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    out.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require(std::string_view doc, std::string_view file, std::initializer_list<std::string_view> sections) {
  for (const auto s : sections) {
    if (!has_section(doc, s)) {
      throw Error(ErrorCode::MissingPromptSection, std::string(file) + " lacks section '" + std::string(s) + "'");
    }
  }
}

}  // namespace

std::vector<std::string> template_variables(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t pos = tmpl.find(kOpen); pos != std::string_view::npos; pos = tmpl.find(kOpen, pos + 1)) {
    std::string_view name;
    if (var_token(tmpl, pos, &name) == 0) continue;
    if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
  }
  return out;
}

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t cursor = 0;
  for (std::size_t pos = tmpl.find(kOpen); pos != std::string_view::npos; pos = tmpl.find(kOpen, pos + 1)) {
    if (pos < cursor) continue;
    std::string_view name;
    const auto len = var_token(tmpl, pos, &name);
    if (len == 0) continue;
    const auto it = vars.find(name);
    if (it == vars.end()) throw Error(ErrorCode::UnboundTemplateVariable, std::string(name));
    out.append(tmpl.substr(cursor, pos - cursor));
    out += it->second;
    cursor = pos + len;
  }
  out.append(tmpl.substr(cursor));
  return out;
}

std::string section_body(std::string_view markdown, std::string_view name) {
  const auto wanted = lower(name);
  std::string body;
  int level = 0;
  for (const auto line : lines_of(markdown)) {
    const auto h = heading_of(line);
    if (level > 0) {
      if (h.level > 0 && h.level <= level) break;
      body.append(line);
      body += '\n';
    } else if (h.level > 0 && lower(h.title) == wanted) {
      level = h.level;
    }
  }
  return body;
}

bool has_section(std::string_view markdown, std::string_view name) {
  const auto wanted = lower(name);
  for (const auto line : lines_of(markdown)) {
    const auto h = heading_of(line);
    if (h.level > 0 && lower(h.title) == wanted) return true;
  }
  return false;
}

std::size_t count_list_items(std::string_view section) {
  std::size_t n = 0;
  for (const auto line : lines_of(section)) {
    if (line.starts_with("- ") || line.starts_with("* ")) {
      ++n;
      continue;
    }
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && line.substr(i, 2) == ". ") ++n;
  }
  return n;
}

AgentPromptSet AgentPromptSet::load(const std::filesystem::path& dir) {
  AgentPromptSet p;
  p.description_pose = read_file(dir / "description_pose.md");
  p.description_movement = read_file(dir / "description_movement.md");
  p.inference = read_file(dir / "inference.md");
  p.context = read_file(dir / "context.md");
  p.validate();
  return p;
}

void AgentPromptSet::validate() const {
  require(description_pose, "description_pose.md", {"Introduction", "Procedure", "Examples"});
  require(description_movement, "description_movement.md", {"Introduction", "Procedure", "Examples"});
  require(inference, "inference.md", {"Introduction", "Requirements", "Prohibitions", "Output Format"});
  require(context, "context.md", {"Introduction", "Requirements", "Prohibitions", "Output Format"});
}

std::filesystem::path default_prompt_dir() {
  if (const char* env = std::getenv("GESTURA_PROMPT_DIR"); env != nullptr && *env != '\0') return env;
  return GESTURA_PROMPT_DIR;
}

}  // namespace gestura
