// SPDX-License-Identifier: Apache-2.0
#include "gestura/agents.hpp"

namespace gestura {

namespace {

// Index one past the brace that closes the object opened at text[open],
// honouring JSON strings; npos when unbalanced.
std::size_t matching_close(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::optional<nlohmann::json> extract_json_object(std::string_view raw) {
  for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto close = matching_close(raw, open);
    if (close == std::string_view::npos) continue;
    auto doc = nlohmann::json::parse(raw.substr(open, close - open), nullptr, false);
    if (!doc.is_discarded() && doc.is_object()) return doc;
  }
  return std::nullopt;
}

}  // namespace gestura
