// SPDX-License-Identifier: Apache-2.0
#include "gestura/context_library.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "gestura/error.hpp"

namespace gestura {
namespace {

using nlohmann::json;

std::optional<long long> as_integer(std::string_view s) {
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> out;
  while (!path.empty()) {
    const auto slash = path.find('/');
    const auto part = path.substr(0, slash);
    if (!part.empty()) out.push_back(part);
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return out;
}

}  // namespace

void to_json(json& j, const FunctionEntry& f) {
  j = json{{"id", f.id}, {"name", f.name}, {"location", f.location}};
  if (!f.device.empty()) j["device"] = f.device;
  if (!f.raw.empty()) j["raw"] = f.raw;
}

void from_json(const json& j, FunctionEntry& f) {
  const auto& id = j.at("id");
  f.id = id.is_string() ? id.get<std::string>() : id.dump();
  f.name = j.at("name").get<std::string>();
  f.location = j.value("location", std::vector<double>{});
  f.device = j.value("device", std::string{});
  f.raw = j.value("raw", std::string{});
}

bool function_id_less(std::string_view a, std::string_view b) {
  const auto ia = as_integer(a);
  const auto ib = as_integer(b);
  if (ia && ib && *ia != *ib) return *ia < *ib;
  return a < b;
}

void ContextLibrary::add(ContextType ctx) {
  if (ctx.name.empty()) throw Error(ErrorCode::InvalidArgument, "context name is empty");
  if (ctx.description_md.empty()) {
    throw Error(ErrorCode::InvalidArgument, "context '" + ctx.name + "' needs a description");
  }
  if (contains(ctx.name)) throw Error(ErrorCode::DuplicateName, ctx.name);
  entries_.push_back(std::move(ctx));
}

bool ContextLibrary::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const ContextType& c) { return c.name == name; });
}

const ContextType& ContextLibrary::at(std::string_view name) const {
  for (const auto& c : entries_) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::UnknownContext, std::string(name));
}

json ContextLibrary::retrieve(std::string_view name, std::string_view path) const {
  const json* node = &at(name).values;
  for (const auto part : split_path(path)) {
    const auto bad = [&]() {
      throw Error(ErrorCode::BadPath, std::string(name) + ":" + std::string(path));
    };
    if (node->is_array()) {
      if (node->empty()) bad();
      std::size_t index = 0;
      if (part == "first") {
        index = 0;
      } else if (part == "last") {
        index = node->size() - 1;
      } else if (const auto i = as_integer(part); i && *i >= 0 && static_cast<std::size_t>(*i) < node->size()) {
        index = static_cast<std::size_t>(*i);
      } else {
        bad();
      }
      node = &(*node)[index];
    } else if (node->is_object()) {
      const auto it = node->find(std::string(part));
      if (it == node->end()) bad();
      node = &*it;
    } else {
      bad();
    }
  }
  return *node;
}

std::vector<FunctionEntry> ContextLibrary::functions() const {
  const auto values = retrieve(ctx::kFunctionList);
  if (!values.is_array()) throw Error(ErrorCode::MalformedInput, "function_list values must be an array");
  std::vector<FunctionEntry> out;
  try {
    for (const auto& f : values) out.push_back(f.get<FunctionEntry>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("function entry: ") + e.what());
  }
  return out;
}

ContextLibrary ContextLibrary::filtered(const std::vector<std::string>& names) const {
  ContextLibrary out;
  for (const auto& c : entries_) {
    if (std::find(names.begin(), names.end(), c.name) != names.end()) out.entries_.push_back(c);
  }
  return out;
}

ContextLibrary parse_library(std::string_view raw) {
  ContextLibrary lib;
  try {
    const auto doc = json::parse(raw);
    for (const auto& jc : doc.at("contexts")) {
      ContextType c;
      c.name = jc.at("name").get<std::string>();
      c.description_md = jc.at("description_md").get<std::string>();
      c.values = jc.value("values", json());
      if (jc.contains("calculator_id") && !jc.at("calculator_id").is_null()) {
        c.calculator_id = jc.at("calculator_id").get<std::string>();
      }
      lib.add(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("context library: ") + e.what());
  }
  return lib;
}

std::string serialize_library(const ContextLibrary& lib) {
  json contexts = json::array();
  for (const auto& c : lib.entries()) {
    contexts.push_back({{"name", c.name},
                        {"description_md", c.description_md},
                        {"values", c.values},
                        {"calculator_id", c.calculator_id ? json(*c.calculator_id) : json()}});
  }
  return json{{"contexts", contexts}}.dump(2) + "\n";
}

std::string render_library_prompt(const ContextLibrary& lib) {
  std::ostringstream os;
  os << "## Context Library\n\n"
     << "The following context types are available. Ask for them by name.\n";
  for (const auto& c : lib.entries()) {
    os << "\n### " << c.name << "\n\n" << c.description_md;
    if (c.description_md.back() != '\n') os << '\n';
    if (c.calculator_id) {
      os << "\nCalculation: emit `{{CALC:" << *c.calculator_id
         << "}}` in your answer to insert the computed value.\n";
    }
  }
  return os.str();
}

std::string render_library_values(const ContextLibrary& lib) {
  json values = json::object();
  for (const auto& c : lib.entries()) values[c.name] = c.values;
  return values.dump(2);
}

}  // namespace gestura
