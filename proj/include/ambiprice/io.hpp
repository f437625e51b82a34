#pragma once

// Output formatting and config-document access. Numbers are printed with 17
// significant digits ('.' decimal, no locale dependence) so repeated runs
// are byte-identical; CSV rows end in LF on every platform. Config documents
// are JSON; JsonCursor wraps the parsed tree and reports the full path to
// any missing or mistyped key.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "ambiprice/errors.hpp"

namespace ambiprice {

// Round-trip-exact decimal rendering of a double.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    append_row(out, header);
    for (const auto& row : rows) append_row(out, row);
    return out;
  }

 private:
  static void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }
};

// Read-only view into a parsed config with the document path threaded
// through, so every schema complaint names the offending key.
class JsonCursor {
 public:
  JsonCursor(const nlohmann::json& node, std::string path) : node_(&node), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const nlohmann::json& raw() const { return *node_; }

  bool has(const std::string& key) const {
    return node_->is_object() && node_->contains(key);
  }

  JsonCursor child(const std::string& key) const {
    if (!node_->is_object())
      throw ValidationError("config: " + path_ + " must be an object");
    auto it = node_->find(key);
    if (it == node_->end())
      throw ValidationError("config: missing required key " + join(key));
    return JsonCursor(*it, join(key));
  }

  double as_number() const {
    if (!node_->is_number())
      throw ValidationError("config: " + path_ + " must be a number");
    return node_->get<double>();
  }

  long as_integer() const {
    if (!node_->is_number_integer())
      throw ValidationError("config: " + path_ + " must be an integer");
    return node_->get<long>();
  }

  std::uint64_t as_uint64() const {
    if (!node_->is_number_unsigned() && !(node_->is_number_integer() && node_->get<long long>() >= 0))
      throw ValidationError("config: " + path_ + " must be a non-negative integer");
    return node_->get<std::uint64_t>();
  }

  bool as_bool() const {
    if (!node_->is_boolean())
      throw ValidationError("config: " + path_ + " must be a boolean");
    return node_->get<bool>();
  }

  std::string as_string() const {
    if (!node_->is_string())
      throw ValidationError("config: " + path_ + " must be a string");
    return node_->get<std::string>();
  }

  std::vector<JsonCursor> as_array() const {
    if (!node_->is_array())
      throw ValidationError("config: " + path_ + " must be an array");
    std::vector<JsonCursor> out;
    out.reserve(node_->size());
    for (std::size_t i = 0; i < node_->size(); ++i)
      out.emplace_back((*node_)[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }

  std::vector<double> as_number_array() const {
    std::vector<double> out;
    for (const auto& item : as_array()) out.push_back(item.as_number());
    return out;
  }

 private:
  std::string join(const std::string& key) const { return path_ + "." + key; }

  const nlohmann::json* node_;
  std::string path_;
};

inline nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
  nlohmann::json parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded())
    throw ValidationError("config: " + origin + " is not valid JSON");
  return parsed;
}

}  // namespace ambiprice
