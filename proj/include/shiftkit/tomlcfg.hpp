//
// ShiftKit - Copyright 2026 The ShiftKit Authors
// SPDX-License-Identifier: Apache-2.0
//

#ifndef SHIFTKIT_TOMLCFG_HPP
#define SHIFTKIT_TOMLCFG_HPP

#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shiftkit {

/// Flat TOML subset, enough for the config files this project reads:
/// [section] headers, bare keys, numbers, booleans, quoted strings and
/// arrays of numbers. Keys are stored as "section.key".
class TomlTable {
public:
  static TomlTable parse(std::string_view text) {
    TomlTable table;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos)
        eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      line = strip(line);
      if (line.empty() || line.front() == '#')
        continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::runtime_error("toml line " + std::to_string(line_no) + ": bad section");
        section = std::string(strip(line.substr(1, line.size() - 2)));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos)
        throw std::runtime_error("toml line " + std::to_string(line_no) + ": expected key = value");
      std::string key(strip(line.substr(0, eq)));
      std::string_view value = strip(line.substr(eq + 1));
      if (std::size_t hash = find_comment(value); hash != std::string_view::npos)
        value = strip(value.substr(0, hash));
      if (!section.empty())
        key = section + "." + key;
      table.values_[key] = std::string(value);
    }
    return table;
  }

  bool contains(const std::string &key) const { return values_.count(key) > 0; }

  std::optional<double> get_double(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      return std::nullopt;
    return std::stod(it->second);
  }

  std::optional<std::int64_t> get_int(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      return std::nullopt;
    return std::stoll(it->second);
  }

  std::optional<bool> get_bool(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      return std::nullopt;
    if (it->second == "true")
      return true;
    if (it->second == "false")
      return false;
    throw std::runtime_error("toml key " + key + ": expected true/false");
  }

  std::optional<std::string> get_string(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      return std::nullopt;
    std::string_view v = it->second;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
      v = v.substr(1, v.size() - 2);
    return std::string(v);
  }

  std::optional<std::vector<double>> get_array(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      return std::nullopt;
    std::string_view v = strip(it->second);
    if (v.empty() || v.front() != '[' || v.back() != ']')
      throw std::runtime_error("toml key " + key + ": expected an array");
    v = v.substr(1, v.size() - 2);
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
      std::size_t comma = v.find(',', start);
      if (comma == std::string_view::npos)
        comma = v.size();
      std::string_view item = strip(v.substr(start, comma - start));
      if (!item.empty())
        out.push_back(std::stod(std::string(item)));
      start = comma + 1;
    }
    return out;
  }

  const std::map<std::string, std::string> &raw() const { return values_; }

private:
  static std::string_view strip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
      s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
      s.remove_suffix(1);
    return s;
  }

  // '#' starts a comment unless inside a quoted string
  static std::size_t find_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"')
        quoted = !quoted;
      else if (s[i] == '#' && !quoted)
        return i;
    }
    return std::string_view::npos;
  }

  std::map<std::string, std::string> values_;
};

} // namespace shiftkit

#endif // SHIFTKIT_TOMLCFG_HPP
