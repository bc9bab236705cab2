#pragma once

// Flat key = value configuration documents (a TOML subset: `[section]`
// headers prefix keys with "section.", values are quoted strings, numbers or
// booleans, `#` starts a comment).

#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include "navprior/errors.hpp"

namespace navprior {

class KeyValueDoc {
 public:
  using Value = std::variant<bool, double, std::string>;

  static KeyValueDoc parse(std::string_view text) {
    KeyValueDoc doc;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string line(text.substr(pos, end - pos));
      pos = end + 1;
      ++line_no;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      auto fail = [&](const std::string& what) {
        return ConfigError("config line " + std::to_string(line_no) + ": " + what);
      };
      if (line.front() == '[') {
        if (line.back() != ']') throw fail("unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw fail("expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string raw = trim(line.substr(eq + 1));
      if (key.empty()) throw fail("empty key");
      if (!section.empty()) key = section + "." + key;
      if (doc.values_.count(key)) throw fail("duplicate key '" + key + "'");
      doc.values_.emplace(key, parse_value(raw, fail));
    }
    return doc;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, Value>& values() const noexcept { return values_; }

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

  double number(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* d = std::get_if<double>(&it->second)) return *d;
    throw ConfigError("config key '" + key + "' must be a number");
  }

  int integer(const std::string& key, int fallback) const {
    const double d = number(key, fallback);
    if (d != static_cast<double>(static_cast<long long>(d))) throw ConfigError("config key '" + key + "' must be an integer");
    return static_cast<int>(d);
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* b = std::get_if<bool>(&it->second)) return *b;
    throw ConfigError("config key '" + key + "' must be true or false");
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    throw ConfigError("config key '" + key + "' must be a quoted string");
  }

 private:
  static std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
  }

  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  template <typename Fail>
  static Value parse_value(const std::string& raw, Fail&& fail) {
    if (raw.empty()) throw fail("missing value");
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') throw fail("unterminated string");
      return raw.substr(1, raw.size() - 2);
    }
    std::string digits;
    for (char c : raw) {
      if (c != '_') digits.push_back(c);
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(digits, &used);
    } catch (const std::exception&) {
      throw fail("cannot parse value '" + raw + "'");
    }
    if (used != digits.size()) throw fail("cannot parse value '" + raw + "'");
    return v;
  }

  std::map<std::string, Value> values_;
};

}  // namespace navprior
