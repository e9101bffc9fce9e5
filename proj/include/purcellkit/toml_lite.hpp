#pragma once

#include <cctype>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace purcellkit {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace toml_detail {

inline ConfigError err(std::size_t line, const std::string& msg) {
  return ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Removes a trailing comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline bool valid_bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

inline std::vector<std::string> split_dotted(const std::string& key,
                                             std::size_t line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : key) {
    if (c == '.') {
      parts.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(strip(cur));
  for (const auto& p : parts)
    if (!valid_bare_key(p))
      throw err(line, "invalid key '" + key + "'");
  return parts;
}

inline std::string parse_string(const std::string& s, std::size_t line) {
  if (s.size() < 2 || s.back() != '"')
    throw err(line, "unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      if (i + 2 >= s.size()) throw err(line, "dangling escape");
      char e = s[++i];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: throw err(line, std::string("unsupported escape \\") + e);
      }
    } else if (c == '"') {
      throw err(line, "unexpected quote inside string");
    } else {
      out += c;
    }
  }
  return out;
}

inline nlohmann::json parse_value(const std::string& raw, std::size_t line);

inline nlohmann::json parse_array(const std::string& s, std::size_t line) {
  nlohmann::json arr = nlohmann::json::array();
  if (s.size() < 2 || s.back() != ']') throw err(line, "unterminated array");
  const std::string inner = strip(s.substr(1, s.size() - 2));
  if (inner.empty()) return arr;
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  int depth = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    char c = inner[i];
    if (c == '"' && (i == 0 || inner[i - 1] != '\\')) quoted = !quoted;
    if (!quoted) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        items.push_back(cur);
        cur.clear();
        continue;
      }
    }
    cur += c;
  }
  items.push_back(cur);
  for (auto& item : items) {
    const std::string v = strip(item);
    if (v.empty()) throw err(line, "empty array element");
    arr.push_back(parse_value(v, line));
  }
  if (!arr.empty()) {
    const auto kind = arr.front().type();
    for (const auto& v : arr)
      if (v.type() != kind &&
          !(v.is_number() && arr.front().is_number()))
        throw err(line, "arrays must hold one scalar type");
  }
  return arr;
}

inline nlohmann::json parse_value(const std::string& raw, std::size_t line) {
  const std::string s = strip(raw);
  if (s.empty()) throw err(line, "missing value");
  if (s.front() == '"') return parse_string(s, line);
  if (s.front() == '[') return parse_array(s, line);
  if (s.front() == '{') throw err(line, "inline tables are not supported");
  if (s == "true") return true;
  if (s == "false") return false;

  std::size_t pos = 0;
  try {
    const long long i = std::stoll(s, &pos);
    if (pos == s.size()) return i;
  } catch (const std::exception&) {
  }
  try {
    const double d = std::stod(s, &pos);
    if (pos == s.size()) return d;
  } catch (const std::exception&) {
  }
  throw err(line, "cannot parse value '" + s + "'");
}

inline nlohmann::json* descend(nlohmann::json& root,
                               const std::vector<std::string>& path,
                               std::size_t line) {
  nlohmann::json* node = &root;
  for (const auto& p : path) {
    if (node->is_array()) node = &node->back();
    if (!node->is_object()) throw err(line, "key path crosses a value");
    if (!node->contains(p)) (*node)[p] = nlohmann::json::object();
    node = &(*node)[p];
  }
  if (node->is_array()) node = &node->back();
  return node;
}

}  // namespace toml_detail

// Subset of TOML sufficient for run configs: comments, [tables],
// [[arrays of tables]], dotted keys, strings, numbers, booleans, and
// single-line homogeneous scalar arrays. Anything else is a config error.
inline nlohmann::json parse_toml_lite(const std::string& text) {
  using namespace toml_detail;
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* table = &root;

  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    ++lineno;
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = strip(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool array_table = line.size() > 1 && line[1] == '[';
      const std::string close = array_table ? "]]" : "]";
      if (line.size() < 2 + close.size() ||
          line.substr(line.size() - close.size()) != close)
        throw err(lineno, "malformed table header");
      const std::string name = strip(line.substr(
          array_table ? 2 : 1, line.size() - 2 * (array_table ? 2 : 1)));
      const auto path = split_dotted(name, lineno);

      nlohmann::json* node = &root;
      for (std::size_t i = 0; i < path.size(); ++i) {
        if (node->is_array()) node = &node->back();
        const bool last = i + 1 == path.size();
        auto& slot = (*node)[path[i]];
        if (last && array_table) {
          if (slot.is_null()) slot = nlohmann::json::array();
          if (!slot.is_array()) throw err(lineno, "'" + name + "' is not an array of tables");
          slot.push_back(nlohmann::json::object());
          node = &slot.back();
        } else {
          if (slot.is_null()) slot = nlohmann::json::object();
          node = &slot;
        }
      }
      if (node->is_array()) node = &node->back();
      if (!node->is_object())
        throw err(lineno, "table '" + name + "' collides with a value");
      table = node;
      continue;
    }

    bool quoted = false;
    std::size_t eq = std::string::npos;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '=' && !quoted) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos) throw err(lineno, "expected key = value");
    const auto path = split_dotted(strip(line.substr(0, eq)), lineno);
    const nlohmann::json value = parse_value(line.substr(eq + 1), lineno);

    nlohmann::json* node = table;
    if (path.size() > 1)
      node = descend(*table, {path.begin(), path.end() - 1}, lineno);
    if (node->contains(path.back()))
      throw err(lineno, "duplicate key '" + path.back() + "'");
    (*node)[path.back()] = value;
  }
  return root;
}

}  // namespace purcellkit
