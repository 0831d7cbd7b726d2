#include "refinery/toml.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace refinery {

namespace {

std::string strip(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace((unsigned char)s[a])) ++a;
  while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
  return s.substr(a, b - a);
}

// Removes a trailing comment that is not inside a basic string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& msg) {
  throw Error(ErrorKind::config,
              "toml: line " + std::to_string(line_no) + ": " + msg);
}

bool looks_like_int(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit((unsigned char)s[i]) && s[i] != '_') return false;
  }
  return true;
}

TomlTable::Value parse_scalar(const std::string& raw, std::size_t line_no) {
  const std::string s = strip(raw);
  if (s.empty()) fail(line_no, "empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line_no, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        ++i;
        switch (s[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(line_no, "unsupported escape");
        }
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  std::string digits = s;
  digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
  if (looks_like_int(s)) {
    try {
      return std::int64_t(std::stoll(digits));
    } catch (const std::exception&) {
      fail(line_no, "integer out of range");
    }
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(digits, &used);
    if (used != digits.size()) fail(line_no, "bad value '" + s + "'");
    return d;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(line_no, "bad value '" + s + "'");
  }
}

std::vector<std::string> split_array_items(const std::string& body,
                                           std::size_t line_no) {
  std::vector<std::string> items;
  std::string current;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (in_string) fail(line_no, "unterminated string in array");
  if (!strip(current).empty()) items.push_back(current);
  return items;
}

TomlTable::Value parse_value(const std::string& raw, std::size_t line_no) {
  const std::string s = strip(raw);
  if (s.empty()) fail(line_no, "empty value");
  if (s.front() != '[') return parse_scalar(s, line_no);
  if (s.back() != ']') fail(line_no, "unterminated array");
  const auto items = split_array_items(s.substr(1, s.size() - 2), line_no);
  std::vector<std::int64_t> ints;
  std::vector<double> doubles;
  std::vector<std::string> strings;
  bool any_double = false, any_string = false;
  for (const auto& item : items) {
    const auto v = parse_scalar(item, line_no);
    if (std::holds_alternative<std::string>(v)) {
      any_string = true;
      strings.push_back(std::get<std::string>(v));
    } else if (std::holds_alternative<double>(v)) {
      any_double = true;
      doubles.push_back(std::get<double>(v));
    } else if (std::holds_alternative<std::int64_t>(v)) {
      ints.push_back(std::get<std::int64_t>(v));
      doubles.push_back(double(std::get<std::int64_t>(v)));
    } else {
      fail(line_no, "unsupported array element");
    }
  }
  if (any_string) {
    if (strings.size() != items.size()) fail(line_no, "mixed array types");
    return strings;
  }
  if (any_double) {
    if (doubles.size() != items.size()) fail(line_no, "mixed array types");
    return doubles;
  }
  return ints;
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    line = strip(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = strip(line.substr(1, line.size() - 2));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    std::string key = strip(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    if (!section.empty()) key = section + "." + key;
    table.set(key, parse_value(line.substr(eq + 1), line_no));
  }
  return table;
}

TomlTable parse_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

const TomlTable::Value* TomlTable::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::int64_t TomlTable::get_int(const std::string& key,
                                std::int64_t fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* i = std::get_if<std::int64_t>(v)) return *i;
  throw Error(ErrorKind::config, "toml: key '" + key + "' is not an integer");
}

double TomlTable::get_double(const std::string& key, double fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* d = std::get_if<double>(v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(v)) return double(*i);
  throw Error(ErrorKind::config, "toml: key '" + key + "' is not a number");
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* b = std::get_if<bool>(v)) return *b;
  throw Error(ErrorKind::config, "toml: key '" + key + "' is not a boolean");
}

std::string TomlTable::get_string(const std::string& key,
                                  const std::string& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (const auto* s = std::get_if<std::string>(v)) return *s;
  throw Error(ErrorKind::config, "toml: key '" + key + "' is not a string");
}

std::vector<std::int64_t> TomlTable::get_int_array(
    const std::string& key) const {
  const Value* v = find(key);
  if (!v) return {};
  if (const auto* a = std::get_if<std::vector<std::int64_t>>(v)) return *a;
  if (const auto* i = std::get_if<std::int64_t>(v)) return {*i};
  throw Error(ErrorKind::config,
              "toml: key '" + key + "' is not an integer array");
}

std::vector<std::string> TomlTable::keys_under(
    const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string p = prefix + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(p, 0) == 0) out.push_back(key);
  }
  return out;
}

}  // namespace refinery
