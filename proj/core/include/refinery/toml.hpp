#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

/// Minimal TOML subset: [section] / [a.b] headers, key = value with string,
/// integer, float, boolean and flat scalar-array values, and # comments.
/// Keys flatten to dotted paths ("probe.epochs").
class TomlTable {
 public:
  using Value = std::variant<std::int64_t, double, bool, std::string,
                             std::vector<std::int64_t>, std::vector<double>,
                             std::vector<std::string>>;

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::vector<std::int64_t> get_int_array(const std::string& key) const;

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }
  const std::map<std::string, Value>& entries() const { return values_; }

  /// Keys under a dotted prefix (prefix itself excluded).
  std::vector<std::string> keys_under(const std::string& prefix) const;

 private:
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> values_;
};

TomlTable parse_toml(const std::string& text);
TomlTable parse_toml_file(const std::filesystem::path& path);

}  // namespace refinery
