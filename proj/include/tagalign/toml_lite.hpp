#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tagalign/errors.hpp"

namespace tagalign {

/// Minimal TOML reader covering what the pipeline configs need:
/// [table] headers, bare keys, strings, numbers, booleans, and flat arrays.
/// Keys are exposed fully qualified ("table.key").
class TomlTable {
 public:
  static TomlTable parse(std::string_view text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_string_array(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;

 private:
  struct Value {
    enum class Type { kString, kNumber, kBool, kArray } type = Type::kString;
    std::string str;
    double number = 0.0;
    bool boolean = false;
    std::vector<Value> array;
  };

  const Value& require(const std::string& key) const;

  std::map<std::string, Value> values_;
};

}  // namespace tagalign
