#include "tagalign/toml_lite.hpp"

#include <cctype>
#include <cstdlib>

namespace tagalign {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

// strips a trailing comment, respecting double-quoted strings
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    else if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

}  // namespace

TomlTable TomlTable::parse(std::string_view text) {
  TomlTable table;
  std::string prefix;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated table header", line_no);
      prefix = std::string(trim(line.substr(1, line.size() - 2)));
      if (prefix.empty()) throw ParseError("empty table name", line_no);
      prefix += '.';
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected key = value", line_no);
    }
    const std::string key = prefix + std::string(trim(line.substr(0, eq)));
    const std::string_view rhs = trim(line.substr(eq + 1));
    if (key == prefix || rhs.empty()) {
      throw ParseError("malformed key = value", line_no);
    }

    auto parse_scalar = [&](std::string_view tok) -> Value {
      Value v;
      tok = trim(tok);
      if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
        v.type = Value::Type::kString;
        v.str = std::string(tok.substr(1, tok.size() - 2));
        return v;
      }
      if (tok == "true" || tok == "false") {
        v.type = Value::Type::kBool;
        v.boolean = tok == "true";
        return v;
      }
      std::string buf(tok);
      char* end = nullptr;
      v.number = std::strtod(buf.c_str(), &end);
      if (end != buf.c_str() + buf.size() || buf.empty()) {
        throw ParseError("cannot parse value '" + buf + "'", line_no);
      }
      v.type = Value::Type::kNumber;
      return v;
    };

    Value value;
    if (rhs.front() == '[') {
      if (rhs.back() != ']') throw ParseError("unterminated array", line_no);
      value.type = Value::Type::kArray;
      std::string_view body = trim(rhs.substr(1, rhs.size() - 2));
      std::size_t start = 0;
      while (start < body.size()) {
        std::size_t comma = body.find(',', start);
        if (comma == std::string_view::npos) comma = body.size();
        const std::string_view item = trim(body.substr(start, comma - start));
        if (!item.empty()) value.array.push_back(parse_scalar(item));
        start = comma + 1;
      }
    } else {
      value = parse_scalar(rhs);
    }
    table.values_[key] = std::move(value);
  }
  return table;
}

const TomlTable::Value& TomlTable::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigInvalid("missing config key '" + key + "'");
  return it->second;
}

std::string TomlTable::get_string(const std::string& key) const {
  const Value& v = require(key);
  if (v.type != Value::Type::kString) {
    throw ConfigInvalid("config key '" + key + "' is not a string");
  }
  return v.str;
}

std::string TomlTable::get_string(const std::string& key,
                                  const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const Value& v = require(key);
  if (v.type != Value::Type::kNumber) {
    throw ConfigInvalid("config key '" + key + "' is not a number");
  }
  return v.number;
}

std::int64_t TomlTable::get_int(const std::string& key, std::int64_t fallback) const {
  return static_cast<std::int64_t>(get_double(key, static_cast<double>(fallback)));
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Value& v = require(key);
  if (v.type != Value::Type::kBool) {
    throw ConfigInvalid("config key '" + key + "' is not a boolean");
  }
  return v.boolean;
}

std::vector<std::string> TomlTable::get_string_array(const std::string& key) const {
  const Value& v = require(key);
  if (v.type != Value::Type::kArray) {
    throw ConfigInvalid("config key '" + key + "' is not an array");
  }
  std::vector<std::string> out;
  for (const Value& item : v.array) {
    if (item.type != Value::Type::kString) {
      throw ConfigInvalid("config key '" + key + "' must hold strings");
    }
    out.push_back(item.str);
  }
  return out;
}

std::vector<double> TomlTable::get_double_array(const std::string& key) const {
  const Value& v = require(key);
  if (v.type != Value::Type::kArray) {
    throw ConfigInvalid("config key '" + key + "' is not an array");
  }
  std::vector<double> out;
  for (const Value& item : v.array) {
    if (item.type != Value::Type::kNumber) {
      throw ConfigInvalid("config key '" + key + "' must hold numbers");
    }
    out.push_back(item.number);
  }
  return out;
}

}  // namespace tagalign
