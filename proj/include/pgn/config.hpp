#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pgn/errors.hpp"

// Flat key=value run configuration. '#' starts a comment; sections are plain
// dotted prefixes. Every key must appear in the registry, which carries the
// type, range and default; unknown keys are rejected by name.

namespace pgn {

enum class ConfigType { Int, Float, Bool, Str, Choice };

struct ConfigKey {
  std::string name;
  ConfigType type;
  std::string def;
  double min = 0, max = 0;                // for Int/Float
  std::vector<std::string> choices;       // for Choice
  std::string help;
};

const std::vector<ConfigKey>& config_registry();

class Config {
 public:
  // defaults only
  Config();

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  int64_t get_int(const std::string& key) const;
  double get_float(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_str(const std::string& key) const;

  void set(const std::string& key, const std::string& value);  // validates
  bool is_default(const std::string& key) const;

  // registry-derived help text
  static std::string describe_keys();

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

}  // namespace pgn
