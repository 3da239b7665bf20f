#pragma once

#include <map>
#include <string>
#include <vector>

#include "autr/common.hpp"

namespace autr {

/// Flat key=value configuration. Every consumed key is declared in the
/// schema with a default and a one-line description; unknown keys are
/// rejected at parse time.
class Config {
 public:
  struct KeySpec {
    std::string name;
    std::string def;
    std::string doc;
  };

  Config() = default;

  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;  // effective value
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Canonical rendering: every schema key with its effective value, in
  /// schema order. parse(print(c)) == c.
  std::string print() const;
  void save_file(const std::string& path) const;

  bool operator==(const Config& other) const;

  static const std::vector<KeySpec>& schema();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace autr
