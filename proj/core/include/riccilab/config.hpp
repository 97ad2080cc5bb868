#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "riccilab/types.hpp"

namespace riccilab {

/// Flat key=value configuration. Lines are `key = value`; `#` starts a
/// comment; blank lines are ignored. Values run to the end of the line, so
/// manifold ids with commas and brackets need no quoting.
///
/// Every typed getter marks its key as used; check_all_used() then rejects
/// keys nothing asked for (usually typos). All failures are config_invalid
/// and name the key.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, std::string_view source = "<string>");
  static Config load(const std::string& path);

  /// Later values replace earlier ones (command-line overrides).
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Decimal numbers, `pi`, products `a*b` and quotients `a/b` of those.
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::optional<double> get_optional_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// JSON array of numbers, e.g. [0.5, 1].
  Vec get_vec(const std::string& key) const;
  std::optional<Vec> get_optional_vec(const std::string& key) const;

  void check_all_used() const;

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

/// Parses a scalar in the syntax accepted by get_double; nullopt on error.
std::optional<double> parse_scalar(std::string_view text);

}  // namespace riccilab
