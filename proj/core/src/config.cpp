#include "riccilab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "riccilab/error.hpp"

namespace riccilab {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_atom(std::string_view s) {
  s = trim(s);
  double sign = 1.0;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    if (s.front() == '-') sign = -1.0;
    s.remove_prefix(1);
  }
  if (s == "pi") return sign * std::numbers::pi;
  if (s == "inf") return sign * std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return sign * v;
}

}  // namespace

std::optional<double> parse_scalar(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::size_t pos = 0;
  char op = '*';
  double acc = 1.0;
  while (true) {
    const auto next = text.find_first_of("*/", pos);
    const auto atom = parse_atom(text.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (!atom) return std::nullopt;
    acc = op == '*' ? acc * *atom : acc / *atom;
    if (next == std::string_view::npos) break;
    op = text[next];
    pos = next + 1;
  }
  return acc;
}

Config Config::parse(std::string_view text, std::string_view source) {
  Config cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::config_invalid, fmt::format("{}:{}: expected key = value", source, line_no));
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorCode::config_invalid, fmt::format("{}:{}: empty key", source, line_no));
    cfg.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::config_invalid, fmt::format("cannot read config file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::config_invalid, fmt::format("missing required field '{}'", key));
  used_.insert(key);
  return it->second;
}

std::string Config::get_string(const std::string& key) const { return raw(key); }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const auto& text = raw(key);
  const auto v = parse_scalar(text);
  if (!v || std::isnan(*v)) {
    fail(ErrorCode::config_invalid, fmt::format("field '{}': '{}' is not a number", key, text));
  }
  return *v;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::optional<double> Config::get_optional_double(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_double(key);
}

int Config::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const auto& text = raw(key);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::config_invalid, fmt::format("field '{}': '{}' is not an integer", key, text));
  }
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& text = raw(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::config_invalid, fmt::format("field '{}': '{}' is not an unsigned 64-bit integer", key, text));
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& text = raw(key);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorCode::config_invalid, fmt::format("field '{}': '{}' is not a boolean", key, text));
}

Vec Config::get_vec(const std::string& key) const {
  const auto& text = raw(key);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::config_invalid, fmt::format("field '{}': '{}' is not a JSON array", key, text));
  }
  if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) {
    fail(ErrorCode::config_invalid, fmt::format("field '{}': expected 1..{} numbers", key, kMaxDim));
  }
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(ErrorCode::config_invalid, fmt::format("field '{}': entries must be numbers", key));
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

std::optional<Vec> Config::get_optional_vec(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_vec(key);
}

void Config::check_all_used() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) fail(ErrorCode::config_invalid, fmt::format("unknown field '{}'", key));
  }
}

}  // namespace riccilab
