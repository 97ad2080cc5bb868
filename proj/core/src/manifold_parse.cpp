#include <cstdlib>
#include <map>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "riccilab/error.hpp"
#include "riccilab/manifold.hpp"

namespace riccilab {

namespace {

[[noreturn]] void bad_id(std::string_view id, const std::string& why) {
  fail(ErrorCode::invalid_argument, fmt::format("manifold id '{}': {}", id, why));
}

// Splits "a=1,b=[[1,0],[0,1]]" on top-level commas.
std::map<std::string, std::string> split_params(std::string_view id, std::string_view body) {
  std::map<std::string, std::string> out;
  int depth = 0;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    const std::string_view item = body.substr(start, end - start);
    if (item.empty()) return;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) bad_id(id, fmt::format("expected key=value, got '{}'", item));
    const std::string key(item.substr(0, eq));
    if (out.count(key)) bad_id(id, fmt::format("duplicate key '{}'", key));
    out[key] = std::string(item.substr(eq + 1));
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '[') ++depth;
    if (c == ']' && --depth < 0) bad_id(id, "unbalanced brackets");
    if (c == ',' && depth == 0) {
      flush(i);
      start = i + 1;
    }
  }
  if (depth != 0) bad_id(id, "unbalanced brackets");
  flush(body.size());
  return out;
}

double number(std::string_view id, const std::map<std::string, std::string>& params, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) bad_id(id, fmt::format("missing '{}'", key));
  const char* begin = it->second.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') bad_id(id, fmt::format("'{}' is not a number", key));
  return v;
}

nlohmann::json list(std::string_view id, const std::map<std::string, std::string>& params, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) bad_id(id, fmt::format("missing '{}'", key));
  try {
    auto j = nlohmann::json::parse(it->second);
    if (!j.is_array()) bad_id(id, fmt::format("'{}' must be a list", key));
    return j;
  } catch (const nlohmann::json::exception&) {
    bad_id(id, fmt::format("'{}' is not a valid list", key));
  }
}

DeckLattice parse_basis(std::string_view id, const std::map<std::string, std::string>& params) {
  const auto j = list(id, params, "basis");
  const int n = static_cast<int>(j.size());
  if (n < 2 || n > kMaxDim) bad_id(id, "basis must have between 2 and 4 vectors");
  Mat b(n, n);
  for (int c = 0; c < n; ++c) {
    if (!j[c].is_array() || static_cast<int>(j[c].size()) != n) bad_id(id, "basis vectors must have n entries");
    for (int r = 0; r < n; ++r) {
      if (!j[c][r].is_number()) bad_id(id, "basis entries must be numbers");
      b(r, c) = j[c][r].get<double>();
    }
  }
  return DeckLattice(b);
}

void check_keys(std::string_view id, const std::map<std::string, std::string>& params,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : params) {
    bool ok = key == "scale";
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) bad_id(id, fmt::format("unknown parameter '{}'", key));
  }
}

}  // namespace

Manifold Manifold::parse(std::string_view id) {
  const auto colon = id.find(':');
  const std::string_view kind = id.substr(0, colon);
  const auto params = split_params(id, colon == std::string_view::npos ? std::string_view{} : id.substr(colon + 1));

  auto build = [&]() -> Manifold {
    if (kind == "euclidean") {
      check_keys(id, params, {"n"});
      return euclidean(static_cast<int>(number(id, params, "n")));
    }
    if (kind == "sphere") {
      check_keys(id, params, {"n", "K"});
      return sphere(static_cast<int>(number(id, params, "n")), number(id, params, "K"));
    }
    if (kind == "hyperbolic") {
      check_keys(id, params, {"n", "K"});
      return hyperbolic(static_cast<int>(number(id, params, "n")), number(id, params, "K"));
    }
    if (kind == "torus" || kind == "flat_torus") {
      check_keys(id, params, {"basis"});
      return flat_torus(parse_basis(id, params));
    }
    if (kind == "conformal-torus") {
      check_keys(id, params, {"basis", "amp", "period"});
      return conformal_torus(parse_basis(id, params), number(id, params, "amp"), number(id, params, "period"));
    }
    if (kind == "ellipsoid") {
      check_keys(id, params, {"a", "b", "c", "axis"});
      int axis = 2;
      if (auto it = params.find("axis"); it != params.end()) {
        if (it->second == "x") axis = 0;
        else if (it->second == "y") axis = 1;
        else if (it->second == "z") axis = 2;
        else bad_id(id, "axis must be x, y or z");
      }
      return ellipsoid(number(id, params, "a"), number(id, params, "b"), number(id, params, "c"), axis);
    }
    if (kind == "revolution") {
      check_keys(id, params, {"u0", "u1", "rho"});
      std::vector<double> rho;
      for (const auto& v : list(id, params, "rho")) {
        if (!v.is_number()) bad_id(id, "rho entries must be numbers");
        rho.push_back(v.get<double>());
      }
      return surface_of_revolution(number(id, params, "u0"), number(id, params, "u1"), rho);
    }
    bad_id(id, fmt::format("unknown kind '{}'", kind));
  };

  Manifold m = build();
  if (params.count("scale")) m = m.scaled(number(id, params, "scale"));
  return m;
}

}  // namespace riccilab
