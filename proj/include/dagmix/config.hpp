#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "dagmix/dpmix.hpp"
#include "dagmix/error.hpp"

namespace dagmix {

/// Ordered key -> raw value pairs, as read from a config file or flags.
using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline std::string format_real(double x) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

} // namespace detail

/// Every key understood by apply_setting, in echo order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "iterations",   "burn_in",       "thin",          "a",           "dag_a",          "dag_b",
      "alpha_c",      "alpha_d",       "seed",          "baseline_burn", "no_dag",       "no_mixture",
      "approx_hastings", "fixed_alpha", "init",         "dag_moves_per_iter", "random_scan", "max_parents",
      "record_theta", "debug_recount", "progress_every"};
  return keys;
}

/// Reads `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// are errors reported with their line number.
inline KeyValues parse_config(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t lineno = 0;
  const auto& known = config_keys();
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::normalize_key(detail::trim(line.substr(0, eq)));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!out.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key + "' given twice");
  }
  return out;
}

inline void apply_setting(McmcConfig& c, const std::string& raw_key, const std::string& v) {
  using namespace detail;
  const std::string key = normalize_key(raw_key);
  if (key == "iterations") c.iterations = parse_count(key, v);
  else if (key == "burn_in") c.burn_in = parse_count(key, v);
  else if (key == "thin") c.thin = parse_count(key, v);
  else if (key == "a") c.bdeu.a = parse_real(key, v);
  else if (key == "dag_a") c.dag_a = parse_real(key, v);
  else if (key == "dag_b") {
    if (v == "auto") c.dag_b.reset();
    else c.dag_b = parse_real(key, v);
  } else if (key == "alpha_c") c.alpha_c = parse_real(key, v);
  else if (key == "alpha_d") c.alpha_d = parse_real(key, v);
  else if (key == "seed") c.seed = parse_count(key, v);
  else if (key == "baseline_burn") c.baseline_burn = parse_count(key, v);
  else if (key == "no_dag") c.no_dag = parse_bool(key, v);
  else if (key == "no_mixture") c.no_mixture = parse_bool(key, v);
  else if (key == "approx_hastings") c.approx_hastings = parse_bool(key, v);
  else if (key == "fixed_alpha") {
    if (v == "none") c.fixed_alpha.reset();
    else c.fixed_alpha = parse_real(key, v);
  } else if (key == "init") {
    if (v == "single") c.init_clusters = 1;
    else if (v.rfind("random:", 0) == 0) c.init_clusters = parse_count(key, v.substr(7));
    else throw ConfigError("config key 'init': expected 'single' or 'random:K0', got '" + v + "'");
  } else if (key == "dag_moves_per_iter") c.dag_moves_per_iter = parse_count(key, v);
  else if (key == "random_scan") c.random_scan = parse_bool(key, v);
  else if (key == "max_parents") {
    if (v == "none") c.max_parents.reset();
    else c.max_parents = parse_count(key, v);
  } else if (key == "record_theta") c.record_theta = parse_bool(key, v);
  else if (key == "debug_recount") c.debug_recount = parse_bool(key, v);
  else if (key == "progress_every") c.progress_every = parse_count(key, v);
  else throw ConfigError("unknown config key '" + raw_key + "'");
}

/// Defaults, then the file, then command-line flags.
inline McmcConfig resolve_config(const KeyValues& file, const KeyValues& flags, McmcConfig base = {}) {
  for (const auto& [k, v] : file) apply_setting(base, k, v);
  for (const auto& [k, v] : flags) apply_setting(base, k, v);
  base.validate();
  return base;
}

/// Every key with its resolved value; apply_setting over the echo
/// reproduces the config.
inline std::vector<std::pair<std::string, std::string>> config_echo(const McmcConfig& c) {
  using detail::format_real;
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"iterations", std::to_string(c.iterations)},
      {"burn_in", std::to_string(c.burn_in)},
      {"thin", std::to_string(c.thin)},
      {"a", format_real(c.bdeu.a)},
      {"dag_a", format_real(c.dag_a)},
      {"dag_b", c.dag_b ? format_real(*c.dag_b) : "auto"},
      {"alpha_c", format_real(c.alpha_c)},
      {"alpha_d", format_real(c.alpha_d)},
      {"seed", std::to_string(c.seed)},
      {"baseline_burn", std::to_string(c.baseline_burn)},
      {"no_dag", b(c.no_dag)},
      {"no_mixture", b(c.no_mixture)},
      {"approx_hastings", b(c.approx_hastings)},
      {"fixed_alpha", c.fixed_alpha ? format_real(*c.fixed_alpha) : "none"},
      {"init", c.init_clusters == 1 ? "single" : "random:" + std::to_string(c.init_clusters)},
      {"dag_moves_per_iter", std::to_string(c.dag_moves_per_iter)},
      {"random_scan", b(c.random_scan)},
      {"max_parents", c.max_parents ? std::to_string(*c.max_parents) : "none"},
      {"record_theta", b(c.record_theta)},
      {"debug_recount", b(c.debug_recount)},
      {"progress_every", std::to_string(c.progress_every)},
  };
}

} // namespace dagmix
