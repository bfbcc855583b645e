#pragma once

// Flat key-value configuration files:
//
//   # comment
//   model.type = local
//   model.gamma = 1.0
//
// Every key read through get() is marked as used; check_all_used() rejects typos.

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "mfg/common.hpp"

namespace mfg {

class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text) {
    Config cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      if (cfg.values_.contains(key)) throw ConfigError("duplicate config key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.contains(key); }

  double get(const std::string& key, double fallback) const {
    auto it = lookup(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }
  int get(const std::string& key, int fallback) const {
    auto it = lookup(key);
    if (it == values_.end()) return fallback;
    long long v = to_int(key, it->second);
    return static_cast<int>(v);
  }
  long long get(const std::string& key, long long fallback) const {
    auto it = lookup(key);
    if (it == values_.end()) return fallback;
    return to_int(key, it->second);
  }
  std::string get(const std::string& key, const char* fallback) const {
    auto it = lookup(key);
    return it == values_.end() ? std::string(fallback) : it->second;
  }
  std::string get(const std::string& key, const std::string& fallback) const {
    return get(key, fallback.c_str());
  }
  bool get(const std::string& key, bool fallback) const {
    auto it = lookup(key);
    if (it == values_.end()) return fallback;
    const auto& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
  }

  /// Throws if any key was never read. Keys whose section (text before the first '.')
  /// is listed in `foreign` belong to other commands sharing the file and are skipped.
  void check_all_used(const std::set<std::string>& foreign = {}) const {
    std::string unknown;
    for (const auto& [k, v] : values_)
      if (!used_.contains(k) && !foreign.contains(k.substr(0, k.find('.'))))
        unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
  }

  /// Canonical "key=value\n" dump (sorted), used for fingerprints.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string>::const_iterator lookup(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) used_.insert(key);
    return it;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  static long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace mfg
