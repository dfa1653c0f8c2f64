#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "guigaze/errors.hpp"

namespace guigaze {

/// Flat key-value config file: one `key = value` per line, `#` comments,
/// blank lines ignored. Consumers take the keys they know; finish() rejects
/// leftovers so typos fail loudly.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
  }

  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>") {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      std::string key, value;
      if (eq == std::string::npos) {
        if (trim(line).empty()) continue;
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": expected `key = value`");
      }
      key = trim(line.substr(0, eq));
      value = trim(line.substr(eq + 1));
      if (key.empty())
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double take_double(const std::string& key, double fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    taken_.insert(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw config_error(origin_ + ": key `" + key + "`: not a number: " +
                         it->second);
    }
  }

  int take_int(const std::string& key, int fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    taken_.insert(key);
    try {
      std::size_t pos = 0;
      const int v = std::stoi(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw config_error(origin_ + ": key `" + key + "`: not an integer: " +
                         it->second);
    }
  }

  std::string take_string(const std::string& key, std::string fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    taken_.insert(key);
    return it->second;
  }

  /// Throws if any key was never consumed (unknown-key protection).
  void finish() const {
    for (const auto& [key, value] : values_) {
      if (!taken_.count(key))
        throw config_error(origin_ + ": unknown key `" + key + "`");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::set<std::string> taken_;
};

}  // namespace guigaze
