#pragma once

// Flat key=value job configuration. '#' starts a comment line.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "c2c/error.hpp"
#include "c2c/trainer.hpp"

namespace c2c {

class JobConfig {
 public:
  JobConfig() = default;
  explicit JobConfig(std::set<std::string> allowed) : allowed_(std::move(allowed)) {}

  void parse(std::istream& is, const std::string& origin = "config") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
  }

  void parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    parse(is, path);
  }

  void set(const std::string& key, std::string value) {
    if (!allowed_.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
    values_[key] = std::move(value);
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v || v->empty()) throw ConfigError("missing required configuration key '" + key + "'");
    return *v;
  }

  template <class T>
  std::optional<T> get_number(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    T out{};
    const char* b = v->data();
    const char* e = b + v->size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc{} || ptr != e)
      throw ConfigError("configuration key '" + key + "': cannot parse '" + *v + "'");
    return out;
  }

  std::optional<bool> get_bool(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("configuration key '" + key + "': expected true/false, got '" + *v + "'");
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
  }

  std::set<std::string> allowed_;
  std::map<std::string, std::string> values_;
};

inline const std::set<std::string>& training_keys() {
  static const std::set<std::string> keys = {
      "batch_size", "epochs",         "learning_rate", "rho",    "epsilon",
      "clip_norm",  "clip_gradients", "seed",          "max_char_len", "hidden"};
  return keys;
}

/// Reads training hyperparameters; errors name the offending key.
inline TrainingConfig training_config_from(const JobConfig& job) {
  TrainingConfig cfg;
  auto positive_count = [&](const char* key, std::size_t& field) {
    if (auto v = job.get_number<long long>(key)) {
      if (*v < 1) throw ConfigError(std::string(key) + " must be at least 1, got " + std::to_string(*v));
      field = static_cast<std::size_t>(*v);
    }
  };
  positive_count("batch_size", cfg.batch_size);
  positive_count("epochs", cfg.epochs);
  positive_count("max_char_len", cfg.max_char_len);
  positive_count("hidden", cfg.hidden);
  if (auto v = job.get_number<double>("learning_rate")) cfg.learning_rate = *v;
  if (auto v = job.get_number<double>("rho")) cfg.rho = *v;
  if (auto v = job.get_number<double>("epsilon")) cfg.epsilon = *v;
  if (auto v = job.get_number<double>("clip_norm")) cfg.clip_norm = *v;
  if (auto v = job.get_bool("clip_gradients")) cfg.clip_gradients = *v;
  if (auto v = job.get_number<std::uint64_t>("seed")) cfg.seed = *v;
  cfg.validate();
  return cfg;
}

}  // namespace c2c
