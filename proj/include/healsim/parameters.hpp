#pragma once

// Flat, ordered, strictly validated parameter table with provenance tracking.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace healsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Parameter {
  enum class Type { number, integer, text };
  std::string key;
  Type type = Type::number;
  double number = 0.0;
  std::string text;
  std::string provenance = "default";
  std::string description;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool lower_open = false;
  std::vector<std::string> choices;  // allowed values for text parameters
};

/// Levenshtein distance, used for "did you mean" suggestions.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

class ParameterSet {
 public:
  Parameter& add_number(const std::string& key, double value, const std::string& provenance,
                        const std::string& description, double lower = -std::numeric_limits<double>::infinity(),
                        double upper = std::numeric_limits<double>::infinity(), bool lower_open = false) {
    Parameter p;
    p.key = key;
    p.number = value;
    p.provenance = provenance;
    p.description = description;
    p.lower = lower;
    p.upper = upper;
    p.lower_open = lower_open;
    return insert(std::move(p));
  }

  Parameter& add_integer(const std::string& key, int value, const std::string& provenance,
                         const std::string& description, int lower, int upper) {
    Parameter& p = add_number(key, value, provenance, description, lower, upper);
    p.type = Parameter::Type::integer;
    return p;
  }

  Parameter& add_text(const std::string& key, const std::string& value, const std::string& provenance,
                      const std::string& description, std::vector<std::string> choices = {}) {
    Parameter p;
    p.key = key;
    p.type = Parameter::Type::text;
    p.text = value;
    p.provenance = provenance;
    p.description = description;
    p.choices = std::move(choices);
    return insert(std::move(p));
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const Parameter& at(const std::string& key) const {
    const Parameter* p = find(key);
    if (!p) throw ConfigError(unknown_key_message(key));
    return *p;
  }

  double number(const std::string& key) const {
    const Parameter& p = at(key);
    if (p.type == Parameter::Type::text) throw ConfigError("parameter '" + key + "' is not numeric");
    return p.number;
  }
  int integer(const std::string& key) const { return static_cast<int>(std::llround(number(key))); }
  const std::string& text(const std::string& key) const {
    const Parameter& p = at(key);
    if (p.type != Parameter::Type::text) throw ConfigError("parameter '" + key + "' is not text");
    return p.text;
  }

  void set_number(const std::string& key, double value, const std::string& provenance = "user") {
    Parameter& p = mutable_at(key);
    if (p.type == Parameter::Type::text) throw ConfigError("parameter '" + key + "' expects text, got a number");
    if (!std::isfinite(value)) throw ConfigError("parameter '" + key + "' must be finite");
    if (p.type == Parameter::Type::integer && value != std::floor(value)) {
      throw ConfigError("parameter '" + key + "' expects an integer");
    }
    const bool below = p.lower_open ? !(value > p.lower) : value < p.lower;
    if (below || value > p.upper) {
      throw ConfigError("parameter '" + key + "' = " + std::to_string(value) + " out of range " +
                        (p.lower_open ? "(" : "[") + std::to_string(p.lower) + ", " + std::to_string(p.upper) + "]");
    }
    p.number = value;
    p.provenance = provenance;
  }

  void set_text(const std::string& key, const std::string& value, const std::string& provenance = "user") {
    Parameter& p = mutable_at(key);
    if (p.type != Parameter::Type::text) {
      // numeric parameter given as a string
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != value.size()) throw ConfigError("parameter '" + key + "' expects a number, got '" + value + "'");
      set_number(key, v, provenance);
      return;
    }
    if (!p.choices.empty() && std::find(p.choices.begin(), p.choices.end(), value) == p.choices.end()) {
      std::string allowed;
      for (const auto& c : p.choices) allowed += (allowed.empty() ? "" : ", ") + c;
      throw ConfigError("parameter '" + key + "' = '" + value + "' is not one of {" + allowed + "}");
    }
    p.text = value;
    p.provenance = provenance;
  }

  const std::vector<Parameter>& entries() const { return entries_; }

  std::string nearest_key(const std::string& key) const {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& p : entries_) {
      const std::size_t d = edit_distance(key, p.key);
      // Also compare against the last path component, so "Mg_1" finds "healing.M_g1".
      const auto dot = p.key.rfind('.');
      const std::size_t d_leaf = dot == std::string::npos ? d : edit_distance(key, p.key.substr(dot + 1));
      const std::size_t m = std::min(d, d_leaf);
      if (m < best_d) {
        best_d = m;
        best = p.key;
      }
    }
    return best;
  }

  std::string unknown_key_message(const std::string& key) const {
    std::string msg = "unknown configuration key '" + key + "'";
    const std::string near = nearest_key(key);
    if (!near.empty()) msg += " (did you mean '" + near + "'?)";
    return msg;
  }

 private:
  Parameter& insert(Parameter p) {
    if (find(p.key)) throw std::logic_error("duplicate parameter " + p.key);
    entries_.push_back(std::move(p));
    return entries_.back();
  }
  const Parameter* find(const std::string& key) const {
    for (const auto& p : entries_)
      if (p.key == key) return &p;
    return nullptr;
  }
  Parameter& mutable_at(const std::string& key) {
    for (auto& p : entries_)
      if (p.key == key) return p;
    throw ConfigError(unknown_key_message(key));
  }

  std::vector<Parameter> entries_;
};

}  // namespace healsim
