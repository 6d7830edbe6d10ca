#pragma once

// Experiment configuration: a flat dotted-key map parsed from TOML-style
// section/key files, with command-line overrides. Every ExperimentConfig and
// DualHsicConfig field is addressable by its dotted key so runs and sweeps
// can override any of them.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualhsic/trainer.hpp"

namespace dualhsic {

class ConfigMap {
 public:
  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_string(const std::string& text);

  // "section.key=value"; unknown keys are rejected.
  void apply_override(const std::string& dotted_kv);
  void set(const std::string& key, const std::string& raw_value);

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key, double def) const;
  std::int64_t get_int(const std::string& key, std::int64_t def) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  std::vector<std::int64_t> get_int_list(const std::string& key) const;
  std::vector<std::uint64_t> get_uint64_list(const std::string& key) const;

  // Resolved snapshot, sorted by key (embedded in every results file).
  const std::map<std::string, std::string>& entries() const { return values_; }

  static bool is_known_key(const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

ExperimentConfig experiment_config_from(const ConfigMap& cfg);

// run.seeds list, else the single run.seed, else {0}.
std::vector<std::uint64_t> seeds_from(const ConfigMap& cfg);

// Results stem: run.name, else "results".
std::string run_name_from(const ConfigMap& cfg);

}  // namespace dualhsic
