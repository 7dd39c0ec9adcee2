#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "etd/envs/environment.hpp"
#include "etd/gating.hpp"
#include "etd/neural/networks.hpp"

namespace etd::train {

// Flat key-value configuration. Grammar, one entry per line:
//
//   line  := blank | comment | entry
//   entry := key '=' value      (whitespace around both trimmed)
//   key   := word ('.' word)?   word := [a-z0-9_]+
//   comment starts with '#', anywhere on a line
//
// Later entries override earlier ones; unknown keys are rejected when the map
// is bound to a TrainConfig.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_text(std::string_view text, const std::string& origin = "<config>");
KeyValues read_config_file(const std::filesystem::path& path);
// Sorted `key = value` lines; parse_config_text(format_config(kv)) == kv.
std::string format_config(const KeyValues& values);

struct TrainConfig {
  envs::EnvConfig env;
  std::uint64_t env_seed = 0;  // 0: derive episode seeds from `seed`

  gating::GateMode gate_mode = gating::GateMode::kEtdDual;
  int max_sleep = 3;
  double tau_h_start = 0.5;
  double tau_h_end = 1.75;
  double tau_v_start = 0.1;
  double tau_v_end = 0.01;
  bool anneal = true;  // false holds both thresholds at their end values

  gating::GateMode eval_gate_mode = gating::GateMode::kEtdEntropyOnly;
  int eval_episodes = 32;
  int eval_interval = 10;
  bool eval_greedy = true;

  int updates = 100;
  long frames_per_update = 2000;
  int ppo_epochs = 4;
  int minibatches = 4;
  double learning_rate = 5e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double max_grad_norm = 10.0;  // 0 disables clipping
  std::uint64_t seed = 1;
  int n_envs = 8;

  nn::NetShape net;
  int critic_trunks = 1;

  bool wall_clock = false;  // false writes 0 so metrics files are reproducible
  int checkpoint_interval = 10;

  static TrainConfig from_values(const KeyValues& values);
  KeyValues to_values() const;
  void set(const std::string& key, const std::string& value);
  void validate() const;
  // FNV-1a over format_config(to_values()).
  std::uint64_t hash() const;
  gating::GateThresholds thresholds() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Every recognised key in registry order.
const std::vector<ConfigKey>& config_keys();

// Built-in presets: lbf_etd, lbf_fixed_skip, lbf_vanilla, tag_etd.
const std::map<std::string, std::string>& builtin_presets();

// Reads `spec` as a file if it exists, otherwise as a preset name.
KeyValues load_config(const std::string& spec);

std::string format_double(double v);
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace etd::train
