#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "etd/metrics/csv.hpp"
#include "etd/neural/checkpoint.hpp"
#include "etd/rollout.hpp"
#include "etd/trainer/config.hpp"
#include "etd/trainer/ppo.hpp"

namespace etd::train {

std::vector<std::unique_ptr<envs::Environment>> make_environments(const TrainConfig& config, int count);

// One actor per role and the shared twin critic, initialized from `seed`.
rollout::RolloutNets make_nets(const TrainConfig& config, const envs::Environment& proto, std::uint64_t seed);

std::vector<int> agent_roles(const envs::Environment& env);

// Per-inference cost of every agent: its role's actor, plus the critic when
// the critic runs at each decision.
std::vector<std::uint64_t> agent_inference_costs(const TrainConfig& config, const envs::Environment& env,
                                                 bool with_critic);

// Per-agent rows summarizing a collection pass (losses left at zero).
std::vector<metrics::MetricsRow> summarize(const TrainConfig& config, const envs::Environment& env,
                                           const rollout::CollectResult& result, long update, bool with_critic);

struct EvalResult {
  std::vector<metrics::MetricsRow> rows;  // one per agent
  double win_metric = 0.0;
  double flop_reduction = 0.0;
};

// `episodes` deployment episodes with config.eval_gate_mode and the
// thresholds of `update`, on a fixed evaluation seed stream.
EvalResult evaluate(const TrainConfig& config, const rollout::RolloutNets& nets, int update, int episodes);

struct TrainState {
  rollout::RolloutNets nets;
  Optimizers optimizers;
  int update = 0;  // completed updates
  double best_score = 0.0;
  bool has_best = false;
};

TrainState initial_state(const TrainConfig& config);
nn::Checkpoint make_checkpoint(const TrainConfig& config, const TrainState& state);
// Restores networks, optimizer moments and progress. Throws ConfigError when
// the checkpoint was written under a different configuration.
TrainState restore_state(const TrainConfig& config, const nn::Checkpoint& ckpt);
// The configuration embedded in a checkpoint.
TrainConfig checkpoint_config(const nn::Checkpoint& ckpt);

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config;
  std::filesystem::path metrics;
  std::filesystem::path eval;
  std::filesystem::path last_ckpt;
  std::filesystem::path best_ckpt;
  std::filesystem::path final_ckpt;
  static RunPaths in(const std::filesystem::path& dir);
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;  // a checkpoint written by train
  bool overwrite = false;
  int stop_after = 0;  // > 0: pause after this many updates (last.ckpt only)
  std::ostream* log = nullptr;
};

struct TrainSummary {
  RunPaths paths;
  int updates_run = 0;
  bool paused = false;
  EvalResult final_eval;
};

// Runs config.updates PPO updates. Writes metrics.csv (one row per agent per
// update), eval.csv (evaluation rows every eval.interval updates and at the
// end), config.cfg, last.ckpt (every checkpoint.interval updates and at the
// end), best.ckpt (highest evaluation win metric) and final.ckpt. An existing
// run directory is refused unless `overwrite` or `resume` is given. A paused
// run (stop_after) writes last.ckpt and can be continued with `resume`.
TrainSummary train(const TrainConfig& config, const TrainOptions& options);

}  // namespace etd::train
