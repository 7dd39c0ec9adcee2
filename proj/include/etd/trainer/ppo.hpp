#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etd/rollout.hpp"
#include "etd/smdp.hpp"
#include "etd/trainer/adam.hpp"

namespace etd::train {

// One agent's episode, frame-indexed. Entries at frames with mask 0 are
// carried along but never read by the objective.
struct AgentTrajectory {
  int episode = 0;
  int agent = 0;
  int role = 0;
  std::vector<bool> mask;
  nn::Matrix obs;        // obs_dim x T
  nn::Matrix critic_in;  // (state_dim + n_agents) x T
  std::vector<int> actions;
  std::vector<double> old_log_prob;
  std::vector<double> advantage;
  std::vector<double> return_target;
  int length() const { return static_cast<int>(mask.size()); }
  long awake() const;
};

// SMDP-GAE per agent and episode. Return targets use the raw advantages;
// when `normalize` is set the advantages are then standardized per role over
// awake entries. Throws InputError on an empty episode list.
std::vector<AgentTrajectory> compute_advantages(std::span<const rollout::EpisodeBuffer> episodes,
                                                const std::vector<int>& agent_roles,
                                                const smdp::GaeParams& params, bool normalize = true);

struct LossCoefficients {
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct NetGradients {
  std::vector<nn::ActorNet> actors;
  nn::CriticNet critic;
  static NetGradients zeros_like(const rollout::RolloutNets& nets);
};

struct ObjectiveReport {
  double total = 0.0;                // minimized
  std::vector<double> policy_loss;   // per role: -L_clip
  std::vector<double> entropy;       // per role: masked mean entropy
  std::vector<long> role_rows;       // awake rows per role
  double value_loss = 0.0;           // head 1 + head 2
  double value_loss_1 = 0.0;
  double value_loss_2 = 0.0;
  long rows = 0;
  double clip_fraction = 0.0;
};

// total = sum_roles (-L_clip - c1 * entropy) + c2 * (L_V1 + L_V2), each term a
// masked mean over awake frames (per role for the actor terms, over every
// agent for the critic). With `grads` set, accumulates the exact gradient
// of `total`. Throws DegenerateBatchError when no frame is awake.
ObjectiveReport masked_objective(const rollout::RolloutNets& nets,
                                 std::span<const AgentTrajectory* const> batch,
                                 const LossCoefficients& coefs, NetGradients* grads);

struct Optimizers {
  std::vector<Adam> actors;
  Adam critic;
  static Optimizers create(const rollout::RolloutNets& nets, double learning_rate);
};

struct PpoSettings {
  int epochs = 4;
  int minibatches = 4;
  LossCoefficients coefs;
  double max_grad_norm = 10.0;
  std::uint64_t seed = 0;
};

struct UpdateReport {
  std::vector<double> policy_loss;  // per role, mean over minibatches
  std::vector<double> entropy;
  double value_loss = 0.0;
  int minibatches_run = 0;
  int minibatches_skipped = 0;
  bool aborted = false;
  std::string message;
};

// Episodes are shuffled and split into `minibatches` groups each epoch, so
// every sequence stays whole for backpropagation through time. A minibatch
// without awake frames is skipped; a non-finite loss or gradient stops the
// update before any further parameter change.
UpdateReport ppo_update(rollout::RolloutNets& nets, Optimizers& optimizers,
                        std::span<const AgentTrajectory> trajectories, const PpoSettings& settings);

}  // namespace etd::train
