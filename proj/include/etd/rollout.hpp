#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "etd/envs/environment.hpp"
#include "etd/gating.hpp"
#include "etd/neural/networks.hpp"
#include "etd/smdp.hpp"

namespace etd::rollout {

// Actors indexed by environment role; one twin critic shared by every agent
// and conditioned on an agent one-hot appended to the global state.
struct RolloutNets {
  std::vector<nn::ActorNet> actors;
  nn::CriticNet critic;
};

// Live execution state of one agent inside one episode.
struct AgentRuntime {
  nn::Vector actor_hidden;
  nn::Vector critic_hidden;
  int sleep_remaining = 0;
  int last_action = 0;
  long frames_executed = 0;
  long frames_dormant = 0;
};

struct FrameRecord {
  int agent = 0;
  int frame = 0;
  bool awake = false;
  int action = 0;
  double log_prob = 0.0;  // valid iff awake
  double reward = 0.0;
  double v1 = 0.0;        // valid iff awake and the critic ran
  double v2 = 0.0;
  double entropy = 0.0;   // valid iff awake
  int delta_t = 1;        // gate verdict, valid iff awake
  gating::WakeReason reason = gating::WakeReason::kForcedAwake;
  bool done = false;
};

struct EpisodeBuffer {
  int n_agents = 0;
  int length = 0;
  std::vector<std::vector<FrameRecord>> frames;  // [agent][frame]
  std::vector<nn::Matrix> observations;          // [agent], obs_dim x length
  nn::Matrix states;                             // state_dim x (length + 1); last column is post-terminal
  envs::EnvInfo outcome;
  std::vector<double> returns;                   // undiscounted, per agent
  std::vector<long> frames_executed;
  std::vector<long> frames_dormant;
  std::vector<std::vector<std::uint64_t>> actor_hidden_hashes;  // [agent][frame], when instrumented
  std::vector<std::vector<int>> submitted_actions;              // [agent][frame] as passed to env.step
};

struct CollectOptions {
  gating::GateMode mode = gating::GateMode::kEtdDual;
  int max_sleep = 3;
  double tau_h = 0.5;
  double tau_v = 0.1;
  bool greedy = false;      // argmax instead of sampling
  bool run_critic = true;   // false only when the gate does not need values
  long frames_budget = 0;   // start no new episode once this many frames ran
  int max_episodes = 0;     // 0 = unlimited; otherwise stop after this many
  std::uint64_t seed = 0;
  bool record_hidden_hashes = false;
};

struct CollectResult {
  std::vector<EpisodeBuffer> episodes;  // in start order
  std::vector<std::uint64_t> inferences;  // awake decisions per agent index
  nn::FlopMeter actor_meter;
  nn::FlopMeter critic_meter;
  long frames = 0;
};

// Runs every environment in lockstep. Each frame an agent either sleeps
// (decrements its counter, resubmits its last action, keeps both hidden
// states, records m = 0) or runs the actor, samples, runs the critic, asks
// the gate for delta_t and records m = 1. Networks are read-only here.
CollectResult collect(std::vector<std::unique_ptr<envs::Environment>>& environments,
                      const RolloutNets& nets, const CollectOptions& options);

// One decision point per awake row. gap is the realized window length (cut
// short by termination), effective_reward discounts the raw rewards inside
// the window, value_next is the twin mean at the next awake row (0 at the
// end), done marks the final window. Throws StructuralError if the masks do
// not tile the episode into the recorded gate windows.
std::vector<std::vector<smdp::DecisionPoint>> derive_decision_points(const EpisodeBuffer& buffer,
                                                                     double gamma);

// Critic input for one agent: global state followed by the agent one-hot.
nn::Vector critic_input(const nn::Vector& state, int agent, int n_agents);

// Stable 64-bit stream derivation (splitmix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

std::uint64_t hash_vector(const nn::Vector& v);

}  // namespace etd::rollout
