#pragma once

// Small networks and synthetic batches shared by the trainer and acceptance
// tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "etd/neural/networks.hpp"
#include "etd/rollout.hpp"
#include "etd/trainer/ppo.hpp"

namespace etd::fixture {

// Actor: 2 -> 2 -> 2 -> GRU(2) -> 3 logits, 51 parameters.
// Critic: 3 -> 2 -> 2 -> GRU(2) -> twin heads, 50 parameters.
inline constexpr nn::Index kObs = 2;
inline constexpr nn::Index kCriticIn = 3;
inline constexpr nn::Index kActions = 3;
inline const nn::NetShape kTinyShape{2, 2, 2};

inline void randomize(const std::vector<nn::Matrix*>& params, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto* p : params)
    for (nn::Index i = 0; i < p->size(); ++i) p->data()[i] = n(rng);
}

inline rollout::RolloutNets tiny_nets(std::mt19937_64& rng, int n_roles = 1, double scale = 0.7) {
  rollout::RolloutNets nets;
  for (int r = 0; r < n_roles; ++r) {
    nets.actors.push_back(nn::make_actor(kObs, kActions, kTinyShape, rng));
    randomize(nets.actors.back().parameters(), rng, scale);
  }
  nets.critic = nn::make_critic(kCriticIn, kTinyShape, 1, rng);
  randomize(nets.critic.parameters(), rng, scale);
  return nets;
}

// Random masked sequences; every sequence opens awake. Old log-probs are
// drawn independently, so probability ratios spread around 1.
inline std::vector<train::AgentTrajectory> random_trajectories(std::mt19937_64& rng, int n_seq, int max_len,
                                                               int n_roles = 1, double awake_p = 0.6) {
  std::uniform_int_distribution<int> len(1, max_len), action(0, static_cast<int>(kActions) - 1);
  std::bernoulli_distribution awake(awake_p);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> old_p(0.15, 0.6);
  std::vector<train::AgentTrajectory> out;
  for (int s = 0; s < n_seq; ++s) {
    train::AgentTrajectory tr;
    tr.episode = s / 2;
    tr.agent = s % 2;
    tr.role = s % n_roles;
    const int T = len(rng);
    tr.obs.resize(kObs, T);
    tr.critic_in.resize(kCriticIn, T);
    for (int t = 0; t < T; ++t) {
      tr.mask.push_back(t == 0 || awake(rng));
      for (nn::Index i = 0; i < kObs; ++i) tr.obs(i, t) = n(rng);
      for (nn::Index i = 0; i < kCriticIn; ++i) tr.critic_in(i, t) = n(rng);
      tr.actions.push_back(action(rng));
      tr.old_log_prob.push_back(std::log(old_p(rng)));
      tr.advantage.push_back(n(rng));
      tr.return_target.push_back(n(rng));
    }
    out.push_back(std::move(tr));
  }
  return out;
}

inline std::vector<const train::AgentTrajectory*> pointers(const std::vector<train::AgentTrajectory>& trs) {
  std::vector<const train::AgentTrajectory*> out;
  for (const auto& t : trs) out.push_back(&t);
  return out;
}

// All parameters of all networks, actors first.
inline std::vector<nn::Matrix*> all_parameters(rollout::RolloutNets& nets) {
  std::vector<nn::Matrix*> out;
  for (auto& a : nets.actors)
    for (auto* p : a.parameters()) out.push_back(p);
  for (auto* p : nets.critic.parameters()) out.push_back(p);
  return out;
}

inline std::vector<const nn::Matrix*> all_gradients(const train::NetGradients& g) {
  std::vector<const nn::Matrix*> out;
  for (const auto& a : g.actors)
    for (const auto* p : a.parameters()) out.push_back(p);
  for (const auto* p : g.critic.parameters()) out.push_back(p);
  return out;
}

// Probability ratios of every awake row under `nets`.
inline std::vector<double> awake_ratios(const rollout::RolloutNets& nets,
                                        const std::vector<train::AgentTrajectory>& trs) {
  std::vector<double> ratios;
  for (const auto& tr : trs) {
    const auto& actor = nets.actors[tr.role];
    nn::GruState h = nn::GruState::zeros(actor.hidden_dim());
    for (int t = 0; t < tr.length(); ++t) {
      if (!tr.mask[t]) continue;
      auto [out, next] = nn::actor_forward(actor, tr.obs.col(t), h);
      h = next;
      ratios.push_back(out.probs[tr.actions[t]] / std::exp(tr.old_log_prob[t]));
    }
  }
  return ratios;
}

}  // namespace etd::fixture
