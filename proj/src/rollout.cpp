#include "etd/rollout.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "etd/errors.hpp"

namespace etd::rollout {

namespace {

using nn::Index;
using nn::Matrix;
using nn::Vector;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int sample_categorical(const Vector& probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (Index a = 0; a < probs.size(); ++a) {
    cumulative += probs[a];
    if (u < cumulative) return static_cast<int>(a);
  }
  // Rounding left the tail short of 1; take the last action with mass.
  for (Index a = probs.size(); a-- > 0;)
    if (probs[a] > 0.0) return static_cast<int>(a);
  return 0;
}

int argmax(const Vector& probs) {
  Index best = 0;
  probs.maxCoeff(&best);
  return static_cast<int>(best);
}

// Per-environment episode in flight.
struct Slot {
  bool active = false;
  int episode = -1;
  envs::EnvStep last;
  std::vector<AgentRuntime> agents;
  std::vector<std::mt19937_64> agent_rngs;
};

struct Lane {
  int slot;
  int agent;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix(master);
  h = splitmix(h ^ a);
  h = splitmix(h ^ b);
  h = splitmix(h ^ c);
  return h;
}

std::uint64_t hash_vector(const Vector& v) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

Vector critic_input(const Vector& state, int agent, int n_agents) {
  Vector out = Vector::Zero(state.size() + n_agents);
  out.head(state.size()) = state;
  out[state.size() + agent] = 1.0;
  return out;
}

CollectResult collect(std::vector<std::unique_ptr<envs::Environment>>& environments,
                      const RolloutNets& nets, const CollectOptions& options) {
  if (environments.empty()) throw InputError("collect: no environments");
  if (options.frames_budget <= 0 && options.max_episodes <= 0)
    throw InputError("collect: frames budget must be positive");
  const bool needs_values = options.mode == gating::GateMode::kEtdDual;
  if (needs_values && !options.run_critic)
    throw InputError("collect: the dual gate needs the critic");
  const envs::Environment& proto = *environments.front();
  const int n_agents = proto.n_agents();
  if (static_cast<int>(nets.actors.size()) != proto.n_roles())
    throw InputError("collect: need one actor per environment role");

  const Index actor_hidden = nets.actors.front().hidden_dim();
  const Index critic_hidden = nets.critic.hidden_dim();
  const Index critic_in = proto.state_dim() + n_agents;

  CollectResult result;
  result.inferences.assign(n_agents, 0);
  std::vector<Slot> slots(environments.size());
  int started = 0;

  auto can_start = [&] {
    if (options.max_episodes > 0 && started >= options.max_episodes) return false;
    if (options.frames_budget > 0 && result.frames >= options.frames_budget) return false;
    return true;
  };

  auto start_episode = [&](std::size_t e) {
    Slot& slot = slots[e];
    slot.active = true;
    slot.episode = started++;
    const auto episode_seed = derive_seed(options.seed, 0x45504953ull, static_cast<std::uint64_t>(slot.episode));
    slot.last = environments[e]->reset(episode_seed);
    slot.agents.assign(n_agents, AgentRuntime{});
    slot.agent_rngs.clear();
    for (int i = 0; i < n_agents; ++i) {
      slot.agents[i].actor_hidden = Vector::Zero(actor_hidden);
      slot.agents[i].critic_hidden = Vector::Zero(critic_hidden);
      slot.agent_rngs.emplace_back(derive_seed(options.seed, 0x41474e54ull, e, static_cast<std::uint64_t>(i)));
    }
    EpisodeBuffer buffer;
    buffer.n_agents = n_agents;
    buffer.frames.resize(n_agents);
    buffer.returns.assign(n_agents, 0.0);
    buffer.frames_executed.assign(n_agents, 0);
    buffer.frames_dormant.assign(n_agents, 0);
    buffer.actor_hidden_hashes.resize(options.record_hidden_hashes ? n_agents : 0);
    buffer.submitted_actions.resize(n_agents);
    if (static_cast<int>(result.episodes.size()) <= slot.episode) result.episodes.resize(slot.episode + 1);
    result.episodes[slot.episode] = std::move(buffer);
  };

  for (std::size_t e = 0; e < environments.size(); ++e)
    if (can_start()) start_episode(e);

  // Per-episode columns accumulate here and are packed into matrices at the end.
  std::vector<std::vector<std::vector<Vector>>> obs_columns(result.episodes.size());
  std::vector<std::vector<Vector>> state_columns(result.episodes.size());

  while (true) {
    bool any_active = false;
    for (const auto& s : slots) any_active = any_active || s.active;
    if (!any_active) break;

    // Partition agents into sleepers and deciders, deciders grouped by role.
    std::vector<std::vector<Lane>> by_role(proto.n_roles());
    std::vector<Lane> awake;
    for (std::size_t e = 0; e < slots.size(); ++e) {
      if (!slots[e].active) continue;
      for (int i = 0; i < n_agents; ++i) {
        if (slots[e].agents[i].sleep_remaining == 0) {
          by_role[environments[e]->role_of(i)].push_back({static_cast<int>(e), i});
        }
      }
    }

    std::vector<std::vector<FrameRecord>> pending(slots.size(), std::vector<FrameRecord>(n_agents));
    for (std::size_t e = 0; e < slots.size(); ++e) {
      if (!slots[e].active) continue;
      const int frame = result.episodes[slots[e].episode].length;
      for (int i = 0; i < n_agents; ++i) {
        FrameRecord& rec = pending[e][i];
        rec.agent = i;
        rec.frame = frame;
        AgentRuntime& rt = slots[e].agents[i];
        if (rt.sleep_remaining > 0) {
          --rt.sleep_remaining;
          rec.awake = false;
          rec.action = rt.last_action;
          ++rt.frames_dormant;
        }
      }
    }

    // Actor inference, batched per role.
    for (std::size_t role = 0; role < by_role.size(); ++role) {
      const auto& lanes = by_role[role];
      if (lanes.empty()) continue;
      const auto& actor = nets.actors[role];
      Matrix obs(actor.obs_dim(), static_cast<Index>(lanes.size()));
      Matrix hidden(actor_hidden, static_cast<Index>(lanes.size()));
      for (std::size_t k = 0; k < lanes.size(); ++k) {
        const Slot& s = slots[lanes[k].slot];
        obs.col(static_cast<Index>(k)) = s.last.observations[lanes[k].agent];
        hidden.col(static_cast<Index>(k)) = s.agents[lanes[k].agent].actor_hidden;
      }
      nn::PolicyBatch policy = nn::actor_step(actor, obs, hidden, &result.actor_meter);
      for (std::size_t k = 0; k < lanes.size(); ++k) {
        Slot& s = slots[lanes[k].slot];
        AgentRuntime& rt = s.agents[lanes[k].agent];
        rt.actor_hidden = hidden.col(static_cast<Index>(k));
        const Vector probs = policy.probs.col(static_cast<Index>(k));
        const int action = options.greedy ? argmax(probs) : sample_categorical(probs, s.agent_rngs[lanes[k].agent]);
        FrameRecord& rec = pending[lanes[k].slot][lanes[k].agent];
        rec.awake = true;
        rec.action = action;
        rec.log_prob = std::log(probs[action]);
        rec.entropy = policy.entropy[static_cast<Index>(k)];
        rt.last_action = action;
        ++rt.frames_executed;
        ++result.inferences[lanes[k].agent];
        awake.push_back(lanes[k]);
      }
    }

    // Critic on the same awake lanes.
    if (options.run_critic && !awake.empty()) {
      Matrix input(critic_in, static_cast<Index>(awake.size()));
      Matrix hidden(critic_hidden, static_cast<Index>(awake.size()));
      for (std::size_t k = 0; k < awake.size(); ++k) {
        const Slot& s = slots[awake[k].slot];
        input.col(static_cast<Index>(k)) = critic_input(s.last.global_state, awake[k].agent, n_agents);
        hidden.col(static_cast<Index>(k)) = s.agents[awake[k].agent].critic_hidden;
      }
      nn::ValueBatch values = nn::critic_step(nets.critic, input, hidden, &result.critic_meter);
      for (std::size_t k = 0; k < awake.size(); ++k) {
        Slot& s = slots[awake[k].slot];
        s.agents[awake[k].agent].critic_hidden = hidden.col(static_cast<Index>(k));
        FrameRecord& rec = pending[awake[k].slot][awake[k].agent];
        rec.v1 = values.v1[static_cast<Index>(k)];
        rec.v2 = values.v2[static_cast<Index>(k)];
      }
    }

    // Gate decisions.
    for (const Lane& lane : awake) {
      FrameRecord& rec = pending[lane.slot][lane.agent];
      gating::GateDecision d;
      if (options.mode == gating::GateMode::kFixedSkip) {
        d = gating::fixed_skip_decide(rec.frame, options.max_sleep);
      } else {
        d = gating::decide(rec.entropy, gating::critic_divergence(rec.v1, rec.v2), options.tau_h,
                           options.tau_v, options.max_sleep, options.mode);
      }
      rec.delta_t = d.delta_t;
      rec.reason = d.reason;
      slots[lane.slot].agents[lane.agent].sleep_remaining = d.delta_t - 1;
    }

    // Environment step.
    for (std::size_t e = 0; e < slots.size(); ++e) {
      Slot& s = slots[e];
      if (!s.active) continue;
      EpisodeBuffer& buf = result.episodes[s.episode];
      auto& ep_obs = obs_columns[s.episode];
      if (ep_obs.empty()) ep_obs.resize(n_agents);
      std::vector<int> actions(n_agents);
      for (int i = 0; i < n_agents; ++i) {
        actions[i] = pending[e][i].action;
        ep_obs[i].push_back(s.last.observations[i]);
        buf.submitted_actions[i].push_back(actions[i]);
        if (options.record_hidden_hashes)
          buf.actor_hidden_hashes[i].push_back(hash_vector(s.agents[i].actor_hidden));
      }
      state_columns[s.episode].push_back(s.last.global_state);
      envs::EnvStep next = environments[e]->step(actions);
      for (int i = 0; i < n_agents; ++i) {
        FrameRecord rec = pending[e][i];
        rec.reward = next.rewards[i];
        rec.done = next.done;
        buf.returns[i] += next.rewards[i];
        buf.frames[i].push_back(rec);
      }
      ++buf.length;
      ++result.frames;
      s.last = std::move(next);
      if (s.last.done) {
        state_columns[s.episode].push_back(s.last.global_state);
        buf.outcome = s.last.info;
        for (int i = 0; i < n_agents; ++i) {
          buf.frames_executed[i] = s.agents[i].frames_executed;
          buf.frames_dormant[i] = s.agents[i].frames_dormant;
        }
        s.active = false;
        if (can_start()) {
          start_episode(e);
          obs_columns.resize(result.episodes.size());
          state_columns.resize(result.episodes.size());
        }
      }
    }
  }

  for (std::size_t ep = 0; ep < result.episodes.size(); ++ep) {
    EpisodeBuffer& buf = result.episodes[ep];
    buf.observations.resize(n_agents);
    for (int i = 0; i < n_agents; ++i) {
      Matrix m(proto.obs_dim(), buf.length);
      for (int t = 0; t < buf.length; ++t) m.col(t) = obs_columns[ep][i][t];
      buf.observations[i] = std::move(m);
    }
    buf.states.resize(proto.state_dim(), buf.length + 1);
    for (int t = 0; t <= buf.length; ++t) buf.states.col(t) = state_columns[ep][t];
  }
  return result;
}

std::vector<std::vector<smdp::DecisionPoint>> derive_decision_points(const EpisodeBuffer& buffer,
                                                                     double gamma) {
  std::vector<std::vector<smdp::DecisionPoint>> out(buffer.n_agents);
  for (int i = 0; i < buffer.n_agents; ++i) {
    const auto& frames = buffer.frames[i];
    if (static_cast<int>(frames.size()) != buffer.length)
      throw StructuralError("agent " + std::to_string(i) + " has a frame count different from the episode length");
    if (frames.empty()) continue;
    if (!frames.front().awake) throw StructuralError("episode must open with an awake frame");

    std::vector<int> awake_frames;
    for (int t = 0; t < buffer.length; ++t)
      if (frames[t].awake) awake_frames.push_back(t);

    for (std::size_t k = 0; k < awake_frames.size(); ++k) {
      const int t = awake_frames[k];
      const bool last = k + 1 == awake_frames.size();
      const int window_end = last ? buffer.length : awake_frames[k + 1];
      const int gap = window_end - t;
      const FrameRecord& rec = frames[t];
      if (!last && gap != rec.delta_t)
        throw StructuralError("agent " + std::to_string(i) + " woke at frame " + std::to_string(window_end) +
                              " but the gate at frame " + std::to_string(t) + " chose delta_t " +
                              std::to_string(rec.delta_t));
      if (last && gap > rec.delta_t)
        throw StructuralError("agent " + std::to_string(i) + " slept past its final gate window");
      for (int f = t + 1; f < window_end; ++f)
        if (frames[f].action != rec.action)
          throw StructuralError("dormant frame does not repeat the last action");

      std::vector<double> rewards;
      rewards.reserve(static_cast<std::size_t>(gap));
      for (int f = t; f < window_end; ++f) rewards.push_back(frames[f].reward);

      smdp::DecisionPoint p;
      p.frame = t;
      p.gap = gap;
      p.effective_reward = smdp::effective_reward(rewards, gamma, true);
      p.v1 = rec.v1;
      p.v2 = rec.v2;
      p.done = last;
      p.log_prob_old = rec.log_prob;
      p.action = rec.action;
      if (!last) {
        const FrameRecord& next = frames[awake_frames[k + 1]];
        p.value_next = 0.5 * (next.v1 + next.v2);
      }
      out[i].push_back(p);
    }
  }
  return out;
}

}  // namespace etd::rollout
