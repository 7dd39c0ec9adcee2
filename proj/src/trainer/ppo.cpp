#include "etd/trainer/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "etd/errors.hpp"

namespace etd::train {

namespace {

using nn::Index;
using nn::Matrix;
using nn::Vector;

// Rows in SequenceLayout order: step-major, then sequence order.
struct RowIndex {
  nn::SequenceLayout layout;
  std::vector<std::pair<int, int>> rows;  // (sequence, frame)
};

RowIndex index_rows(std::span<const AgentTrajectory* const> seqs) {
  RowIndex idx;
  std::vector<std::vector<bool>> masks;
  masks.reserve(seqs.size());
  for (const auto* s : seqs) masks.push_back(s->mask);
  idx.layout = nn::make_sequence_layout(masks);
  for (Index t = 0; t < idx.layout.steps(); ++t)
    for (Index r = idx.layout.step_offsets[t]; r < idx.layout.step_offsets[t + 1]; ++r)
      idx.rows.emplace_back(static_cast<int>(idx.layout.row_sequence[r]), static_cast<int>(t));
  return idx;
}

Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

bool all_finite(const std::vector<const Matrix*>& ms) {
  for (const auto* m : ms)
    if (!m->allFinite()) return false;
  return true;
}

}  // namespace

long AgentTrajectory::awake() const { return std::count(mask.begin(), mask.end(), true); }

std::vector<AgentTrajectory> compute_advantages(std::span<const rollout::EpisodeBuffer> episodes,
                                                const std::vector<int>& agent_roles,
                                                const smdp::GaeParams& params, bool normalize) {
  if (episodes.empty()) throw InputError("compute_advantages: no episodes");
  params.validate();
  std::vector<AgentTrajectory> out;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& buf = episodes[e];
    if (static_cast<int>(agent_roles.size()) != buf.n_agents)
      throw InputError("compute_advantages: one role per agent required");
    auto points = rollout::derive_decision_points(buf, params.gamma);
    for (int i = 0; i < buf.n_agents; ++i) {
      smdp::smdp_gae(points[i], params);
      AgentTrajectory tr;
      tr.episode = static_cast<int>(e);
      tr.agent = i;
      tr.role = agent_roles[i];
      const int T = buf.length;
      tr.mask.assign(T, false);
      tr.actions.assign(T, 0);
      tr.old_log_prob.assign(T, 0.0);
      tr.advantage.assign(T, 0.0);
      tr.return_target.assign(T, 0.0);
      tr.obs = buf.observations[i];
      tr.critic_in.resize(buf.states.rows() + buf.n_agents, T);
      for (int t = 0; t < T; ++t) {
        tr.critic_in.col(t) = rollout::critic_input(buf.states.col(t), i, buf.n_agents);
        tr.actions[t] = buf.frames[i][t].action;
      }
      for (const auto& p : points[i]) {
        tr.mask[p.frame] = true;
        tr.old_log_prob[p.frame] = p.log_prob_old;
        tr.advantage[p.frame] = p.advantage;
        tr.return_target[p.frame] = p.return_target;
      }
      out.push_back(std::move(tr));
    }
  }
  if (normalize) {
    std::map<int, std::vector<std::pair<AgentTrajectory*, int>>> by_role;
    for (auto& tr : out)
      for (int t = 0; t < tr.length(); ++t)
        if (tr.mask[t]) by_role[tr.role].emplace_back(&tr, t);
    for (auto& [role, entries] : by_role) {
      std::vector<double> values;
      values.reserve(entries.size());
      for (const auto& [tr, t] : entries) values.push_back(tr->advantage[t]);
      const std::vector<smdp::Mask> masks(values.size(), 1);
      smdp::normalize_masked(values, masks);
      for (std::size_t k = 0; k < entries.size(); ++k) entries[k].first->advantage[entries[k].second] = values[k];
    }
  }
  return out;
}

NetGradients NetGradients::zeros_like(const rollout::RolloutNets& nets) {
  NetGradients g;
  for (const auto& a : nets.actors) g.actors.push_back(nn::zeros_like(a));
  g.critic = nn::zeros_like(nets.critic);
  return g;
}

ObjectiveReport masked_objective(const rollout::RolloutNets& nets,
                                 std::span<const AgentTrajectory* const> batch,
                                 const LossCoefficients& coefs, NetGradients* grads) {
  const int n_roles = static_cast<int>(nets.actors.size());
  ObjectiveReport report;
  report.policy_loss.assign(n_roles, 0.0);
  report.entropy.assign(n_roles, 0.0);
  report.role_rows.assign(n_roles, 0);
  long clipped = 0;

  for (int role = 0; role < n_roles; ++role) {
    std::vector<const AgentTrajectory*> seqs;
    for (const auto* tr : batch)
      if (tr->role == role) seqs.push_back(tr);
    if (seqs.empty()) continue;
    const RowIndex idx = index_rows(seqs);
    const Index R = idx.layout.rows();
    if (R == 0) continue;
    const auto& actor = nets.actors[role];

    Matrix obs(actor.obs_dim(), R);
    for (Index r = 0; r < R; ++r) obs.col(r) = seqs[idx.rows[r].first]->obs.col(idx.rows[r].second);
    nn::ActorTape tape;
    const Matrix logits = nn::actor_forward_sequence(actor, obs, idx.layout, tape);

    // Frame-indexed arrays so the loss is literally the masked mean.
    std::vector<std::size_t> offset(seqs.size() + 1, 0);
    for (std::size_t s = 0; s < seqs.size(); ++s) offset[s + 1] = offset[s] + seqs[s]->mask.size();
    std::vector<double> ratios(offset.back(), 1.0);
    std::vector<double> advantages(offset.back(), 0.0);
    std::vector<smdp::Mask> masks(offset.back(), 0);
    for (std::size_t s = 0; s < seqs.size(); ++s)
      for (std::size_t t = 0; t < seqs[s]->mask.size(); ++t) {
        masks[offset[s] + t] = seqs[s]->mask[t] ? 1 : 0;
        advantages[offset[s] + t] = seqs[s]->advantage[t];
      }

    Matrix log_probs(logits.rows(), R);
    Vector entropy(R);
    for (Index r = 0; r < R; ++r) {
      log_probs.col(r) = log_softmax(logits.col(r));
      const Vector p = log_probs.col(r).array().exp();
      entropy[r] = -(p.array() * log_probs.col(r).array()).sum();
      const auto [s, t] = idx.rows[r];
      const double lp = log_probs(seqs[s]->actions[t], r);
      ratios[offset[s] + t] = std::exp(lp - seqs[s]->old_log_prob[t]);
    }
    const double surrogate = smdp::masked_clip_loss(ratios, advantages, masks, coefs.clip_epsilon);
    const double mean_entropy = entropy.mean();
    report.policy_loss[role] = -surrogate;
    report.entropy[role] = mean_entropy;
    report.role_rows[role] = R;
    report.rows += R;
    report.total += -surrogate - coefs.entropy_coef * mean_entropy;

    const double M = static_cast<double>(R);
    Matrix d_logits(logits.rows(), R);
    for (Index r = 0; r < R; ++r) {
      const auto [s, t] = idx.rows[r];
      const double ratio = ratios[offset[s] + t];
      const double adv = advantages[offset[s] + t];
      const double slope = smdp::clip_surrogate_slope(ratio, adv, coefs.clip_epsilon);
      if (slope == 0.0 && adv != 0.0) ++clipped;
      const Vector p = log_probs.col(r).array().exp();
      Vector one_hot = -p;
      one_hot[seqs[s]->actions[t]] += 1.0;
      d_logits.col(r) = -(slope * ratio / M) * one_hot +
                        (coefs.entropy_coef / M) * (p.array() * (log_probs.col(r).array() + entropy[r])).matrix();
    }
    if (grads != nullptr) nn::actor_backward_sequence(actor, tape, d_logits, grads->actors[role]);
  }
  if (report.rows == 0) throw DegenerateBatchError("masked_objective: batch has no awake frames");
  report.clip_fraction = static_cast<double>(clipped) / static_cast<double>(report.rows);

  // Critic over every agent's sequence.
  const RowIndex idx = index_rows(batch);
  const Index R = idx.layout.rows();
  Matrix input(nets.critic.input_dim(), R);
  for (Index r = 0; r < R; ++r) input.col(r) = batch[idx.rows[r].first]->critic_in.col(idx.rows[r].second);
  nn::CriticTape tape;
  const Matrix values = nn::critic_forward_sequence(nets.critic, input, idx.layout, tape);

  std::vector<std::size_t> offset(batch.size() + 1, 0);
  for (std::size_t s = 0; s < batch.size(); ++s) offset[s + 1] = offset[s] + batch[s]->mask.size();
  std::vector<double> v1(offset.back(), 0.0), v2(offset.back(), 0.0), targets(offset.back(), 0.0);
  std::vector<smdp::Mask> masks(offset.back(), 0);
  for (std::size_t s = 0; s < batch.size(); ++s)
    for (std::size_t t = 0; t < batch[s]->mask.size(); ++t) {
      masks[offset[s] + t] = batch[s]->mask[t] ? 1 : 0;
      targets[offset[s] + t] = batch[s]->return_target[t];
    }
  for (Index r = 0; r < R; ++r) {
    const auto [s, t] = idx.rows[r];
    v1[offset[s] + t] = values(0, r);
    v2[offset[s] + t] = values(1, r);
  }
  report.value_loss_1 = smdp::masked_value_loss(v1, targets, masks);
  report.value_loss_2 = smdp::masked_value_loss(v2, targets, masks);
  report.value_loss = report.value_loss_1 + report.value_loss_2;
  report.total += coefs.value_coef * report.value_loss;

  if (grads != nullptr) {
    Matrix d_values(2, R);
    const double scale = 2.0 * coefs.value_coef / static_cast<double>(R);
    for (Index r = 0; r < R; ++r) {
      const auto [s, t] = idx.rows[r];
      const double target = batch[s]->return_target[t];
      d_values(0, r) = scale * (values(0, r) - target);
      d_values(1, r) = scale * (values(1, r) - target);
    }
    nn::critic_backward_sequence(nets.critic, tape, d_values, grads->critic);
  }
  return report;
}

Optimizers Optimizers::create(const rollout::RolloutNets& nets, double learning_rate) {
  Optimizers o;
  AdamConfig cfg;
  cfg.learning_rate = learning_rate;
  for (const auto& a : nets.actors) o.actors.emplace_back(a.parameters(), cfg);
  o.critic = Adam(nets.critic.parameters(), cfg);
  return o;
}

UpdateReport ppo_update(rollout::RolloutNets& nets, Optimizers& optimizers,
                        std::span<const AgentTrajectory> trajectories, const PpoSettings& settings) {
  const int n_roles = static_cast<int>(nets.actors.size());
  UpdateReport report;
  report.policy_loss.assign(n_roles, 0.0);
  report.entropy.assign(n_roles, 0.0);
  std::vector<int> role_batches(n_roles, 0);

  std::map<int, std::vector<const AgentTrajectory*>> by_episode;
  for (const auto& tr : trajectories) by_episode[tr.episode].push_back(&tr);
  std::vector<int> episode_ids;
  for (const auto& [id, _] : by_episode) episode_ids.push_back(id);

  std::mt19937_64 rng(settings.seed);
  const int groups = std::max(1, settings.minibatches);
  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    for (std::size_t i = episode_ids.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(episode_ids[i - 1], episode_ids[j]);
    }
    for (int g = 0; g < groups; ++g) {
      const std::size_t begin = episode_ids.size() * static_cast<std::size_t>(g) / groups;
      const std::size_t end = episode_ids.size() * static_cast<std::size_t>(g + 1) / groups;
      std::vector<const AgentTrajectory*> batch;
      for (std::size_t k = begin; k < end; ++k)
        for (const auto* tr : by_episode[episode_ids[k]]) batch.push_back(tr);
      if (batch.empty()) {
        ++report.minibatches_skipped;
        continue;
      }
      NetGradients grads = NetGradients::zeros_like(nets);
      ObjectiveReport obj;
      try {
        obj = masked_objective(nets, batch, settings.coefs, &grads);
      } catch (const DegenerateBatchError&) {
        ++report.minibatches_skipped;
        continue;
      }
      bool finite = std::isfinite(obj.total) && all_finite(std::as_const(grads.critic).parameters());
      for (const auto& a : grads.actors) finite = finite && all_finite(a.parameters());
      if (!finite) {
        report.aborted = true;
        report.message = "non-finite loss or gradient at epoch " + std::to_string(epoch) + ", minibatch " +
                         std::to_string(g) + " (total " + std::to_string(obj.total) + ")";
        return report;
      }
      for (int r = 0; r < n_roles; ++r) {
        if (obj.role_rows[r] == 0) continue;
        clip_grad_norm(grads.actors[r].parameters(), settings.max_grad_norm);
        optimizers.actors[r].step(nets.actors[r].parameters(), std::as_const(grads.actors[r]).parameters());
        report.policy_loss[r] += obj.policy_loss[r];
        report.entropy[r] += obj.entropy[r];
        ++role_batches[r];
      }
      clip_grad_norm(grads.critic.parameters(), settings.max_grad_norm);
      optimizers.critic.step(nets.critic.parameters(), std::as_const(grads.critic).parameters());
      report.value_loss += obj.value_loss;
      ++report.minibatches_run;
    }
  }
  for (int r = 0; r < n_roles; ++r)
    if (role_batches[r] > 0) {
      report.policy_loss[r] /= role_batches[r];
      report.entropy[r] /= role_batches[r];
    }
  if (report.minibatches_run > 0) report.value_loss /= report.minibatches_run;
  return report;
}

}  // namespace etd::train
