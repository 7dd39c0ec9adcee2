// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 iff every
// criterion that ran passed.
//
//   acceptance [--runs DIR] [--skip-training] [--only 1,4,7] [--jobs J] [--fresh]
//
// Training criteria (7-9) keep their runs under --runs; a finished run with
// the same configuration is reused unless --fresh is given.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "etd/errors.hpp"
#include "etd/gating.hpp"
#include "etd/metrics/csv.hpp"
#include "etd/metrics/flops.hpp"
#include "etd/neural/gru.hpp"
#include "etd/rollout.hpp"
#include "etd/smdp.hpp"
#include "etd/trainer/trainer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace etd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

struct RandomEpisode {
  std::vector<oracle::Window> windows;
  std::vector<smdp::DecisionPoint> points;
  double final_value = 0.0;
  bool done = false;
};

RandomEpisode random_episode(std::mt19937_64& rng, double gamma) {
  std::uniform_int_distribution<int> n_points(1, 20), gap(1, 4);
  std::normal_distribution<double> val(0.0, 2.0), rew(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  RandomEpisode ep;
  const int n = n_points(rng);
  ep.done = coin(rng);
  ep.final_value = val(rng);
  int frame = 0;
  for (int i = 0; i < n; ++i) {
    oracle::Window w;
    const int g = gap(rng);
    for (int k = 0; k < g; ++k) w.rewards.push_back(coin(rng) ? rew(rng) : 0.0);
    smdp::DecisionPoint p;
    p.frame = frame;
    p.gap = g;
    p.v1 = val(rng);
    p.v2 = p.v1 + 0.1 * val(rng);
    w.value = p.value();
    p.effective_reward = smdp::effective_reward(w.rewards, gamma, true);
    ep.windows.push_back(w);
    ep.points.push_back(p);
    frame += g;
  }
  for (std::size_t i = 0; i < ep.points.size(); ++i) {
    const bool last = i + 1 == ep.points.size();
    ep.points[i].value_next = last ? (ep.done ? 0.0 : ep.final_value) : ep.points[i + 1].value();
    ep.points[i].done = last && ep.done;
  }
  return ep;
}

Outcome smdp_gae_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const smdp::GaeParams params{trial % 3 == 0 ? 1.0 : 0.99, trial % 5 == 0 ? 1.0 : 0.95};
    RandomEpisode ep = random_episode(rng, params.gamma);
    smdp::smdp_gae(ep.points, params);
    const auto ref = oracle::frame_expansion_gae(ep.windows, ep.final_value, ep.done, params.gamma, params.lambda);
    for (std::size_t i = 0; i < ep.points.size(); ++i) {
      worst = std::max(worst, std::abs(ep.points[i].advantage - ref.advantages[i]));
      worst = std::max(worst, std::abs(ep.points[i].return_target - ref.returns[i]));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-9 && secs < 10.0,
          "1000 episodes, max |diff| " + fmt(worst) + " (<= 1e-9), " + fmt(secs, 3) + " s (< 10 s)"};
}

// ---------------------------------------------------------------- 2

Outcome synchronous_reduction() {
  std::mt19937_64 rng(1002);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> ratio_dist(0.5, 1.5);
  const double gamma = 0.99, lam = 0.95, eps = 0.2;
  long bit_mismatch = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int T = 1 + trial % 30;
    const bool done = trial % 2 == 0;
    const double last = n(rng);
    std::vector<double> rewards(T), values(T);
    for (int t = 0; t < T; ++t) {
      rewards[t] = n(rng);
      values[t] = n(rng);
    }
    std::vector<smdp::DecisionPoint> pts(T);
    for (int t = 0; t < T; ++t) {
      pts[t].frame = t;
      pts[t].v1 = pts[t].v2 = values[t];
      pts[t].effective_reward = smdp::effective_reward(std::span<const double>(&rewards[t], 1), gamma, true);
      if (pts[t].effective_reward != rewards[t]) ++bit_mismatch;
      pts[t].value_next = t + 1 < T ? values[t + 1] : (done ? 0.0 : last);
      pts[t].done = t + 1 == T && done;
      // One-step TD: r + gamma V' (1 - d) - V, evaluated the textbook way.
      const double td = smdp::smdp_td_error(pts[t].effective_reward, gamma, 1, pts[t].value_next, values[t], pts[t].done);
      const double textbook = rewards[t] + gamma * pts[t].value_next * (pts[t].done ? 0.0 : 1.0) - values[t];
      if (td != textbook) ++bit_mismatch;
    }
    if (smdp::discount_power(gamma, 1) != gamma) ++bit_mismatch;
    double g = 1.0;
    for (int k = 1; k <= T; ++k) {
      g *= gamma;
      if (smdp::discount_power(gamma, k) != g) ++bit_mismatch;
    }
    smdp::smdp_gae(pts, smdp::GaeParams{gamma, lam});
    const auto ref = oracle::textbook_gae(rewards, values, last, done, gamma, lam);
    for (int t = 0; t < T; ++t) {
      worst = std::max(worst, std::abs(pts[t].advantage - ref[t]));
      worst = std::max(worst, std::abs(pts[t].return_target - (ref[t] + values[t])));
    }

    // Losses with every mask 1 against the unmasked textbook means.
    std::vector<double> ratios(T), adv(T), targets(T);
    const std::vector<smdp::Mask> masks(T, 1);
    double clip_ref = 0.0, value_ref = 0.0;
    for (int t = 0; t < T; ++t) {
      ratios[t] = ratio_dist(rng);
      adv[t] = ref[t];
      targets[t] = ref[t] + values[t];
      clip_ref += std::min(ratios[t] * adv[t], std::clamp(ratios[t], 1.0 - eps, 1.0 + eps) * adv[t]);
      value_ref += (values[t] - targets[t]) * (values[t] - targets[t]);
    }
    clip_ref /= T;
    value_ref /= T;
    worst = std::max(worst, std::abs(smdp::masked_clip_loss(ratios, adv, masks, eps) - clip_ref));
    worst = std::max(worst, std::abs(smdp::masked_value_loss(values, targets, masks) - value_ref));
  }

  // The trainer path: an all-awake rollout buffer through compute_advantages.
  rollout::EpisodeBuffer buf;
  const int T = 40;
  buf.n_agents = 1;
  buf.length = T;
  buf.states = nn::Matrix::Zero(1, T + 1);
  buf.observations.push_back(nn::Matrix::Zero(1, T));
  buf.frames.resize(1);
  std::vector<double> rewards(T), values(T);
  for (int t = 0; t < T; ++t) {
    rollout::FrameRecord r;
    r.frame = t;
    r.awake = true;
    r.reward = rewards[t] = n(rng);
    r.v1 = r.v2 = values[t] = n(rng);
    r.done = t + 1 == T;
    buf.frames[0].push_back(r);
  }
  const auto trs = train::compute_advantages(std::span(&buf, 1), {0}, smdp::GaeParams{gamma, lam}, false);
  const auto ref = oracle::textbook_gae(rewards, values, 0.0, true, gamma, lam);
  for (int t = 0; t < T; ++t) worst = std::max(worst, std::abs(trs[0].advantage[t] - ref[t]));

  return {bit_mismatch == 0 && worst <= 1e-12, "500 episodes + rollout path, bit-level mismatches " +
                                                   std::to_string(bit_mismatch) + ", max |diff| " + fmt(worst) +
                                                   " (<= 1e-12)"};
}

// ---------------------------------------------------------------- 3

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1003);
  const train::LossCoefficients coefs{0.2, 0.5, 0.01};
  double worst = 0.0;
  int batches = 0, rejected = 0;
  std::size_t max_params = 0;
  while (batches < 100) {
    const int roles = 1 + batches % 2;
    auto nets = fixture::tiny_nets(rng, roles);
    auto trs = fixture::random_trajectories(rng, 6, 8, roles);
    // Central differences straddling the clip kink are meaningless.
    const auto ratios = fixture::awake_ratios(nets, trs);
    if (std::any_of(ratios.begin(), ratios.end(), [&](double r) {
          return std::abs(r - (1.0 - coefs.clip_epsilon)) < 1e-3 || std::abs(r - (1.0 + coefs.clip_epsilon)) < 1e-3;
        })) {
      ++rejected;
      continue;
    }
    for (const auto& a : nets.actors) {
      std::size_t count = 0;
      for (const auto* p : a.parameters()) count += static_cast<std::size_t>(p->size());
      max_params = std::max(max_params, count);
    }
    std::size_t critic_count = 0;
    for (const auto* p : std::as_const(nets.critic).parameters()) critic_count += static_cast<std::size_t>(p->size());
    max_params = std::max(max_params, critic_count);

    const auto batch = fixture::pointers(trs);
    auto grads = train::NetGradients::zeros_like(nets);
    train::masked_objective(nets, batch, coefs, &grads);
    auto params = fixture::all_parameters(nets);
    const auto analytic = fixture::all_gradients(grads);
    auto f = [&] { return train::masked_objective(nets, batch, coefs, nullptr).total; };
    for (std::size_t k = 0; k < params.size(); ++k) {
      const nn::Matrix numeric = oracle::numeric_gradient_4pt(*params[k], f);
      for (nn::Index i = 0; i < numeric.size(); ++i)
        worst = std::max(worst, oracle::relative_error(analytic[k]->data()[i], numeric.data()[i], 1e-6));
    }
    ++batches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-4 && max_params <= 64 && secs < 60.0,
          "100 batches (" + std::to_string(rejected) + " resampled near the clip kink), <= " +
              std::to_string(max_params) + " params per network, max rel err " + fmt(worst) + " (< 1e-4), " +
              fmt(secs, 3) + " s (< 60 s)"};
}

// ---------------------------------------------------------------- 4

Outcome masking_exactness() {
  std::mt19937_64 rng(1004);
  std::normal_distribution<double> big(0.0, 100.0);
  const train::LossCoefficients coefs{0.2, 0.5, 0.01};
  long loss_changes = 0, grad_changes = 0, entries = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int roles = 1 + trial % 2;
    auto nets = fixture::tiny_nets(rng, roles);
    auto trs = fixture::random_trajectories(rng, 6, 10, roles, 0.5);
    auto ga = train::NetGradients::zeros_like(nets);
    const auto a = train::masked_objective(nets, fixture::pointers(trs), coefs, &ga);
    // Perturb one kind of input, or all of them, at every dormant frame.
    const int which = trial % 7;
    for (auto& tr : trs)
      for (int t = 0; t < tr.length(); ++t) {
        if (tr.mask[t]) continue;
        if (which == 0 || which == 6) tr.obs.col(t).setConstant(big(rng));
        if (which == 1 || which == 6) tr.critic_in.col(t).setConstant(big(rng));
        if (which == 2 || which == 6) tr.actions[t] = (tr.actions[t] + 1) % static_cast<int>(fixture::kActions);
        if (which == 3 || which == 6) tr.old_log_prob[t] = big(rng);
        if (which == 4 || which == 6) tr.advantage[t] = big(rng);
        if (which == 5 || which == 6) tr.return_target[t] = big(rng);
      }
    auto gb = train::NetGradients::zeros_like(nets);
    const auto b = train::masked_objective(nets, fixture::pointers(trs), coefs, &gb);
    if (a.total != b.total || a.value_loss_1 != b.value_loss_1 || a.value_loss_2 != b.value_loss_2 ||
        a.policy_loss != b.policy_loss || a.entropy != b.entropy)
      ++loss_changes;
    const auto pa = fixture::all_gradients(ga), pb = fixture::all_gradients(gb);
    for (std::size_t k = 0; k < pa.size(); ++k) {
      const nn::Matrix diff = *pa[k] - *pb[k];
      entries += diff.size();
      grad_changes += (diff.array() != 0.0).count();
    }
  }
  return {loss_changes == 0 && grad_changes == 0,
          "200 perturbed batches, changed losses " + std::to_string(loss_changes) + ", changed gradient entries " +
              std::to_string(grad_changes) + " of " + std::to_string(entries)};
}

// ---------------------------------------------------------------- 5

Outcome hidden_state_preservation() {
  std::mt19937_64 rng(1005);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_real_distribution<double> p_awake(0.05, 0.95);
  long violations = 0, dormant_frames = 0, dormant_flops = 0;
  nn::GruCell cell(4, 6);
  fixture::randomize({&cell.input_weight, &cell.hidden_weight, &cell.bias}, rng, 0.8);
  for (int seq = 0; seq < 10000; ++seq) {
    const int T = len(rng);
    std::bernoulli_distribution awake(p_awake(rng));
    nn::GruState h = nn::GruState::zeros(6);
    std::uint64_t last_awake_hash = 0;
    for (int t = 0; t < T; ++t) {
      const bool m = t == 0 || awake(rng);
      nn::Vector x(4);
      for (int i = 0; i < 4; ++i) x[i] = n(rng);
      nn::FlopMeter meter;
      h = nn::masked_gru_update(cell, x, h, m, &meter);
      const std::uint64_t hash = rollout::hash_vector(h.hidden);
      if (m) {
        last_awake_hash = hash;
      } else {
        ++dormant_frames;
        dormant_flops += static_cast<long>(meter.flops);
        if (hash != last_awake_hash) ++violations;
      }
    }
  }

  // The same property through the rollout instrumentation.
  long rollout_dormant = 0;
  for (const char* name : {"grid_forage", "particle_tag"}) {
    envs::EnvConfig cfg;
    cfg.name = name;
    std::vector<std::unique_ptr<envs::Environment>> environments;
    for (int i = 0; i < 2; ++i) environments.push_back(envs::make_environment(cfg));
    std::mt19937_64 init(7);
    rollout::RolloutNets nets;
    const nn::NetShape shape{16, 1, 8};
    for (int r = 0; r < environments[0]->n_roles(); ++r)
      nets.actors.push_back(nn::make_actor(environments[0]->obs_dim(), environments[0]->n_actions(), shape, init));
    nets.critic = nn::make_critic(environments[0]->state_dim() + environments[0]->n_agents(), shape, 1, init);
    rollout::CollectOptions o;
    o.mode = gating::GateMode::kEtdEntropyOnly;
    o.tau_h = 10.0;
    o.max_sleep = 4;
    o.frames_budget = 1000;
    o.record_hidden_hashes = true;
    // Median entropy of a probe pass as the threshold: about half the
    // decisions sleep.
    std::vector<double> entropies;
    for (const auto& ep : rollout::collect(environments, nets, o).episodes)
      for (const auto& agent : ep.frames)
        for (const auto& rec : agent)
          if (rec.awake) entropies.push_back(rec.entropy);
    std::nth_element(entropies.begin(), entropies.begin() + entropies.size() / 2, entropies.end());
    o.tau_h = entropies[entropies.size() / 2];
    o.seed = 1;
    const auto res = rollout::collect(environments, nets, o);
    for (const auto& ep : res.episodes)
      for (int i = 0; i < ep.n_agents; ++i) {
        std::uint64_t last = 0;
        for (int t = 0; t < ep.length; ++t) {
          if (ep.frames[i][t].awake) {
            last = ep.actor_hidden_hashes[i][t];
            continue;
          }
          ++rollout_dormant;
          if (ep.actor_hidden_hashes[i][t] != last) ++violations;
        }
      }
  }
  return {violations == 0 && dormant_flops == 0 && dormant_frames > 0 && rollout_dormant > 0,
          "10000 mask sequences (" + std::to_string(dormant_frames) + " dormant frames) + " +
              std::to_string(rollout_dormant) + " dormant rollout frames, hash mismatches " +
              std::to_string(violations) + ", dormant flops " + std::to_string(dormant_flops)};
}

// ---------------------------------------------------------------- 6

Outcome gate_truth_table() {
  // Values shared between the observed quantities and the thresholds, so
  // equality is hit often.
  const std::vector<double> levels{0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.75, 2.0};
  long tuples = 0, ties = 0, mismatches = 0;
  for (double h : levels)
    for (double dv : levels)
      for (double th : levels)
        for (double tv : levels) {
          ++tuples;
          if (h == th || dv == tv) ++ties;
          for (int n : {2, 3, 5}) {
            const auto d = gating::decide(h, dv, th, tv, n, gating::GateMode::kEtdDual);
            const int expected = (h <= th && dv <= tv) ? n : 1;
            if (d.delta_t != expected) ++mismatches;
            const auto e = gating::decide(h, dv, th, tv, n, gating::GateMode::kEtdEntropyOnly);
            if (e.delta_t != (h <= th ? n : 1)) ++mismatches;
          }
        }
  return {mismatches == 0 && tuples == 10000 && ties > 0,
          std::to_string(tuples) + " tuples (" + std::to_string(ties) + " with a tie) x N in {2,3,5}, mismatches " +
              std::to_string(mismatches)};
}

// ---------------------------------------------------------------- 10

Outcome flop_identities() {
  train::KeyValues kv = train::load_config("tag_etd");
  kv["env.max_frames"] = "60";
  kv["eval.episodes"] = "6";
  kv["train.n_envs"] = "3";
  const train::TrainConfig base = train::TrainConfig::from_values(kv);
  const train::TrainState st = train::initial_state(base);

  train::TrainConfig vanilla = base;
  vanilla.eval_gate_mode = gating::GateMode::kAlwaysAwake;
  const auto v = train::evaluate(vanilla, st.nets, 0, 6);
  bool ok = v.flop_reduction == 0.0;
  for (const auto& r : v.rows) ok = ok && r.flop_reduction == 0.0 && r.skip_rate == 0.0;
  std::string detail = "vanilla " + fmt(v.flop_reduction);

  for (int n = 2; n <= 5; ++n) {
    train::TrainConfig c = base;
    c.eval_gate_mode = gating::GateMode::kFixedSkip;
    c.max_sleep = n;
    const auto ev = train::evaluate(c, st.nets, 0, 6);
    const double expected = static_cast<double>(n - 1) / static_cast<double>(n);
    ok = ok && ev.flop_reduction == expected;
    for (const auto& r : ev.rows) ok = ok && r.flop_reduction == expected;
    detail += ", fixed_skip(" + std::to_string(n) + ") " + fmt(ev.flop_reduction, 17);
  }

  // Meter counts against m = 1 rows under the data-dependent gates.
  auto environments = train::make_environments(base, 3);
  const auto roles = train::agent_roles(*environments[0]);
  const auto actor_cost = train::agent_inference_costs(base, *environments[0], false);
  const auto full_cost = train::agent_inference_costs(base, *environments[0], true);
  const std::uint64_t critic_cost = full_cost[0] - actor_cost[0];
  rollout::RolloutNets nets = st.nets;
  for (auto& a : nets.actors) a.policy_head.weight *= 50.0;
  long meter_mismatch = 0;
  for (auto mode : {gating::GateMode::kEtdDual, gating::GateMode::kEtdEntropyOnly, gating::GateMode::kFixedSkip,
                    gating::GateMode::kAlwaysAwake}) {
    rollout::CollectOptions o;
    o.mode = mode;
    o.tau_h = 1.0;
    o.tau_v = 0.5;
    o.frames_budget = 600;
    o.run_critic = true;
    o.seed = 99;
    const auto res = rollout::collect(environments, nets, o);
    std::vector<std::uint64_t> rows(roles.size(), 0);
    for (const auto& ep : res.episodes)
      for (int i = 0; i < ep.n_agents; ++i)
        for (const auto& rec : ep.frames[i]) rows[i] += rec.awake ? 1 : 0;
    std::uint64_t actor_expected = 0, critic_expected = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      actor_expected += rows[i] * actor_cost[i];
      critic_expected += rows[i] * critic_cost;
      if (rows[i] != res.inferences[i]) ++meter_mismatch;
    }
    if (res.actor_meter.flops != actor_expected || res.critic_meter.flops != critic_expected) ++meter_mismatch;
  }
  ok = ok && meter_mismatch == 0;
  detail += ", meter/row mismatches " + std::to_string(meter_mismatch);
  return {ok, detail};
}

// ---------------------------------------------------------------- 11

Outcome determinism(const fs::path& root) {
  train::KeyValues kv = train::load_config("lbf_etd");
  kv["train.updates"] = "3";
  kv["train.frames_per_update"] = "1000";
  kv["eval.episodes"] = "8";
  kv["eval.interval"] = "1";
  const auto config = train::TrainConfig::from_values(kv);
  std::vector<std::string> bytes;
  for (const char* name : {"determinism_a", "determinism_b"}) {
    train::TrainOptions o;
    o.out_dir = root / name;
    o.overwrite = true;
    const auto s = train::train(config, o);
    bytes.push_back(slurp(s.paths.metrics) + slurp(s.paths.eval));
  }
  return {bytes[0] == bytes[1] && !bytes[0].empty(),
          "two runs of " + std::to_string(bytes[0].size()) + " CSV bytes, " +
              (bytes[0] == bytes[1] ? "identical" : "different")};
}

// ------------------------------------------------------- training runs

struct RunSpec {
  std::string name;
  train::TrainConfig config;
};

train::TrainConfig preset(const std::string& name, std::uint64_t seed, const train::KeyValues& extra = {}) {
  train::KeyValues kv = train::load_config(name);
  for (const auto& [k, v] : extra) kv[k] = v;
  kv["train.seed"] = std::to_string(seed);
  return train::TrainConfig::from_values(kv);
}

// Final evaluation rows of a finished run (the last block of eval.csv).
std::vector<metrics::MetricsRow> final_eval_rows(const fs::path& dir, int updates) {
  std::vector<metrics::MetricsRow> out;
  for (const auto& r : metrics::read_metrics(dir / "eval.csv"))
    if (r.update == updates) out.push_back(r);
  return out;
}

bool finished(const fs::path& dir, const train::TrainConfig& c) {
  if (!fs::exists(dir / "final.ckpt") || !fs::exists(dir / "config.cfg") || !fs::exists(dir / "eval.csv"))
    return false;
  if (train::read_config_file(dir / "config.cfg") != c.to_values()) return false;
  return !final_eval_rows(dir, c.updates).empty();
}

void run_all(const std::vector<RunSpec>& runs, const fs::path& root, int jobs, bool fresh) {
  std::vector<const RunSpec*> todo;
  for (const auto& r : runs)
    if (fresh || !finished(root / r.name, r.config)) todo.push_back(&r);
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      train::TrainOptions o;
      o.out_dir = root / todo[i]->name;
      o.overwrite = true;
      train::train(todo[i]->config, o);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(io);
      std::cerr << "  trained " << todo[i]->name << " in " << fmt(secs, 4) << " s\n";
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min<int>(jobs, static_cast<int>(todo.size())); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

constexpr int kSeeds = 3;

std::vector<RunSpec> lbf_runs() {
  std::vector<RunSpec> out;
  for (int s = 1; s <= kSeeds; ++s)
    for (const char* p : {"lbf_vanilla", "lbf_fixed_skip", "lbf_etd"})
      out.push_back({std::string(p) + "-seed" + std::to_string(s), preset(p, static_cast<std::uint64_t>(s))});
  return out;
}

std::vector<RunSpec> tag_runs(int max_sleep) {
  std::vector<RunSpec> out;
  for (int s = 1; s <= kSeeds; ++s)
    out.push_back({"tag_etd-N" + std::to_string(max_sleep) + "-seed" + std::to_string(s),
                   preset("tag_etd", static_cast<std::uint64_t>(s), {{"gate.max_sleep", std::to_string(max_sleep)}})});
  return out;
}

long total_frames(const train::TrainConfig& c) { return static_cast<long>(c.updates) * c.frames_per_update; }

Outcome lbf_direction(const fs::path& root, int jobs, bool fresh) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto runs = lbf_runs();
  run_all(runs, root, jobs, fresh);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::map<std::string, double> mean;
  std::map<std::string, std::vector<double>> per_seed;
  long max_frames = 0;
  for (const auto& r : runs) {
    const std::string variant = r.name.substr(0, r.name.find("-seed"));
    const double w = final_eval_rows(root / r.name, r.config.updates).front().win_metric;
    mean[variant] += w / kSeeds;
    per_seed[variant].push_back(w);
    max_frames = std::max(max_frames, total_frames(r.config));
  }
  const double van = mean["lbf_vanilla"], fix = mean["lbf_fixed_skip"], etd = mean["lbf_etd"];
  const bool pass = fix <= van - 0.10 && etd >= van - 0.05 && max_frames <= 500000;
  return {pass, "win vanilla " + fmt(van, 3) + ", fixed_skip " + fmt(fix, 3) + ", etd " + fmt(etd, 3) +
                    " (need fixed <= vanilla - 0.10, etd >= vanilla - 0.05), " + std::to_string(max_frames) +
                    " frames per run, " + fmt(secs, 4) + " s"};
}

Outcome role_specialization(const fs::path& root, int jobs, bool fresh) {
  const auto runs = tag_runs(3);
  run_all(runs, root, jobs, fresh);
  double prey = 0.0, pred = 0.0, train_prey = 0.0, train_pred = 0.0;
  long max_frames = 0;
  for (const auto& r : runs) {
    auto env = envs::make_environment(r.config.env);
    // Context only: rates under the training gate at the last update.
    for (const auto& row : metrics::read_metrics(root / r.name / "metrics.csv")) {
      if (row.update != r.config.updates) continue;
      if (env->role_name(env->role_of(row.agent_id)) == "prey")
        train_prey += row.skip_rate / kSeeds;
      else
        train_pred += row.skip_rate / (kSeeds * (env->n_agents() - 1));
    }
    const auto rows = final_eval_rows(root / r.name, r.config.updates);
    double p = 0.0;
    int np = 0;
    for (const auto& row : rows) {
      if (env->role_name(env->role_of(row.agent_id)) == "prey") {
        prey += row.skip_rate / kSeeds;
      } else {
        p += row.skip_rate;
        ++np;
      }
    }
    pred += p / np / kSeeds;
    max_frames = std::max(max_frames, total_frames(r.config));
  }
  const bool pass = prey >= 5.0 * pred && prey > 0.0 && max_frames <= 1000000;
  return {pass, "prey skip " + fmt(prey, 3) + ", mean predator skip " + fmt(pred, 3) + ", ratio " +
                    (pred > 0.0 ? fmt(prey / pred, 3) : std::string("inf")) + " (>= 5), " +
                    std::to_string(max_frames) + " frames per run; training gate at the last update: prey " +
                    fmt(train_prey, 3) + ", predator " + fmt(train_pred, 3)};
}

Outcome ablation_direction(const fs::path& root, int jobs, bool fresh) {
  const auto n3 = tag_runs(3), n5 = tag_runs(5);
  std::vector<RunSpec> all = n3;
  all.insert(all.end(), n5.begin(), n5.end());
  run_all(all, root, jobs, fresh);
  auto predator_return = [&](const RunSpec& r) {
    auto env = envs::make_environment(r.config.env);
    double total = 0.0;
    int count = 0;
    for (const auto& row : final_eval_rows(root / r.name, r.config.updates))
      if (env->role_name(env->role_of(row.agent_id)) != "prey") {
        total += row.ret;
        ++count;
      }
    return total / count;
  };
  int worse = 0;
  std::string detail = "predator return N=3 vs N=5:";
  for (int s = 0; s < kSeeds; ++s) {
    const double a = predator_return(n3[s]), b = predator_return(n5[s]);
    if (b < a) ++worse;
    detail += " " + fmt(a, 4) + "/" + fmt(b, 4);
  }
  detail += ", N=5 worse on " + std::to_string(worse) + " of 3 seeds (need >= 2)";
  return {worse >= 2, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ETD-MAPPO acceptance criteria", "acceptance"};
  fs::path runs = "acceptance_runs";
  bool skip_training = false, fresh = false;
  std::string only;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--runs", runs, "Directory for training runs");
  app.add_flag("--skip-training", skip_training, "Skip the criteria that train agents (7, 8, 9)");
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--jobs", jobs, "Training runs in parallel")->check(CLI::PositiveNumber);
  app.add_flag("--fresh", fresh, "Retrain even when a finished run exists");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  if (!only.empty()) {
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
  }
  fs::create_directories(runs);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"SMDP-GAE oracle equivalence", smdp_gae_oracle},
      {"synchronous reduction", synchronous_reduction},
      {"gradient checks", gradient_checks},
      {"masking exactness", masking_exactness},
      {"hidden-state preservation", hidden_state_preservation},
      {"gate logic table", gate_truth_table},
      {"LBF directional result", [&] { return lbf_direction(runs, jobs, fresh); }},
      {"role specialization", [&] { return role_specialization(runs, jobs, fresh); }},
      {"ablation direction", [&] { return ablation_direction(runs, jobs, fresh); }},
      {"FLOP accounting identities", flop_identities},
      {"determinism", [&] { return determinism(runs); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    if (skip_training && id >= 7 && id <= 9) {
      std::cout << "SKIP " << id << " " << criteria[i].first << ": training disabled\n" << std::flush;
      continue;
    }
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << criteria[i].first << ": " << o.detail << "\n"
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
