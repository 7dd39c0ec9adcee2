#include "etd/trainer/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "etd/errors.hpp"
#include "etd/metrics/flops.hpp"

namespace etd::train {

namespace {

constexpr std::uint64_t kInitStream = 0x494e4954;  // "INIT"
constexpr std::uint64_t kRollStream = 0x524f4c4c;  // "ROLL"
constexpr std::uint64_t kPpoStream = 0x50504f00;
constexpr std::uint64_t kEvalStream = 0x4556414c;  // "EVAL"

std::uint64_t rollout_master(const TrainConfig& c) { return c.env_seed != 0 ? c.env_seed : c.seed; }

rollout::CollectOptions collect_options(const TrainConfig& c, gating::GateMode mode, int update) {
  const auto th = c.thresholds();
  rollout::CollectOptions o;
  o.mode = mode;
  o.max_sleep = c.max_sleep;
  o.tau_h = th.tau_h(update);
  o.tau_v = th.tau_v(update);
  return o;
}

void truncate_rows(const std::filesystem::path& path, long max_update) {
  if (!std::filesystem::exists(path)) return;
  auto rows = metrics::read_metrics(path);
  std::erase_if(rows, [&](const metrics::MetricsRow& r) { return r.update > max_update; });
  metrics::write_metrics(path, rows, metrics::WriteMode::kOverwrite);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void store_optimizer(nn::Checkpoint& ckpt, const std::string& prefix, const Adam& opt) {
  ckpt.metadata[prefix + "steps"] = std::to_string(opt.steps());
  for (std::size_t k = 0; k < opt.first_moments().size(); ++k) {
    ckpt.tensors.push_back({prefix + "m" + std::to_string(k), opt.first_moments()[k]});
    ckpt.tensors.push_back({prefix + "v" + std::to_string(k), opt.second_moments()[k]});
  }
}

void load_optimizer(const nn::Checkpoint& ckpt, const std::string& prefix, Adam& opt) {
  auto it = ckpt.metadata.find(prefix + "steps");
  if (it == ckpt.metadata.end()) throw IoError("checkpoint lacks optimizer state " + prefix);
  opt.set_steps(std::stol(it->second));
  for (std::size_t k = 0; k < opt.first_moments().size(); ++k) {
    const auto& m = ckpt.tensor(prefix + "m" + std::to_string(k));
    const auto& v = ckpt.tensor(prefix + "v" + std::to_string(k));
    if (m.rows() != opt.first_moments()[k].rows() || m.cols() != opt.first_moments()[k].cols() ||
        v.rows() != m.rows() || v.cols() != m.cols())
      throw IoError("optimizer tensor shape mismatch for " + prefix);
    opt.first_moments()[k] = m;
    opt.second_moments()[k] = v;
  }
}

}  // namespace

std::vector<std::unique_ptr<envs::Environment>> make_environments(const TrainConfig& config, int count) {
  std::vector<std::unique_ptr<envs::Environment>> out;
  for (int i = 0; i < count; ++i) out.push_back(envs::make_environment(config.env));
  return out;
}

rollout::RolloutNets make_nets(const TrainConfig& config, const envs::Environment& proto, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  rollout::RolloutNets nets;
  for (int r = 0; r < proto.n_roles(); ++r)
    nets.actors.push_back(nn::make_actor(proto.obs_dim(), proto.n_actions(), config.net, rng));
  nets.critic = nn::make_critic(proto.state_dim() + proto.n_agents(), config.net, config.critic_trunks, rng);
  return nets;
}

std::vector<int> agent_roles(const envs::Environment& env) {
  std::vector<int> roles;
  for (int i = 0; i < env.n_agents(); ++i) roles.push_back(env.role_of(i));
  return roles;
}

std::vector<std::uint64_t> agent_inference_costs(const TrainConfig& config, const envs::Environment& env,
                                                 bool with_critic) {
  const auto actor = metrics::actor_inference_flops(env.obs_dim(), env.n_actions(), config.net);
  const auto critic = with_critic ? metrics::critic_inference_flops(env.state_dim() + env.n_agents(), config.net,
                                                                    config.critic_trunks)
                                  : 0;
  return std::vector<std::uint64_t>(env.n_agents(), actor + critic);
}

std::vector<metrics::MetricsRow> summarize(const TrainConfig& config, const envs::Environment& env,
                                           const rollout::CollectResult& result, long update, bool with_critic) {
  const int n = env.n_agents();
  std::vector<envs::EnvInfo> infos;
  for (const auto& ep : result.episodes) infos.push_back(ep.outcome);
  const double win = envs::win_metric(config.env.name, infos);

  std::vector<long> executed(n, 0), frames(n, 0);
  std::vector<double> returns(n, 0.0), entropy(n, 0.0), dv(n, 0.0);
  for (const auto& ep : result.episodes) {
    for (int i = 0; i < n; ++i) {
      returns[i] += ep.returns[i];
      frames[i] += ep.length;
      for (const auto& f : ep.frames[i]) {
        if (!f.awake) continue;
        ++executed[i];
        entropy[i] += f.entropy;
        dv[i] += std::abs(f.v1 - f.v2);
      }
    }
  }
  const auto costs = agent_inference_costs(config, env, with_critic);
  const double reduction = metrics::flop_reduction(executed, frames, costs);
  std::vector<metrics::MetricsRow> rows;
  for (int i = 0; i < n; ++i) {
    metrics::MetricsRow r;
    r.update = update;
    r.agent_id = i;
    r.ret = returns[i] / static_cast<double>(result.episodes.size());
    r.win_metric = win;
    r.skip_rate = metrics::skip_rate(frames[i] - executed[i], frames[i]);
    r.flop_reduction = reduction;
    if (executed[i] > 0) {
      r.mean_entropy = entropy[i] / static_cast<double>(executed[i]);
      r.mean_dv = with_critic ? dv[i] / static_cast<double>(executed[i]) : 0.0;
    }
    rows.push_back(r);
  }
  return rows;
}

EvalResult evaluate(const TrainConfig& config, const rollout::RolloutNets& nets, int update, int episodes) {
  if (episodes < 1) throw InputError("evaluate: need at least one episode");
  auto envs = make_environments(config, std::min(config.n_envs, episodes));
  auto opts = collect_options(config, config.eval_gate_mode, update);
  opts.greedy = config.eval_greedy;
  opts.run_critic = config.eval_gate_mode == gating::GateMode::kEtdDual;
  opts.max_episodes = episodes;
  opts.seed = rollout::derive_seed(rollout_master(config), kEvalStream);
  const auto result = rollout::collect(envs, nets, opts);
  EvalResult out;
  out.rows = summarize(config, *envs.front(), result, update, opts.run_critic);
  out.win_metric = out.rows.front().win_metric;
  out.flop_reduction = out.rows.front().flop_reduction;
  return out;
}

TrainState initial_state(const TrainConfig& config) {
  auto proto = envs::make_environment(config.env);
  TrainState s;
  s.nets = make_nets(config, *proto, rollout::derive_seed(config.seed, kInitStream));
  s.optimizers = Optimizers::create(s.nets, config.learning_rate);
  return s;
}

nn::Checkpoint make_checkpoint(const TrainConfig& config, const TrainState& state) {
  nn::Checkpoint ckpt;
  ckpt.config_hash = config.hash();
  ckpt.metadata["config"] = format_config(config.to_values());
  ckpt.metadata["update"] = std::to_string(state.update);
  ckpt.metadata["best_score"] = format_double(state.best_score);
  ckpt.metadata["has_best"] = state.has_best ? "1" : "0";
  for (std::size_t r = 0; r < state.nets.actors.size(); ++r) {
    const std::string prefix = "actor" + std::to_string(r) + ".";
    nn::store_parameters(ckpt, prefix, state.nets.actors[r].named_parameters());
    store_optimizer(ckpt, "opt." + prefix, state.optimizers.actors[r]);
  }
  nn::store_parameters(ckpt, "critic.", state.nets.critic.named_parameters());
  store_optimizer(ckpt, "opt.critic.", state.optimizers.critic);
  return ckpt;
}

TrainConfig checkpoint_config(const nn::Checkpoint& ckpt) {
  auto it = ckpt.metadata.find("config");
  if (it == ckpt.metadata.end()) throw IoError("checkpoint carries no configuration");
  return TrainConfig::from_values(parse_config_text(it->second, "checkpoint"));
}

TrainState restore_state(const TrainConfig& config, const nn::Checkpoint& ckpt) {
  if (ckpt.config_hash != config.hash())
    throw ConfigError("checkpoint was written under a different configuration");
  TrainState s = initial_state(config);
  for (std::size_t r = 0; r < s.nets.actors.size(); ++r) {
    const std::string prefix = "actor" + std::to_string(r) + ".";
    nn::load_parameters(ckpt, prefix, s.nets.actors[r].named_parameters(), s.nets.actors[r].parameters());
    load_optimizer(ckpt, "opt." + prefix, s.optimizers.actors[r]);
  }
  nn::load_parameters(ckpt, "critic.", s.nets.critic.named_parameters(), s.nets.critic.parameters());
  load_optimizer(ckpt, "opt.critic.", s.optimizers.critic);
  s.update = std::stoi(ckpt.metadata.at("update"));
  s.best_score = std::stod(ckpt.metadata.at("best_score"));
  s.has_best = ckpt.metadata.at("has_best") == "1";
  return s;
}

RunPaths RunPaths::in(const std::filesystem::path& dir) {
  RunPaths p;
  p.dir = dir;
  p.config = dir / "config.cfg";
  p.metrics = dir / "metrics.csv";
  p.eval = dir / "eval.csv";
  p.last_ckpt = dir / "last.ckpt";
  p.best_ckpt = dir / "best.ckpt";
  p.final_ckpt = dir / "final.ckpt";
  return p;
}

TrainSummary train(const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  TrainSummary summary;
  summary.paths = RunPaths::in(options.out_dir);
  const RunPaths& paths = summary.paths;

  std::error_code ec;
  std::filesystem::create_directories(paths.dir, ec);
  if (ec) throw IoError("cannot create run directory " + paths.dir.string() + ": " + ec.message());

  TrainState state;
  if (options.resume) {
    state = restore_state(config, nn::read_checkpoint(*options.resume));
    truncate_rows(paths.metrics, state.update);
    truncate_rows(paths.eval, state.update);
  } else {
    if (std::filesystem::exists(paths.metrics) && !options.overwrite)
      throw IoError("run directory " + paths.dir.string() + " already holds a run; pass --overwrite or --resume");
    for (const auto& p : {paths.metrics, paths.eval, paths.last_ckpt, paths.best_ckpt, paths.final_ckpt})
      std::filesystem::remove(p, ec);
    state = initial_state(config);
  }
  write_text(paths.config, format_config(config.to_values()));

  auto environments = make_environments(config, config.n_envs);
  const auto& proto = *environments.front();
  const auto roles = agent_roles(proto);
  PpoSettings ppo;
  ppo.epochs = config.ppo_epochs;
  ppo.minibatches = config.minibatches;
  ppo.coefs = {config.clip_epsilon, config.value_coef, config.entropy_coef};
  ppo.max_grad_norm = config.max_grad_norm;
  const smdp::GaeParams gae{config.gamma, config.lambda};

  auto elapsed = [&] {
    if (!config.wall_clock) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  while (state.update < config.updates) {
    if (options.stop_after > 0 && summary.updates_run >= options.stop_after) {
      nn::write_checkpoint(paths.last_ckpt, make_checkpoint(config, state));
      summary.paused = true;
      return summary;
    }
    const int u = state.update;
    auto opts = collect_options(config, config.gate_mode, u);
    opts.frames_budget = config.frames_per_update;
    opts.seed = rollout::derive_seed(rollout_master(config), kRollStream, static_cast<std::uint64_t>(u));
    const auto result = rollout::collect(environments, state.nets, opts);

    const auto trajectories = compute_advantages(result.episodes, roles, gae);
    ppo.seed = rollout::derive_seed(config.seed, kPpoStream, static_cast<std::uint64_t>(u));
    const UpdateReport report = ppo_update(state.nets, state.optimizers, trajectories, ppo);
    if (report.aborted && options.log) *options.log << "update " << u + 1 << " aborted: " << report.message << "\n";
    state.update = u + 1;

    auto rows = summarize(config, proto, result, state.update, true);
    for (auto& r : rows) {
      r.policy_loss = report.policy_loss[roles[r.agent_id]];
      r.value_loss = report.value_loss;
      r.wall_clock_s = elapsed();
    }
    metrics::write_metrics(paths.metrics, rows, metrics::WriteMode::kAppend);

    const bool last = state.update == config.updates;
    if (state.update % config.eval_interval == 0 || last) {
      EvalResult ev = evaluate(config, state.nets, state.update, config.eval_episodes);
      for (auto& r : ev.rows) r.wall_clock_s = elapsed();
      metrics::write_metrics(paths.eval, ev.rows, metrics::WriteMode::kAppend);
      if (!state.has_best || ev.win_metric > state.best_score) {
        state.best_score = ev.win_metric;
        state.has_best = true;
        nn::write_checkpoint(paths.best_ckpt, make_checkpoint(config, state));
      }
      if (last) summary.final_eval = ev;
    }
    if (options.log) {
      double mean_ret = 0.0, mean_skip = 0.0;
      for (const auto& r : rows) {
        mean_ret += r.ret / static_cast<double>(rows.size());
        mean_skip += r.skip_rate / static_cast<double>(rows.size());
      }
      *options.log << "update " << state.update << "/" << config.updates << " frames " << result.frames
                   << " return " << mean_ret << " win " << rows.front().win_metric << " skip " << mean_skip
                   << " flop_reduction " << rows.front().flop_reduction << "\n";
    }
    if ((config.checkpoint_interval > 0 && state.update % config.checkpoint_interval == 0) || last)
      nn::write_checkpoint(paths.last_ckpt, make_checkpoint(config, state));
    ++summary.updates_run;
  }
  if (summary.updates_run == 0) summary.final_eval = evaluate(config, state.nets, state.update, config.eval_episodes);
  nn::write_checkpoint(paths.final_ckpt, make_checkpoint(config, state));
  return summary;
}

}  // namespace etd::train
