#include "etd/trainer/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "etd/errors.hpp"

namespace etd::train {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_word(std::string_view w) {
  if (w.empty()) return false;
  for (char c : w)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

bool valid_key(std::string_view key) {
  const auto dot = key.find('.');
  if (dot == std::string_view::npos) return valid_word(key);
  return valid_word(key.substr(0, dot)) && valid_word(key.substr(dot + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) { return static_cast<int>(parse_long(key, v)); }

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

gating::GateMode parse_mode(const std::string& key, const std::string& v) {
  try {
    return gating::parse_gate_mode(v);
  } catch (const InputError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

struct Binding {
  ConfigKey key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define ETD_DOUBLE(name, field, help)                                                          \
  Binding {                                                                                    \
    {name, help}, [](TrainConfig& c, const std::string& v) { c.field = parse_double(name, v); }, \
        [](const TrainConfig& c) { return format_double(c.field); }                            \
  }
#define ETD_INT(name, field, help)                                                           \
  Binding {                                                                                  \
    {name, help}, [](TrainConfig& c, const std::string& v) { c.field = parse_int(name, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.field); }                         \
  }
#define ETD_BOOL(name, field, help)                                                           \
  Binding {                                                                                   \
    {name, help}, [](TrainConfig& c, const std::string& v) { c.field = parse_bool(name, v); }, \
        [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); }          \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      Binding{{"env.name", "environment: grid_forage or particle_tag"},
              [](TrainConfig& c, const std::string& v) { c.env.name = v; },
              [](const TrainConfig& c) { return c.env.name; }},
      Binding{{"env.seed", "episode seed stream (0 derives it from train.seed)"},
              [](TrainConfig& c, const std::string& v) { c.env_seed = parse_u64("env.seed", v); },
              [](const TrainConfig& c) { return std::to_string(c.env_seed); }},
      Binding{{"env.max_frames", "episode length limit for the selected environment"},
              [](TrainConfig& c, const std::string& v) {
                const int n = parse_int("env.max_frames", v);
                c.env.grid_forage.max_frames = n;
                c.env.particle_tag.max_frames = n;
              },
              [](const TrainConfig& c) {
                return std::to_string(c.env.name == "particle_tag" ? c.env.particle_tag.max_frames
                                                                   : c.env.grid_forage.max_frames);
              }},
      ETD_INT("env.grid", env.grid_forage.grid, "grid_forage: side length"),
      ETD_INT("env.n_agents", env.grid_forage.n_agents, "grid_forage: number of agents"),
      ETD_INT("env.n_foods", env.grid_forage.n_foods, "grid_forage: number of foods"),
      ETD_INT("env.max_agent_level", env.grid_forage.max_agent_level, "grid_forage: agent levels drawn from 1..this"),
      ETD_INT("env.max_food_level", env.grid_forage.max_food_level,
              "grid_forage: food level cap (0 = sum of agent levels)"),
      ETD_INT("env.n_predators", env.particle_tag.n_predators, "particle_tag: predators"),
      ETD_INT("env.n_prey", env.particle_tag.n_prey, "particle_tag: prey"),
      ETD_DOUBLE("env.damping", env.particle_tag.damping, "particle_tag: fraction of velocity lost per frame"),
      ETD_DOUBLE("env.dt", env.particle_tag.dt, "particle_tag: integration step"),
      ETD_DOUBLE("env.predator_max_speed", env.particle_tag.predator_max_speed, "particle_tag: predator speed cap"),
      ETD_DOUBLE("env.prey_max_speed", env.particle_tag.prey_max_speed, "particle_tag: prey speed cap"),
      ETD_DOUBLE("env.predator_accel", env.particle_tag.predator_accel, "particle_tag: predator impulse"),
      ETD_DOUBLE("env.prey_accel", env.particle_tag.prey_accel, "particle_tag: prey impulse"),
      ETD_DOUBLE("env.predator_radius", env.particle_tag.predator_radius, "particle_tag: predator radius"),
      ETD_DOUBLE("env.prey_radius", env.particle_tag.prey_radius, "particle_tag: prey radius"),
      ETD_DOUBLE("env.boundary_start", env.particle_tag.boundary_start, "particle_tag: soft wall onset"),
      ETD_DOUBLE("env.boundary_coef", env.particle_tag.boundary_coef, "particle_tag: quadratic wall penalty"),
      ETD_DOUBLE("env.distance_coef", env.particle_tag.distance_coef, "particle_tag: distance shaping weight"),
      ETD_DOUBLE("env.capture_reward", env.particle_tag.capture_reward, "particle_tag: reward per collision"),
      Binding{{"gate.mode", "etd_dual, etd_entropy_only, fixed_skip or always_awake"},
              [](TrainConfig& c, const std::string& v) { c.gate_mode = parse_mode("gate.mode", v); },
              [](const TrainConfig& c) { return gating::to_string(c.gate_mode); }},
      ETD_INT("gate.max_sleep", max_sleep, "sleep length N (also the fixed-skip period)"),
      ETD_DOUBLE("gate.tau_h_start", tau_h_start, "entropy threshold at update 0 (nats)"),
      ETD_DOUBLE("gate.tau_h_end", tau_h_end, "entropy threshold at the last update (nats)"),
      ETD_DOUBLE("gate.tau_v_start", tau_v_start, "critic divergence threshold at update 0"),
      ETD_DOUBLE("gate.tau_v_end", tau_v_end, "critic divergence threshold at the last update"),
      ETD_BOOL("gate.anneal", anneal, "anneal thresholds linearly (false: hold the end values)"),
      Binding{{"eval.gate_mode", "gate used by evaluation episodes"},
              [](TrainConfig& c, const std::string& v) { c.eval_gate_mode = parse_mode("eval.gate_mode", v); },
              [](const TrainConfig& c) { return gating::to_string(c.eval_gate_mode); }},
      ETD_INT("eval.episodes", eval_episodes, "episodes per evaluation"),
      ETD_INT("eval.interval", eval_interval, "updates between evaluations"),
      ETD_BOOL("eval.greedy", eval_greedy, "greedy actions during evaluation"),
      ETD_INT("train.updates", updates, "number of PPO updates"),
      Binding{{"train.frames_per_update", "environment frames collected per update"},
              [](TrainConfig& c, const std::string& v) {
                c.frames_per_update = parse_long("train.frames_per_update", v);
              },
              [](const TrainConfig& c) { return std::to_string(c.frames_per_update); }},
      ETD_INT("train.ppo_epochs", ppo_epochs, "passes over each batch"),
      ETD_INT("train.minibatches", minibatches, "episode-grouped minibatches per epoch"),
      ETD_DOUBLE("train.lr", learning_rate, "Adam learning rate (actor and critic)"),
      ETD_DOUBLE("train.gamma", gamma, "discount factor"),
      ETD_DOUBLE("train.lambda", lambda, "GAE mixing"),
      ETD_DOUBLE("train.clip_epsilon", clip_epsilon, "PPO clip range"),
      ETD_DOUBLE("train.value_coef", value_coef, "value loss coefficient"),
      ETD_DOUBLE("train.entropy_coef", entropy_coef, "entropy bonus coefficient"),
      ETD_DOUBLE("train.max_grad_norm", max_grad_norm, "per-network gradient norm cap (0 = off)"),
      Binding{{"train.seed", "master seed"},
              [](TrainConfig& c, const std::string& v) { c.seed = parse_u64("train.seed", v); },
              [](const TrainConfig& c) { return std::to_string(c.seed); }},
      ETD_INT("train.n_envs", n_envs, "environment instances stepped in lockstep"),
      Binding{{"net.mlp_width", "MLP width"},
              [](TrainConfig& c, const std::string& v) { c.net.mlp_width = parse_long("net.mlp_width", v); },
              [](const TrainConfig& c) { return std::to_string(c.net.mlp_width); }},
      Binding{{"net.mlp_layers", "MLP depth"},
              [](TrainConfig& c, const std::string& v) { c.net.mlp_layers = parse_long("net.mlp_layers", v); },
              [](const TrainConfig& c) { return std::to_string(c.net.mlp_layers); }},
      Binding{{"net.gru_hidden", "recurrent cell width"},
              [](TrainConfig& c, const std::string& v) { c.net.gru_hidden = parse_long("net.gru_hidden", v); },
              [](const TrainConfig& c) { return std::to_string(c.net.gru_hidden); }},
      ETD_INT("net.critic_trunks", critic_trunks, "1: shared critic trunk, 2: one trunk per value head"),
      ETD_BOOL("metrics.wall_clock", wall_clock, "record elapsed seconds (breaks byte-identical reruns)"),
      ETD_INT("checkpoint.interval", checkpoint_interval, "updates between resumable checkpoints (0 = end only)"),
  };
  return table;
}

#undef ETD_DOUBLE
#undef ETD_INT
#undef ETD_BOOL

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

KeyValues parse_config_text(std::string_view text, const std::string& origin) {
  KeyValues out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_key(key)) throw ConfigError(where + ": malformed key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    out[key] = value;
  }
  return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string format_config(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& b : bindings()) out.push_back(b.key);
    return out;
  }();
  return keys;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& b : bindings()) {
    if (b.key.name == key) {
      b.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig TrainConfig::from_values(const KeyValues& values) {
  TrainConfig c;
  // env.name first so env.max_frames lands on defaults consistently.
  if (auto it = values.find("env.name"); it != values.end()) c.set(it->first, it->second);
  for (const auto& [k, v] : values) c.set(k, v);
  c.validate();
  return c;
}

KeyValues TrainConfig::to_values() const {
  KeyValues out;
  for (const auto& b : bindings()) out[b.key.name] = b.get(*this);
  return out;
}

void TrainConfig::validate() const {
  if (env.name != "grid_forage" && env.name != "particle_tag")
    throw ConfigError("env.name must be grid_forage or particle_tag, got '" + env.name + "'");
  if (env.name == "grid_forage") env.grid_forage.validate();
  else env.particle_tag.validate();
  if (gate_mode != gating::GateMode::kAlwaysAwake && max_sleep < 2)
    throw ConfigError("gate.max_sleep must be >= 2");
  if (tau_h_start < 0 || tau_h_end < 0 || tau_v_start < 0 || tau_v_end < 0)
    throw ConfigError("gate thresholds must be >= 0");
  if (eval_episodes < 1 || eval_interval < 1) throw ConfigError("eval.episodes and eval.interval must be >= 1");
  if (updates < 1) throw ConfigError("train.updates must be >= 1");
  if (frames_per_update < 1) throw ConfigError("train.frames_per_update must be >= 1");
  if (ppo_epochs < 1 || minibatches < 1) throw ConfigError("train.ppo_epochs and train.minibatches must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train.gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("train.lambda must be in [0, 1]");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("train.clip_epsilon must be in (0, 1)");
  if (!(value_coef > 0.0) || !(entropy_coef >= 0.0)) throw ConfigError("loss coefficients out of range");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("train.max_grad_norm must be >= 0");
  if (n_envs < 1) throw ConfigError("train.n_envs must be >= 1");
  if (net.mlp_width < 1 || net.mlp_layers < 1 || net.gru_hidden < 1) throw ConfigError("net widths must be >= 1");
  if (critic_trunks != 1 && critic_trunks != 2) throw ConfigError("net.critic_trunks must be 1 or 2");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint.interval must be >= 0");
}

std::uint64_t TrainConfig::hash() const { return fnv1a(format_config(to_values())); }

gating::GateThresholds TrainConfig::thresholds() const {
  gating::GateThresholds t;
  t.tau_h_start = anneal ? tau_h_start : tau_h_end;
  t.tau_h_end = tau_h_end;
  t.tau_v_start = anneal ? tau_v_start : tau_v_end;
  t.tau_v_end = tau_v_end;
  t.total_updates = updates;
  return t;
}

const std::map<std::string, std::string>& builtin_presets() {
  static const std::map<std::string, std::string> presets = {
      {"lbf_etd", R"(# Grid forage, dual-gated trigger during training, entropy gate at evaluation.
env.name = grid_forage
gate.mode = etd_dual
gate.max_sleep = 3
eval.gate_mode = etd_entropy_only
train.updates = 250
train.frames_per_update = 2000
eval.greedy = false
)"},
      {"lbf_fixed_skip", R"(# Grid forage, every decision holds its action for 3 frames.
env.name = grid_forage
gate.mode = fixed_skip
gate.max_sleep = 3
eval.gate_mode = fixed_skip
train.updates = 250
train.frames_per_update = 2000
eval.greedy = false
)"},
      {"lbf_vanilla", R"(# Grid forage, synchronous baseline.
env.name = grid_forage
gate.mode = always_awake
eval.gate_mode = always_awake
train.updates = 250
train.frames_per_update = 2000
eval.greedy = false
)"},
      {"tag_etd", R"(# Particle tag, 3 predators against 1 prey.
env.name = particle_tag
gate.mode = etd_dual
gate.max_sleep = 3
eval.gate_mode = etd_entropy_only
train.updates = 100
train.frames_per_update = 8000
)"},
  };
  return presets;
}

KeyValues load_config(const std::string& spec) {
  if (std::filesystem::exists(spec)) return read_config_file(spec);
  const auto& presets = builtin_presets();
  if (auto it = presets.find(spec); it != presets.end()) return parse_config_text(it->second, "preset:" + spec);
  throw IoError("config '" + spec + "' is neither a file nor a built-in preset");
}

}  // namespace etd::train
