#include "etd/envs/environment.hpp"

#include "etd/envs/grid_forage.hpp"
#include "etd/envs/particle_tag.hpp"
#include "etd/errors.hpp"

namespace etd::envs {

void GridForageConfig::validate() const {
  if (grid < 3) throw ConfigError("grid_forage: grid must be >= 3");
  if (n_agents < 1 || n_foods < 1) throw ConfigError("grid_forage: need at least one agent and one food");
  if (max_frames < 1) throw ConfigError("grid_forage: max_frames must be >= 1");
  if (max_agent_level < 1) throw ConfigError("grid_forage: max_agent_level must be >= 1");
  if (max_food_level < 0) throw ConfigError("grid_forage: max_food_level must be >= 0");
  const int interior = (grid - 2) * (grid - 2);
  // Foods sit on interior cells with a free ring around each.
  if (n_foods * 4 > interior || n_agents + n_foods > grid * grid)
    throw ConfigError("grid_forage: grid too small for the requested entities");
}

void ParticleTagConfig::validate() const {
  if (n_predators < 1 || n_prey < 1) throw ConfigError("particle_tag: need predators and prey");
  if (max_frames < 1) throw ConfigError("particle_tag: max_frames must be >= 1");
  if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("particle_tag: damping must be in [0, 1)");
  if (!(dt > 0.0)) throw ConfigError("particle_tag: dt must be > 0");
  if (!(predator_max_speed > 0.0 && prey_max_speed > 0.0))
    throw ConfigError("particle_tag: max speeds must be > 0");
  if (!(prey_max_speed > predator_max_speed))
    throw ConfigError("particle_tag: prey must be faster than predators");
  if (!(predator_accel > 0.0 && prey_accel > 0.0)) throw ConfigError("particle_tag: accelerations must be > 0");
  if (!(predator_radius > 0.0 && prey_radius > 0.0)) throw ConfigError("particle_tag: radii must be > 0");
  if (!(boundary_coef >= 0.0) || !(boundary_start > 0.0 && boundary_start <= 1.0))
    throw ConfigError("particle_tag: invalid boundary penalty");
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  if (config.name == "grid_forage") return std::make_unique<GridForage>(config.grid_forage);
  if (config.name == "particle_tag") return std::make_unique<ParticleTag>(config.particle_tag);
  throw ConfigError("unknown environment '" + config.name + "' (expected grid_forage or particle_tag)");
}

double win_metric(const std::string& env_name, std::span<const EnvInfo> episode_infos) {
  if (episode_infos.empty()) throw InputError("win_metric: no completed episodes");
  const char* key = env_name == "particle_tag" ? "captures" : "win";
  double total = 0.0;
  for (const auto& info : episode_infos) {
    auto it = info.find(key);
    if (it != info.end()) total += it->second;
  }
  return total / static_cast<double>(episode_infos.size());
}

}  // namespace etd::envs
