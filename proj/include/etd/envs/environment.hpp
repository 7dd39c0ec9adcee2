#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "etd/neural/types.hpp"

namespace etd::envs {

using nn::Vector;

// Episode-level facts: "win", "food_remaining", "food_collected", "captures".
using EnvInfo = std::map<std::string, double>;

struct EnvStep {
  std::vector<Vector> observations;  // one per agent, constant length
  Vector global_state;
  std::vector<double> rewards;       // one per agent
  bool done = false;
  EnvInfo info;
};

class Environment {
 public:
  virtual ~Environment() = default;

  // Starts a fresh episode; deterministic in `seed`.
  virtual EnvStep reset(std::uint64_t seed) = 0;
  // Throws InputError for a wrong action count or an invalid action id.
  virtual EnvStep step(std::span<const int> actions) = 0;

  virtual std::string name() const = 0;
  virtual int n_agents() const = 0;
  virtual int obs_dim() const = 0;
  virtual int state_dim() const = 0;
  virtual int n_actions() const = 0;
  virtual int max_frames() const = 0;

  // Agents with the same role share an actor network.
  virtual int n_roles() const { return 1; }
  virtual int role_of(int /*agent*/) const { return 0; }
  virtual std::string role_name(int /*role*/) const { return "agent"; }
};

struct GridForageConfig {
  int grid = 8;
  int n_agents = 3;
  int n_foods = 3;
  int max_frames = 50;
  int max_agent_level = 3;
  // Upper bound for food levels; 0 means the sum of the agents' levels.
  int max_food_level = 0;

  void validate() const;
};

struct ParticleTagConfig {
  int n_predators = 3;
  int n_prey = 1;
  int max_frames = 100;
  double damping = 0.25;  // fraction of velocity lost per frame
  double dt = 0.1;
  double predator_max_speed = 1.0;
  double prey_max_speed = 1.3;
  double predator_accel = 3.0;
  double prey_accel = 4.0;
  double predator_radius = 0.075;
  double prey_radius = 0.05;
  double boundary_start = 0.9;
  double boundary_coef = 10.0;
  double distance_coef = 0.1;
  double capture_reward = 10.0;

  void validate() const;
};

struct EnvConfig {
  std::string name = "grid_forage";
  GridForageConfig grid_forage;
  ParticleTagConfig particle_tag;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

// Grid forage: fraction of episodes whose info has win = 1. Particle tag:
// mean capture count per episode. Throws InputError on an empty list.
double win_metric(const std::string& env_name, std::span<const EnvInfo> episode_infos);

}  // namespace etd::envs
