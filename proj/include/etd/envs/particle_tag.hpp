#pragma once

#include "etd/envs/environment.hpp"

namespace etd::envs {

// Predator-prey pursuit in the arena [-1, 1]^2. Agents 0..n_predators-1 are
// predators, the rest prey.
//
// Actions: 0 noop, 1 +x, 2 -x, 3 +y, 4 -y acceleration impulses. Each frame
//   v <- (1 - damping) v + accel * u * dt,  |v| clamped to the role maximum,
//   p <- clamp(p + v dt, -1, 1).
// A predator and a prey collide when their distance is below the sum of
// their radii. Predator reward: -distance_coef * distance to the nearest
// prey + capture_reward per colliding predator-prey pair (shared by all
// predators). Prey reward: distance_coef * min distance to predators -
// capture_reward per collision involving it - boundary_coef * sum over
// coordinates of max(0, |x| - boundary_start)^2.
//
// Observation: own velocity, own position, then relative positions and
// velocities of every other agent in index order. Global state: every agent's
// observation followed by each prey's absolute position.
class ParticleTag final : public Environment {
 public:
  enum Action { kNoop = 0, kPlusX, kMinusX, kPlusY, kMinusY, kNumActions };

  struct Body {
    double px = 0.0, py = 0.0;
    double vx = 0.0, vy = 0.0;
  };

  explicit ParticleTag(ParticleTagConfig config);

  EnvStep reset(std::uint64_t seed) override;
  EnvStep step(std::span<const int> actions) override;

  std::string name() const override { return "particle_tag"; }
  int n_agents() const override { return config_.n_predators + config_.n_prey; }
  int obs_dim() const override { return 4 + 4 * (n_agents() - 1); }
  int state_dim() const override { return n_agents() * obs_dim() + 2 * config_.n_prey; }
  int n_actions() const override { return kNumActions; }
  int max_frames() const override { return config_.max_frames; }
  int n_roles() const override { return 2; }
  int role_of(int agent) const override { return is_predator(agent) ? 0 : 1; }
  std::string role_name(int role) const override { return role == 0 ? "predator" : "prey"; }

  bool is_predator(int agent) const { return agent < config_.n_predators; }
  double max_speed(int agent) const;
  const std::vector<Body>& bodies() const { return bodies_; }
  EnvStep set_state(std::vector<Body> bodies);
  int frame() const { return frame_; }

 private:
  EnvStep observe(std::vector<double> rewards, int collisions_this_frame) const;
  bool collides(int predator, int prey) const;

  ParticleTagConfig config_;
  std::vector<Body> bodies_;
  int frame_ = 0;
  int captures_ = 0;
};

}  // namespace etd::envs
