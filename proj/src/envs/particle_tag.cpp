#include "etd/envs/particle_tag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "etd/errors.hpp"

namespace etd::envs {

namespace {

double distance(const ParticleTag::Body& a, const ParticleTag::Body& b) {
  return std::hypot(a.px - b.px, a.py - b.py);
}

double wall_penalty(double x, double start) {
  const double excess = std::abs(x) - start;
  return excess > 0.0 ? excess * excess : 0.0;
}

}  // namespace

ParticleTag::ParticleTag(ParticleTagConfig config) : config_(config) { config_.validate(); }

double ParticleTag::max_speed(int agent) const {
  return is_predator(agent) ? config_.predator_max_speed : config_.prey_max_speed;
}

bool ParticleTag::collides(int predator, int prey) const {
  return distance(bodies_[predator], bodies_[prey]) < config_.predator_radius + config_.prey_radius;
}

EnvStep ParticleTag::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<Body> bodies(n_agents());
  for (auto& b : bodies) {
    b.px = uniform(rng);
    b.py = uniform(rng);
  }
  return set_state(std::move(bodies));
}

EnvStep ParticleTag::set_state(std::vector<Body> bodies) {
  if (static_cast<int>(bodies.size()) != n_agents())
    throw InputError("particle_tag: body count does not match the configuration");
  bodies_ = std::move(bodies);
  frame_ = 0;
  captures_ = 0;
  return observe(std::vector<double>(n_agents(), 0.0), 0);
}

EnvStep ParticleTag::step(std::span<const int> actions) {
  const int n = n_agents();
  if (static_cast<int>(actions.size()) != n)
    throw InputError("particle_tag: expected " + std::to_string(n) + " actions, got " +
                     std::to_string(actions.size()));
  for (int a : actions)
    if (a < 0 || a >= kNumActions) throw InputError("particle_tag: invalid action id " + std::to_string(a));
  if (frame_ >= config_.max_frames) throw UsageError("particle_tag: step called on a finished episode");

  for (int i = 0; i < n; ++i) {
    Body& b = bodies_[i];
    double ux = 0.0, uy = 0.0;
    switch (actions[i]) {
      case kPlusX: ux = 1.0; break;
      case kMinusX: ux = -1.0; break;
      case kPlusY: uy = 1.0; break;
      case kMinusY: uy = -1.0; break;
      default: break;
    }
    const double accel = is_predator(i) ? config_.predator_accel : config_.prey_accel;
    b.vx = (1.0 - config_.damping) * b.vx + accel * ux * config_.dt;
    b.vy = (1.0 - config_.damping) * b.vy + accel * uy * config_.dt;
    const double speed = std::hypot(b.vx, b.vy);
    const double cap = max_speed(i);
    if (speed > cap) {
      b.vx *= cap / speed;
      b.vy *= cap / speed;
    }
    b.px = std::clamp(b.px + b.vx * config_.dt, -1.0, 1.0);
    b.py = std::clamp(b.py + b.vy * config_.dt, -1.0, 1.0);
  }

  std::vector<double> rewards(n, 0.0);
  int collisions = 0;
  std::vector<int> prey_hits(n, 0);
  for (int p = 0; p < config_.n_predators; ++p)
    for (int q = config_.n_predators; q < n; ++q)
      if (collides(p, q)) {
        ++collisions;
        ++prey_hits[q];
      }

  for (int i = 0; i < n; ++i) {
    if (is_predator(i)) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int q = config_.n_predators; q < n; ++q) nearest = std::min(nearest, distance(bodies_[i], bodies_[q]));
      rewards[i] = -config_.distance_coef * nearest + config_.capture_reward * collisions;
    } else {
      double nearest = std::numeric_limits<double>::infinity();
      for (int p = 0; p < config_.n_predators; ++p) nearest = std::min(nearest, distance(bodies_[i], bodies_[p]));
      const double wall = wall_penalty(bodies_[i].px, config_.boundary_start) +
                          wall_penalty(bodies_[i].py, config_.boundary_start);
      rewards[i] = config_.distance_coef * nearest - config_.capture_reward * prey_hits[i] -
                   config_.boundary_coef * wall;
    }
  }
  captures_ += collisions;
  ++frame_;
  return observe(std::move(rewards), collisions);
}

EnvStep ParticleTag::observe(std::vector<double> rewards, int collisions_this_frame) const {
  const int n = n_agents();
  EnvStep out;
  out.observations.resize(n);
  for (int i = 0; i < n; ++i) {
    Vector o(obs_dim());
    const Body& self = bodies_[i];
    int k = 0;
    o[k++] = self.vx;
    o[k++] = self.vy;
    o[k++] = self.px;
    o[k++] = self.py;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      o[k++] = bodies_[j].px - self.px;
      o[k++] = bodies_[j].py - self.py;
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      o[k++] = bodies_[j].vx;
      o[k++] = bodies_[j].vy;
    }
    out.observations[i] = std::move(o);
  }
  out.global_state.resize(state_dim());
  int k = 0;
  for (const auto& o : out.observations) {
    out.global_state.segment(k, o.size()) = o;
    k += static_cast<int>(o.size());
  }
  for (int q = config_.n_predators; q < n; ++q) {
    out.global_state[k++] = bodies_[q].px;
    out.global_state[k++] = bodies_[q].py;
  }
  out.rewards = std::move(rewards);
  out.done = frame_ >= config_.max_frames;
  out.info["captures"] = captures_;
  out.info["collisions_this_frame"] = collisions_this_frame;
  return out;
}

}  // namespace etd::envs
