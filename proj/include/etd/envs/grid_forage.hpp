#pragma once

#include <array>
#include <random>

#include "etd/envs/environment.hpp"

namespace etd::envs {

// Level-based foraging on a square grid.
//
// Actions: 0 noop, 1 north (row - 1), 2 south, 3 west (col - 1), 4 east,
// 5 load. A move is cancelled if the target is off-grid, holds uncollected
// food, holds another agent (position at the start of the frame), or is
// targeted by more than one agent (all contenders stay). A food is collected
// when the agents in its 4-neighbourhood that chose `load` have a level sum
// >= the food level; each loader receives
//   level_i * food_level / (sum of loader levels * sum of all food levels).
//
// Observation (agent-centric): (row, col, level) for self, the other agents
// in index order, then each food. Coordinates are scaled to [0, 1]; agent
// levels by max_agent_level, food levels by n_agents * max_agent_level.
// Collected food reads (-1, -1, 0). Global state: every agent's observation
// followed by each food's absolute (row, col), (-1, -1) once collected.
class GridForage final : public Environment {
 public:
  enum Action { kNoop = 0, kNorth, kSouth, kWest, kEast, kLoad, kNumActions };

  struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
  };

  struct Food {
    Cell cell;
    int level = 1;
    bool collected = false;
  };

  explicit GridForage(GridForageConfig config);

  EnvStep reset(std::uint64_t seed) override;
  EnvStep step(std::span<const int> actions) override;

  std::string name() const override { return "grid_forage"; }
  int n_agents() const override { return config_.n_agents; }
  int obs_dim() const override { return 3 * (config_.n_agents + config_.n_foods); }
  int state_dim() const override { return config_.n_agents * obs_dim() + 2 * config_.n_foods; }
  int n_actions() const override { return kNumActions; }
  int max_frames() const override { return config_.max_frames; }

  // Places entities directly (tests and text scenarios); resets the frame count.
  EnvStep set_state(std::vector<Cell> agents, std::vector<int> agent_levels, std::vector<Food> foods);

  const std::vector<Cell>& agent_cells() const { return agents_; }
  const std::vector<int>& agent_levels() const { return levels_; }
  const std::vector<Food>& foods() const { return foods_; }
  int frame() const { return frame_; }

  // Text dump: agents as their level digit, foods as letters a.. by level.
  std::string render() const;

 private:
  EnvStep observe(std::vector<double> rewards) const;
  bool occupied_by_food(Cell c) const;
  int food_remaining() const;

  GridForageConfig config_;
  std::vector<Cell> agents_;
  std::vector<int> levels_;
  std::vector<Food> foods_;
  int frame_ = 0;
  double total_food_level_ = 1.0;
};

}  // namespace etd::envs
