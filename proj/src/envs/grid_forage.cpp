#include "etd/envs/grid_forage.hpp"

#include <algorithm>
#include <cmath>

#include "etd/errors.hpp"

namespace etd::envs {

namespace {

GridForage::Cell offset(GridForage::Cell c, int action) {
  switch (action) {
    case GridForage::kNorth: return {c.row - 1, c.col};
    case GridForage::kSouth: return {c.row + 1, c.col};
    case GridForage::kWest: return {c.row, c.col - 1};
    case GridForage::kEast: return {c.row, c.col + 1};
    default: return c;
  }
}

bool adjacent(GridForage::Cell a, GridForage::Cell b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1;
}

}  // namespace

GridForage::GridForage(GridForageConfig config) : config_(config) { config_.validate(); }

bool GridForage::occupied_by_food(Cell c) const {
  return std::any_of(foods_.begin(), foods_.end(),
                     [&](const Food& f) { return !f.collected && f.cell == c; });
}

int GridForage::food_remaining() const {
  return static_cast<int>(std::count_if(foods_.begin(), foods_.end(), [](const Food& f) { return !f.collected; }));
}

EnvStep GridForage::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int g = config_.grid;
  std::uniform_int_distribution<int> agent_level(1, config_.max_agent_level);
  std::vector<int> levels(config_.n_agents);
  for (auto& l : levels) l = agent_level(rng);
  int level_sum = 0;
  for (int l : levels) level_sum += l;
  const int food_cap = config_.max_food_level > 0 ? config_.max_food_level : level_sum;
  std::uniform_int_distribution<int> food_level(1, std::min(food_cap, level_sum));

  // Foods on interior cells, never 4-adjacent to another food.
  std::vector<Food> foods;
  std::uniform_int_distribution<int> interior(1, g - 2);
  while (static_cast<int>(foods.size()) < config_.n_foods) {
    Cell c{interior(rng), interior(rng)};
    const bool clash = std::any_of(foods.begin(), foods.end(), [&](const Food& f) {
      return f.cell == c || adjacent(f.cell, c);
    });
    if (clash) continue;
    foods.push_back({c, food_level(rng), false});
  }

  std::vector<Cell> agents;
  std::uniform_int_distribution<int> any(0, g - 1);
  while (static_cast<int>(agents.size()) < config_.n_agents) {
    Cell c{any(rng), any(rng)};
    const bool taken = std::find(agents.begin(), agents.end(), c) != agents.end() ||
                       std::any_of(foods.begin(), foods.end(), [&](const Food& f) { return f.cell == c; });
    if (!taken) agents.push_back(c);
  }
  return set_state(std::move(agents), std::move(levels), std::move(foods));
}

EnvStep GridForage::set_state(std::vector<Cell> agents, std::vector<int> agent_levels,
                              std::vector<Food> foods) {
  if (static_cast<int>(agents.size()) != config_.n_agents ||
      static_cast<int>(agent_levels.size()) != config_.n_agents ||
      static_cast<int>(foods.size()) != config_.n_foods)
    throw InputError("grid_forage: entity counts do not match the configuration");
  agents_ = std::move(agents);
  levels_ = std::move(agent_levels);
  foods_ = std::move(foods);
  frame_ = 0;
  total_food_level_ = 0.0;
  for (const auto& f : foods_) total_food_level_ += f.level;
  return observe(std::vector<double>(config_.n_agents, 0.0));
}

EnvStep GridForage::step(std::span<const int> actions) {
  const int n = config_.n_agents;
  if (static_cast<int>(actions.size()) != n)
    throw InputError("grid_forage: expected " + std::to_string(n) + " actions, got " +
                     std::to_string(actions.size()));
  for (int a : actions)
    if (a < 0 || a >= kNumActions) throw InputError("grid_forage: invalid action id " + std::to_string(a));
  if (frame_ >= config_.max_frames || food_remaining() == 0)
    throw UsageError("grid_forage: step called on a finished episode");

  // Movement.
  const int g = config_.grid;
  std::vector<Cell> target(agents_);
  for (int i = 0; i < n; ++i) {
    Cell t = offset(agents_[i], actions[i]);
    const bool off_grid = t.row < 0 || t.row >= g || t.col < 0 || t.col >= g;
    if (t == agents_[i] || off_grid || occupied_by_food(t)) continue;
    const bool agent_there = std::find(agents_.begin(), agents_.end(), t) != agents_.end();
    if (!agent_there) target[i] = t;
  }
  std::vector<Cell> next(agents_);
  for (int i = 0; i < n; ++i) {
    if (target[i] == agents_[i]) continue;
    int contenders = 0;
    for (int j = 0; j < n; ++j)
      if (target[j] == target[i] && !(target[j] == agents_[j])) ++contenders;
    if (contenders == 1) next[i] = target[i];
  }
  agents_ = next;

  // Loading.
  std::vector<double> rewards(n, 0.0);
  for (auto& food : foods_) {
    if (food.collected) continue;
    int loader_levels = 0;
    for (int i = 0; i < n; ++i)
      if (actions[i] == kLoad && adjacent(agents_[i], food.cell)) loader_levels += levels_[i];
    if (loader_levels == 0 || loader_levels < food.level) continue;
    food.collected = true;
    for (int i = 0; i < n; ++i) {
      if (actions[i] == kLoad && adjacent(agents_[i], food.cell))
        rewards[i] += static_cast<double>(levels_[i]) * food.level /
                      (static_cast<double>(loader_levels) * total_food_level_);
    }
  }
  ++frame_;
  return observe(std::move(rewards));
}

EnvStep GridForage::observe(std::vector<double> rewards) const {
  const int n = config_.n_agents;
  const double coord_scale = 1.0 / (config_.grid - 1);
  const double agent_scale = 1.0 / config_.max_agent_level;
  const double food_scale = 1.0 / (config_.n_agents * config_.max_agent_level);

  EnvStep out;
  out.observations.resize(n);
  for (int i = 0; i < n; ++i) {
    Vector o(obs_dim());
    int k = 0;
    auto put_agent = [&](int j) {
      o[k++] = agents_[j].row * coord_scale;
      o[k++] = agents_[j].col * coord_scale;
      o[k++] = levels_[j] * agent_scale;
    };
    put_agent(i);
    for (int j = 0; j < n; ++j)
      if (j != i) put_agent(j);
    for (const auto& f : foods_) {
      o[k++] = f.collected ? -1.0 : f.cell.row * coord_scale;
      o[k++] = f.collected ? -1.0 : f.cell.col * coord_scale;
      o[k++] = f.collected ? 0.0 : f.level * food_scale;
    }
    out.observations[i] = std::move(o);
  }
  out.global_state.resize(state_dim());
  int k = 0;
  for (const auto& o : out.observations) {
    out.global_state.segment(k, o.size()) = o;
    k += static_cast<int>(o.size());
  }
  for (const auto& f : foods_) {
    out.global_state[k++] = f.collected ? -1.0 : f.cell.row * coord_scale;
    out.global_state[k++] = f.collected ? -1.0 : f.cell.col * coord_scale;
  }
  out.rewards = std::move(rewards);
  const int remaining = food_remaining();
  out.done = remaining == 0 || frame_ >= config_.max_frames;
  out.info["win"] = remaining == 0 ? 1.0 : 0.0;
  out.info["food_remaining"] = remaining;
  out.info["food_collected"] = config_.n_foods - remaining;
  return out;
}

std::string GridForage::render() const {
  const int g = config_.grid;
  std::string grid(static_cast<std::size_t>(g * (g + 1)), '.');
  for (int r = 0; r < g; ++r) grid[static_cast<std::size_t>(r * (g + 1) + g)] = '\n';
  auto at = [&](Cell c) -> char& { return grid[static_cast<std::size_t>(c.row * (g + 1) + c.col)]; };
  for (const auto& f : foods_)
    if (!f.collected) at(f.cell) = static_cast<char>('a' + std::min(f.level - 1, 25));
  for (std::size_t i = 0; i < agents_.size(); ++i) at(agents_[i]) = static_cast<char>('0' + levels_[i]);
  return grid;
}

}  // namespace etd::envs
