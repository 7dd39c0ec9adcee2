#pragma once

#include <map>
#include <span>

#include "etd/rollout.hpp"

namespace etd::metrics {

struct DriftStats {
  long count = 0;
  double mean = 0.0;
  double max = 0.0;
};

// Empirical proxy for value error accumulated while asleep: for every gate
// window opened at frame t with realized length N, the distance
// ||s_{t+N} - s_t||_2 between global states at the window boundaries,
// grouped by N.
std::map<int, DriftStats> sleep_drift_diagnostic(std::span<const rollout::EpisodeBuffer> episodes);

}  // namespace etd::metrics
