#include "etd/metrics/drift.hpp"

#include <algorithm>

namespace etd::metrics {

std::map<int, DriftStats> sleep_drift_diagnostic(std::span<const rollout::EpisodeBuffer> episodes) {
  std::map<int, DriftStats> out;
  for (const auto& buf : episodes) {
    for (int i = 0; i < buf.n_agents; ++i) {
      const auto& frames = buf.frames[i];
      for (int t = 0; t < buf.length; ++t) {
        if (!frames[t].awake) continue;
        int end = t + 1;
        while (end < buf.length && !frames[end].awake) ++end;
        const double d = (buf.states.col(end) - buf.states.col(t)).norm();
        DriftStats& s = out[end - t];
        ++s.count;
        s.mean += (d - s.mean) / static_cast<double>(s.count);
        s.max = std::max(s.max, d);
      }
    }
  }
  return out;
}

}  // namespace etd::metrics
