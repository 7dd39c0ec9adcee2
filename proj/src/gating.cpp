#include "etd/gating.hpp"

#include <cmath>

#include "etd/errors.hpp"

namespace etd::gating {

std::string to_string(GateMode mode) {
  switch (mode) {
    case GateMode::kEtdDual: return "etd_dual";
    case GateMode::kEtdEntropyOnly: return "etd_entropy_only";
    case GateMode::kFixedSkip: return "fixed_skip";
    case GateMode::kAlwaysAwake: return "always_awake";
  }
  return "unknown";
}

GateMode parse_gate_mode(std::string_view text) {
  if (text == "etd_dual") return GateMode::kEtdDual;
  if (text == "etd_entropy_only") return GateMode::kEtdEntropyOnly;
  if (text == "fixed_skip") return GateMode::kFixedSkip;
  if (text == "always_awake") return GateMode::kAlwaysAwake;
  throw InputError("unknown gate mode '" + std::string(text) +
                   "' (expected etd_dual, etd_entropy_only, fixed_skip, always_awake)");
}

std::string to_string(WakeReason reason) {
  switch (reason) {
    case WakeReason::kBothGatesPassed: return "both_gates_passed";
    case WakeReason::kEntropyGateFailed: return "entropy_gate_failed";
    case WakeReason::kEpistemicGateFailed: return "epistemic_gate_failed";
    case WakeReason::kForcedAwake: return "forced_awake";
  }
  return "unknown";
}

void GateThresholds::validate() const {
  if (tau_h_start < 0 || tau_h_end < 0 || tau_v_start < 0 || tau_v_end < 0)
    throw InputError("gate thresholds must be >= 0");
  if (total_updates < 1) throw InputError("gate thresholds: total_updates must be >= 1");
}

double GateThresholds::tau_h(int update_index) const {
  return anneal(tau_h_start, tau_h_end, update_index, total_updates);
}

double GateThresholds::tau_v(int update_index) const {
  return anneal(tau_v_start, tau_v_end, update_index, total_updates);
}

double policy_entropy(std::span<const double> probs) {
  if (probs.empty()) throw InputError("policy_entropy: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("policy_entropy: negative or non-finite probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InputError("policy_entropy: probabilities do not sum to 1");
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double critic_divergence(double v1, double v2) { return std::abs(v1 - v2); }

double anneal(double start, double end, int update_index, int total_updates) {
  if (total_updates < 1) throw InputError("anneal: total_updates must be >= 1");
  if (update_index < 0 || update_index > total_updates)
    throw InputError("anneal: update_index " + std::to_string(update_index) + " outside [0, " +
                     std::to_string(total_updates) + "]");
  if (update_index == total_updates) return end;
  return start + (end - start) * static_cast<double>(update_index) / static_cast<double>(total_updates);
}

GateDecision decide(double entropy, double divergence, double tau_h, double tau_v, int max_sleep,
                    GateMode mode) {
  if (mode == GateMode::kAlwaysAwake) return {1, WakeReason::kForcedAwake};
  if (max_sleep < 2) throw InputError("decide: max_sleep must be >= 2 for gated modes");
  switch (mode) {
    case GateMode::kFixedSkip:
      return {max_sleep, WakeReason::kBothGatesPassed};
    case GateMode::kEtdEntropyOnly:
      if (entropy <= tau_h) return {max_sleep, WakeReason::kBothGatesPassed};
      return {1, WakeReason::kEntropyGateFailed};
    case GateMode::kEtdDual:
      if (!(entropy <= tau_h)) return {1, WakeReason::kEntropyGateFailed};
      if (!(divergence <= tau_v)) return {1, WakeReason::kEpistemicGateFailed};
      return {max_sleep, WakeReason::kBothGatesPassed};
    case GateMode::kAlwaysAwake:
      break;
  }
  return {1, WakeReason::kForcedAwake};
}

GateDecision fixed_skip_decide(int frame_index, int n) {
  if (n < 2) throw InputError("fixed_skip_decide: N must be >= 2");
  if (frame_index < 0) throw InputError("fixed_skip_decide: negative frame index");
  return {n, WakeReason::kBothGatesPassed};
}

}  // namespace etd::gating
