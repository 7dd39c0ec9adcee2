#pragma once

#include <span>
#include <string>
#include <string_view>

namespace etd::gating {

enum class GateMode {
  kEtdDual,         // entropy and twin-critic divergence must both pass
  kEtdEntropyOnly,  // local entropy only (decentralized deployment)
  kFixedSkip,       // always sleep max_sleep frames
  kAlwaysAwake,     // synchronous baseline
};

std::string to_string(GateMode mode);
GateMode parse_gate_mode(std::string_view text);

enum class WakeReason {
  kBothGatesPassed,
  kEntropyGateFailed,
  kEpistemicGateFailed,
  kForcedAwake,
};

std::string to_string(WakeReason reason);

// delta_t is 1 (stay awake) or the sleep length; only kBothGatesPassed sleeps.
struct GateDecision {
  int delta_t = 1;
  WakeReason reason = WakeReason::kForcedAwake;

  bool sleeps() const { return delta_t > 1; }
};

struct GateThresholds {
  double tau_h_start = 0.5;
  double tau_h_end = 1.75;
  double tau_v_start = 0.1;
  double tau_v_end = 0.01;
  int total_updates = 1;

  void validate() const;
  double tau_h(int update_index) const;
  double tau_v(int update_index) const;
};

// Shannon entropy in nats, 0 log 0 = 0. Throws InputError unless probs is a
// distribution (non-negative, sums to 1 within 1e-6).
double policy_entropy(std::span<const double> probs);

double critic_divergence(double v1, double v2);

// Linear schedule start -> end over [0, total_updates].
double anneal(double start, double end, int update_index, int total_updates);

// Dual-gated trigger. Ties sleep (the comparisons are <=). kFixedSkip sleeps
// unconditionally. Gated modes require max_sleep >= 2.
GateDecision decide(double entropy, double divergence, double tau_h, double tau_v, int max_sleep,
                    GateMode mode);

GateDecision fixed_skip_decide(int frame_index, int n);

}  // namespace etd::gating
