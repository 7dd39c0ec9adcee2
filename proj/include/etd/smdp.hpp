#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace etd::smdp {

using Mask = std::uint8_t;

struct GaeParams {
  double gamma = 0.99;
  double lambda = 0.95;

  void validate() const;
};

// One awake frame of one agent, with the sleep window it opened.
struct DecisionPoint {
  int frame = 0;
  int gap = 1;                    // N_t, realized window length
  double effective_reward = 0.0;  // discounted reward over the window
  double v1 = 0.0;
  double v2 = 0.0;
  double value_next = 0.0;        // twin-mean value at the next decision point
  bool done = false;              // window ends the episode
  double log_prob_old = 0.0;
  int action = 0;
  double advantage = 0.0;
  double return_target = 0.0;

  double value() const { return 0.5 * (v1 + v2); }
};

// gamma^n by repeated multiplication; gamma^1 is gamma bit-for-bit.
double discount_power(double gamma, int n);

// mask * sum_k gamma^k r[k]. Throws InputError on an empty window.
double effective_reward(std::span<const double> rewards, double gamma, bool mask);

// r_eff + gamma^gap * value_next * (1 - done) - value_t.
double smdp_td_error(double r_eff, double gamma, int gap, double value_next, double value_t,
                     bool done);

// Backward recursion A_t = delta_t + (gamma lambda)^gap * A_next * (1 - done)
// with A = delta at the last point; fills advantage and return_target
// (A + twin-mean value) on every point and returns the advantages. Throws
// StructuralError when frame[i+1] != frame[i] + gap[i].
std::vector<double> smdp_gae(std::span<DecisionPoint> points, const GaeParams& params);

// Masked clipped surrogate (to be maximized):
//   (1/sum m) sum m * min(ratio A, clip(ratio, 1-eps, 1+eps) A)
// Throws DegenerateBatchError when every mask is zero.
double masked_clip_loss(std::span<const double> ratios, std::span<const double> advantages,
                        std::span<const Mask> masks, double epsilon);

// d(per-sample surrogate)/d(ratio): A when the unclipped branch is the
// minimum, 0 when clipping binds.
double clip_surrogate_slope(double ratio, double advantage, double epsilon);

// (1/sum m) sum m * (v - target)^2.
double masked_value_loss(std::span<const double> values, std::span<const double> targets,
                         std::span<const Mask> masks);

// Zero-mean, unit-variance over entries with mask 1; masked entries are left
// untouched. A single awake entry (or zero variance) is only centered.
void normalize_masked(std::span<double> values, std::span<const Mask> masks);

}  // namespace etd::smdp
