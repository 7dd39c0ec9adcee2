#include "etd/smdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "etd/errors.hpp"

namespace etd::smdp {

namespace {

double mask_sum(std::span<const Mask> masks) {
  double n = 0.0;
  for (Mask m : masks) {
    if (m > 1) throw InputError("mask entries must be 0 or 1");
    n += m;
  }
  if (n == 0.0) throw DegenerateBatchError("masked loss over a batch with no awake entries");
  return n;
}

}  // namespace

void GaeParams::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("gamma must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must be in [0, 1]");
}

double discount_power(double gamma, int n) {
  if (n < 0) throw InputError("discount_power: negative exponent");
  double out = 1.0;
  for (int i = 0; i < n; ++i) out *= gamma;
  return out;
}

double effective_reward(std::span<const double> rewards, double gamma, bool mask) {
  if (rewards.empty()) throw InputError("effective_reward: empty reward window");
  if (!mask) return 0.0;
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

double smdp_td_error(double r_eff, double gamma, int gap, double value_next, double value_t,
                     bool done) {
  if (gap < 1) throw InputError("smdp_td_error: gap must be >= 1");
  const double bootstrap = done ? 0.0 : discount_power(gamma, gap) * value_next;
  return r_eff + bootstrap - value_t;
}

std::vector<double> smdp_gae(std::span<DecisionPoint> points, const GaeParams& params) {
  params.validate();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].gap < 1) throw StructuralError("decision point with gap < 1");
    if (i + 1 < points.size() && points[i + 1].frame != points[i].frame + points[i].gap)
      throw StructuralError("decision point at frame " + std::to_string(points[i].frame) + " with gap " +
                            std::to_string(points[i].gap) + " is followed by frame " +
                            std::to_string(points[i + 1].frame));
  }
  std::vector<double> advantages(points.size());
  const double trace = params.gamma * params.lambda;
  double next = 0.0;
  for (std::size_t k = points.size(); k-- > 0;) {
    DecisionPoint& p = points[k];
    const double delta = smdp_td_error(p.effective_reward, params.gamma, p.gap, p.value_next,
                                       p.value(), p.done);
    double a = delta;
    if (k + 1 < points.size() && !p.done) a += discount_power(trace, p.gap) * next;
    p.advantage = a;
    p.return_target = a + p.value();
    advantages[k] = a;
    next = a;
  }
  return advantages;
}

double clip_surrogate_slope(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

double masked_clip_loss(std::span<const double> ratios, std::span<const double> advantages,
                        std::span<const Mask> masks, double epsilon) {
  if (ratios.size() != advantages.size() || ratios.size() != masks.size())
    throw ShapeError("masked_clip_loss: sequences differ in length");
  if (!(epsilon > 0.0)) throw InputError("masked_clip_loss: epsilon must be > 0");
  const double n = mask_sum(masks);
  double total = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (masks[i] == 0) continue;
    const double clipped = std::clamp(ratios[i], 1.0 - epsilon, 1.0 + epsilon);
    total += std::min(ratios[i] * advantages[i], clipped * advantages[i]);
  }
  return total / n;
}

double masked_value_loss(std::span<const double> values, std::span<const double> targets,
                         std::span<const Mask> masks) {
  if (values.size() != targets.size() || values.size() != masks.size())
    throw ShapeError("masked_value_loss: sequences differ in length");
  const double n = mask_sum(masks);
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (masks[i] == 0) continue;
    const double e = values[i] - targets[i];
    total += e * e;
  }
  return total / n;
}

void normalize_masked(std::span<double> values, std::span<const Mask> masks) {
  if (values.size() != masks.size()) throw ShapeError("normalize_masked: length mismatch");
  double n = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (masks[i]) {
      n += 1.0;
      mean += values[i];
    }
  }
  if (n == 0.0) return;
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (masks[i]) var += (values[i] - mean) * (values[i] - mean);
  var /= n;
  const double scale = var > 0.0 ? 1.0 / (std::sqrt(var) + 1e-8) : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (masks[i]) values[i] = (values[i] - mean) * scale;
}

}  // namespace etd::smdp
