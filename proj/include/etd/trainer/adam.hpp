#pragma once

#include <vector>

#include "etd/neural/types.hpp"

namespace etd::train {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected step on a single tensor; `step` is the 1-based count
// after this update.
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   param <- param - lr * (m / (1 - b1^step)) / (sqrt(v / (1 - b2^step)) + eps)
void adam_step(nn::Matrix& param, const nn::Matrix& grad, nn::Matrix& m, nn::Matrix& v, long step,
               const AdamConfig& config);

// Moment buffers for an ordered parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<const nn::Matrix*>& params, AdamConfig config);

  void step(const std::vector<nn::Matrix*>& params, const std::vector<const nn::Matrix*>& grads);

  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  // Exposed for checkpointing.
  std::vector<nn::Matrix>& first_moments() { return m_; }
  std::vector<nn::Matrix>& second_moments() { return v_; }
  const std::vector<nn::Matrix>& first_moments() const { return m_; }
  const std::vector<nn::Matrix>& second_moments() const { return v_; }
  void set_steps(long steps) { steps_ = steps; }

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::vector<nn::Matrix> m_;
  std::vector<nn::Matrix> v_;
};

// Scales every gradient so the global L2 norm is at most max_norm; returns
// the norm before scaling. max_norm <= 0 leaves gradients untouched.
double clip_grad_norm(const std::vector<nn::Matrix*>& grads, double max_norm);

}  // namespace etd::train
