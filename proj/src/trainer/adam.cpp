#include "etd/trainer/adam.hpp"

#include <cmath>

#include "etd/errors.hpp"

namespace etd::train {

void adam_step(nn::Matrix& param, const nn::Matrix& grad, nn::Matrix& m, nn::Matrix& v, long step,
               const AdamConfig& config) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() || m.rows() != param.rows() ||
      m.cols() != param.cols() || v.rows() != param.rows() || v.cols() != param.cols())
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  if (step < 1) throw InputError("adam_step: step must be >= 1");
  m = config.beta1 * m + (1.0 - config.beta1) * grad;
  v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  param.array() -= config.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
}

Adam::Adam(const std::vector<const nn::Matrix*>& params, AdamConfig config) : config_(config) {
  for (const auto* p : params) {
    m_.push_back(nn::Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(nn::Matrix::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<nn::Matrix*>& params, const std::vector<const nn::Matrix*>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ShapeError("Adam::step: parameter list does not match the optimizer state");
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) adam_step(*params[i], *grads[i], m_[i], v_[i], steps_, config_);
}

double clip_grad_norm(const std::vector<nn::Matrix*>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto* g : grads) *g *= scale;
  }
  return norm;
}

}  // namespace etd::train
