#pragma once

#include "etd/neural/types.hpp"

namespace etd::nn {

enum class Activation { kLinear, kTanh };

// Fully connected layer y = act(W x + b). Batched calls take one sample per
// column.
struct Dense {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1
  Activation activation = Activation::kTanh;

  Dense() = default;
  Dense(Index in, Index out, Activation act)
      : weight(Matrix::Zero(out, in)), bias(Matrix::Zero(out, 1)), activation(act) {}

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

Vector dense_forward(const Dense& layer, const Vector& x, FlopMeter* meter = nullptr);
Matrix dense_forward_batch(const Dense& layer, const Matrix& x, FlopMeter* meter = nullptr);

// Accumulates dL/dW, dL/db into `grad` and returns dL/dx. `y` is the forward
// output for `x`.
Matrix dense_backward(const Dense& layer, const Matrix& x, const Matrix& y,
                      const Matrix& dy, Dense& grad);

}  // namespace etd::nn
