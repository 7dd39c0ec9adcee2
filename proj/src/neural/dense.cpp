#include "etd/neural/dense.hpp"

#include <string>

#include "etd/errors.hpp"

namespace etd::nn {

namespace {

void check_input(const Dense& layer, Index rows) {
  if (rows != layer.in_dim()) {
    throw ShapeError("dense: input has " + std::to_string(rows) + " rows, layer expects " +
                     std::to_string(layer.in_dim()));
  }
}

}  // namespace

Matrix dense_forward_batch(const Dense& layer, const Matrix& x, FlopMeter* meter) {
  check_input(layer, x.rows());
  Matrix y = layer.weight * x;
  y.colwise() += layer.bias.col(0);
  if (layer.activation == Activation::kTanh) y = tanh_fast(y.array()).matrix();
  charge(meter, dense_flops(layer.in_dim(), layer.out_dim()) * static_cast<std::uint64_t>(x.cols()));
  return y;
}

Vector dense_forward(const Dense& layer, const Vector& x, FlopMeter* meter) {
  return dense_forward_batch(layer, x, meter).col(0);
}

Matrix dense_backward(const Dense& layer, const Matrix& x, const Matrix& y, const Matrix& dy,
                      Dense& grad) {
  check_input(layer, x.rows());
  if (dy.rows() != layer.out_dim() || dy.cols() != x.cols())
    throw ShapeError("dense_backward: upstream gradient shape mismatch");
  Matrix da = dy;
  if (layer.activation == Activation::kTanh) da.array() *= 1.0 - y.array().square();
  grad.weight.noalias() += da * x.transpose();
  grad.bias.col(0) += da.rowwise().sum();
  return layer.weight.transpose() * da;
}

}  // namespace etd::nn
