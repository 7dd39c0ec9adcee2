#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace etd::nn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense cost counts a multiply-accumulate as two FLOPs; biases and
// elementwise nonlinearities are ignored.
constexpr std::uint64_t dense_flops(std::uint64_t in, std::uint64_t out) {
  return 2 * in * out;
}

// Three gate blocks, each an input and a recurrent matrix-vector product.
constexpr std::uint64_t gru_flops(std::uint64_t in, std::uint64_t hidden) {
  return 6 * hidden * (in + hidden);
}

// tanh through the vectorized exponential; Eigen evaluates double tanh one
// scalar at a time. Absolute error stays within a few ulps of 1.
template <typename Derived>
auto tanh_fast(const Eigen::ArrayBase<Derived>& a) {
  return 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

// Accumulates the FLOPs of the network arithmetic that actually executes.
struct FlopMeter {
  std::uint64_t flops = 0;
  void add(std::uint64_t n) { flops += n; }
};

inline void charge(FlopMeter* meter, std::uint64_t n) {
  if (meter != nullptr) meter->add(n);
}

}  // namespace etd::nn
