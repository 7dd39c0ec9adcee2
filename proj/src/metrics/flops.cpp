#include "etd/metrics/flops.hpp"

#include <numeric>

#include "etd/errors.hpp"

namespace etd::metrics {

namespace {

std::uint64_t trunk_flops(std::uint64_t in, const nn::NetShape& shape) {
  const auto w = static_cast<std::uint64_t>(shape.mlp_width);
  std::uint64_t total = nn::dense_flops(in, w);
  for (nn::Index l = 1; l < shape.mlp_layers; ++l) total += nn::dense_flops(w, w);
  return total + nn::gru_flops(w, static_cast<std::uint64_t>(shape.gru_hidden));
}

}  // namespace

std::uint64_t actor_inference_flops(std::uint64_t obs_dim, std::uint64_t n_actions, const nn::NetShape& shape) {
  if (obs_dim == 0 || n_actions == 0) throw InputError("actor_inference_flops: dimensions must be positive");
  return trunk_flops(obs_dim, shape) + nn::dense_flops(static_cast<std::uint64_t>(shape.gru_hidden), n_actions);
}

std::uint64_t critic_inference_flops(std::uint64_t input_dim, const nn::NetShape& shape, int n_trunks) {
  if (input_dim == 0) throw InputError("critic_inference_flops: dimensions must be positive");
  if (n_trunks != 1 && n_trunks != 2) throw InputError("critic_inference_flops: n_trunks must be 1 or 2");
  const auto h = static_cast<std::uint64_t>(shape.gru_hidden);
  return static_cast<std::uint64_t>(n_trunks) * trunk_flops(input_dim, shape) + 2 * nn::dense_flops(h, 1);
}

double skip_rate(long frames_dormant, long frames_total) {
  if (frames_total < 1 || frames_dormant < 0 || frames_dormant > frames_total)
    throw InputError("skip_rate: need 0 <= dormant <= total and total >= 1");
  return static_cast<double>(frames_dormant) / static_cast<double>(frames_total);
}

double flop_reduction(std::span<const long> executed, std::span<const long> frames,
                      std::span<const std::uint64_t> cost_per_inference) {
  if (executed.size() != frames.size() || executed.size() != cost_per_inference.size())
    throw InputError("flop_reduction: per-agent lists differ in length");
  std::uint64_t full = 0;
  std::uint64_t skipped = 0;
  for (std::size_t i = 0; i < executed.size(); ++i) {
    if (executed[i] < 0 || executed[i] > frames[i]) throw InputError("flop_reduction: executed exceeds frames");
    full += cost_per_inference[i] * static_cast<std::uint64_t>(frames[i]);
    skipped += cost_per_inference[i] * static_cast<std::uint64_t>(frames[i] - executed[i]);
  }
  if (skipped == 0) return 0.0;
  // Dividing out the gcd keeps both operands exactly representable, so the
  // quotient is the correctly rounded ratio.
  const std::uint64_t g = std::gcd(full, skipped);
  return static_cast<double>(skipped / g) / static_cast<double>(full / g);
}

double flop_reduction(std::span<const double> skip_rates, std::span<const std::uint64_t> cost_per_inference) {
  if (skip_rates.size() != cost_per_inference.size()) throw InputError("flop_reduction: per-agent lists differ in length");
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < skip_rates.size(); ++i) {
    if (!(skip_rates[i] >= 0.0 && skip_rates[i] <= 1.0)) throw InputError("flop_reduction: rates must lie in [0, 1]");
    weighted += static_cast<double>(cost_per_inference[i]) * skip_rates[i];
    total += static_cast<double>(cost_per_inference[i]);
  }
  return total > 0.0 ? weighted / total : 0.0;
}

}  // namespace etd::metrics
