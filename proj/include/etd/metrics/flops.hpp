#pragma once

#include <cstdint>
#include <span>

#include "etd/neural/networks.hpp"

namespace etd::metrics {

// Per-inference cost under the counting model of nn::dense_flops and
// nn::gru_flops. With the default shape:
//   2*obs*64 + 2*64*64 + 2*64*64 + 6*128*(64+128) + 2*128*|A|
std::uint64_t actor_inference_flops(std::uint64_t obs_dim, std::uint64_t n_actions,
                                    const nn::NetShape& shape = {});
// Trunk(s) plus both value heads.
std::uint64_t critic_inference_flops(std::uint64_t input_dim, const nn::NetShape& shape = {},
                                     int n_trunks = 1);

// frames_dormant / frames_total. Throws InputError unless
// 0 <= dormant <= total and total >= 1.
double skip_rate(long frames_dormant, long frames_total);

// 1 - executed / synchronous, where every agent pays cost[i] per decision.
// Computed from integer totals, so exact ratios come out exactly.
double flop_reduction(std::span<const long> executed, std::span<const long> frames,
                      std::span<const std::uint64_t> cost_per_inference);

// Rate form: cost-weighted mean of per-agent skip rates (equal frame counts).
double flop_reduction(std::span<const double> skip_rates, std::span<const std::uint64_t> cost_per_inference);

}  // namespace etd::metrics
