#pragma once

#include <random>

#include "etd/neural/types.hpp"

namespace etd::nn {

// Orthogonal matrix scaled by `gain`: W^T W = gain^2 I when cols <= rows,
// W W^T = gain^2 I when rows <= cols. Drawn from the QR factorization of a
// Gaussian matrix with the sign of R's diagonal folded into Q, which makes
// the result Haar-distributed.
Matrix orthogonal_init(Index rows, Index cols, double gain, std::mt19937_64& rng);

}  // namespace etd::nn
