#include "etd/neural/init.hpp"

#include <Eigen/QR>

#include "etd/errors.hpp"

namespace etd::nn {

Matrix orthogonal_init(Index rows, Index cols, double gain, std::mt19937_64& rng) {
  if (rows < 1 || cols < 1) throw ShapeError("orthogonal_init: rows and cols must be >= 1");
  if (!(gain >= 0.0)) throw InputError("orthogonal_init: gain must be >= 0");

  // Factor the tall orientation so Q has orthonormal columns.
  const Index tall = std::max(rows, cols);
  const Index wide = std::min(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix gaussian(tall, wide);
  for (Index j = 0; j < wide; ++j)
    for (Index i = 0; i < tall; ++i) gaussian(i, j) = normal(rng);

  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix q = qr.householderQ() * Matrix::Identity(tall, wide);
  const Matrix r = qr.matrixQR().topLeftCorner(wide, wide);
  for (Index j = 0; j < wide; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  q *= gain;
  if (rows < cols) return q.transpose();
  return q;
}

}  // namespace etd::nn
