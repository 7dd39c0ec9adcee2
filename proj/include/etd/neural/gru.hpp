#pragma once

#include <vector>

#include "etd/neural/types.hpp"

namespace etd::nn {

// Gated recurrent cell. Gate rows are stacked [update; reset; candidate]:
//
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   n  = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * n + z * h
//
// The candidate reads the reset-gated previous state (the original
// formulation, not the variant that gates Un h after the product).
struct GruCell {
  Matrix input_weight;   // 3H x in
  Matrix hidden_weight;  // 3H x H
  Matrix bias;           // 3H x 1

  GruCell() = default;
  GruCell(Index in, Index hidden)
      : input_weight(Matrix::Zero(3 * hidden, in)),
        hidden_weight(Matrix::Zero(3 * hidden, hidden)),
        bias(Matrix::Zero(3 * hidden, 1)) {}

  Index in_dim() const { return input_weight.cols(); }
  Index hidden_dim() const { return hidden_weight.cols(); }
};

struct GruState {
  Vector hidden;

  static GruState zeros(Index n) { return {Vector::Zero(n)}; }
};

GruState gru_cell_forward(const GruCell& cell, const Vector& x, const GruState& prev,
                          FlopMeter* meter = nullptr);

// awake = false returns `prev` untouched and performs no cell arithmetic.
GruState masked_gru_update(const GruCell& cell, const Vector& x, const GruState& prev,
                           bool awake, FlopMeter* meter = nullptr);

// One step for a batch of independent lanes (columns); `hidden` is updated in
// place.
void gru_step_batch(const GruCell& cell, const Matrix& x, Matrix& hidden,
                    FlopMeter* meter = nullptr);

// Row layout of a batch of masked sequences. Only awake frames become rows.
// Rows are sorted by frame index, so the rows that execute at step t form the
// contiguous block [step_offsets[t], step_offsets[t + 1]). row_sequence maps a
// row to the sequence whose hidden state it advances. Hidden states of
// sequences without a row at step t carry over unchanged.
struct SequenceLayout {
  Index n_sequences = 0;
  std::vector<Index> step_offsets{0};
  std::vector<Index> row_sequence;

  Index rows() const { return static_cast<Index>(row_sequence.size()); }
  Index steps() const { return static_cast<Index>(step_offsets.size()) - 1; }
};

// Builds a layout from per-sequence awake masks (any lengths).
SequenceLayout make_sequence_layout(const std::vector<std::vector<bool>>& masks);

struct GruSequenceCache {
  Matrix h_prev;     // H x R
  Matrix update;     // H x R
  Matrix reset;      // H x R
  Matrix candidate;  // H x R
};

// Runs the cell over every row of `layout` starting from zero hidden states.
// Returns H x R outputs (the new hidden state produced at each row).
Matrix gru_sequence_forward(const GruCell& cell, const Matrix& x, const SequenceLayout& layout,
                            GruSequenceCache& cache, FlopMeter* meter = nullptr);

// Backpropagation through time over awake rows only. Dormant frames are
// identity connections for the carried hidden gradient. Accumulates parameter
// gradients into `grad` and returns dL/dx (in x R).
Matrix gru_sequence_backward(const GruCell& cell, const Matrix& x, const SequenceLayout& layout,
                             const GruSequenceCache& cache, const Matrix& d_out, GruCell& grad);

}  // namespace etd::nn
