#include "etd/neural/gru.hpp"

#include <string>

#include "etd/errors.hpp"

namespace etd::nn {

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

void check_shapes(const GruCell& cell, Index x_rows, Index h_rows) {
  if (x_rows != cell.in_dim())
    throw ShapeError("gru: input has " + std::to_string(x_rows) + " rows, cell expects " +
                     std::to_string(cell.in_dim()));
  if (h_rows != cell.hidden_dim())
    throw ShapeError("gru: hidden state has " + std::to_string(h_rows) + " rows, cell expects " +
                     std::to_string(cell.hidden_dim()));
}

struct StepResult {
  Matrix update;
  Matrix reset;
  Matrix candidate;
  Matrix hidden;
};

// `projected` is Wx + b for the lanes in `h_prev`.
StepResult step(const GruCell& cell, const Matrix& projected, const Matrix& h_prev) {
  const Index hd = cell.hidden_dim();
  StepResult s;
  const Matrix gates = cell.hidden_weight.topRows(2 * hd) * h_prev;
  s.update = sigmoid(projected.topRows(hd) + gates.topRows(hd));
  s.reset = sigmoid(projected.middleRows(hd, hd) + gates.bottomRows(hd));
  const Matrix reset_hidden = s.reset.cwiseProduct(h_prev);
  s.candidate = tanh_fast((projected.bottomRows(hd) + cell.hidden_weight.bottomRows(hd) * reset_hidden).array());
  s.hidden = s.candidate + s.update.cwiseProduct(h_prev - s.candidate);
  return s;
}

}  // namespace

void gru_step_batch(const GruCell& cell, const Matrix& x, Matrix& hidden, FlopMeter* meter) {
  check_shapes(cell, x.rows(), hidden.rows());
  if (x.cols() != hidden.cols()) throw ShapeError("gru: input and hidden lane counts differ");
  Matrix projected = cell.input_weight * x;
  projected.colwise() += cell.bias.col(0);
  hidden = step(cell, projected, hidden).hidden;
  charge(meter, gru_flops(cell.in_dim(), cell.hidden_dim()) * static_cast<std::uint64_t>(x.cols()));
}

GruState gru_cell_forward(const GruCell& cell, const Vector& x, const GruState& prev,
                          FlopMeter* meter) {
  Matrix h = prev.hidden;
  gru_step_batch(cell, x, h, meter);
  return {h.col(0)};
}

GruState masked_gru_update(const GruCell& cell, const Vector& x, const GruState& prev, bool awake,
                           FlopMeter* meter) {
  check_shapes(cell, x.rows(), prev.hidden.rows());
  if (!awake) return prev;
  return gru_cell_forward(cell, x, prev, meter);
}

SequenceLayout make_sequence_layout(const std::vector<std::vector<bool>>& masks) {
  SequenceLayout layout;
  layout.n_sequences = static_cast<Index>(masks.size());
  std::size_t steps = 0;
  for (const auto& m : masks) steps = std::max(steps, m.size());
  layout.step_offsets.assign(1, 0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t s = 0; s < masks.size(); ++s) {
      if (t < masks[s].size() && masks[s][t]) layout.row_sequence.push_back(static_cast<Index>(s));
    }
    layout.step_offsets.push_back(layout.rows());
  }
  return layout;
}

Matrix gru_sequence_forward(const GruCell& cell, const Matrix& x, const SequenceLayout& layout,
                            GruSequenceCache& cache, FlopMeter* meter) {
  const Index hd = cell.hidden_dim();
  const Index rows = layout.rows();
  if (x.rows() != cell.in_dim() || x.cols() != rows)
    throw ShapeError("gru_sequence_forward: input must be in_dim x rows");

  Matrix projected = cell.input_weight * x;
  projected.colwise() += cell.bias.col(0);

  Matrix state = Matrix::Zero(hd, layout.n_sequences);
  cache.h_prev.resize(hd, rows);
  cache.update.resize(hd, rows);
  cache.reset.resize(hd, rows);
  cache.candidate.resize(hd, rows);
  Matrix out(hd, rows);

  for (Index t = 0; t < layout.steps(); ++t) {
    const Index begin = layout.step_offsets[t];
    const Index count = layout.step_offsets[t + 1] - begin;
    if (count == 0) continue;
    Matrix h_prev(hd, count);
    for (Index k = 0; k < count; ++k) h_prev.col(k) = state.col(layout.row_sequence[begin + k]);
    StepResult s = step(cell, projected.middleCols(begin, count), h_prev);
    for (Index k = 0; k < count; ++k) state.col(layout.row_sequence[begin + k]) = s.hidden.col(k);
    cache.h_prev.middleCols(begin, count) = h_prev;
    cache.update.middleCols(begin, count) = s.update;
    cache.reset.middleCols(begin, count) = s.reset;
    cache.candidate.middleCols(begin, count) = s.candidate;
    out.middleCols(begin, count) = s.hidden;
  }
  charge(meter, gru_flops(cell.in_dim(), hd) * static_cast<std::uint64_t>(rows));
  return out;
}

Matrix gru_sequence_backward(const GruCell& cell, const Matrix& x, const SequenceLayout& layout,
                             const GruSequenceCache& cache, const Matrix& d_out, GruCell& grad) {
  const Index hd = cell.hidden_dim();
  const Index rows = layout.rows();
  if (d_out.rows() != hd || d_out.cols() != rows)
    throw ShapeError("gru_sequence_backward: upstream gradient must be H x rows");

  Matrix carried = Matrix::Zero(hd, layout.n_sequences);
  Matrix d_pre(3 * hd, rows);  // gradients w.r.t. gate pre-activations

  for (Index t = layout.steps() - 1; t >= 0; --t) {
    const Index begin = layout.step_offsets[t];
    const Index count = layout.step_offsets[t + 1] - begin;
    if (count == 0) continue;
    Matrix dh = d_out.middleCols(begin, count);
    for (Index k = 0; k < count; ++k) dh.col(k) += carried.col(layout.row_sequence[begin + k]);

    const auto z = cache.update.middleCols(begin, count).array();
    const auto r = cache.reset.middleCols(begin, count).array();
    const auto n = cache.candidate.middleCols(begin, count).array();
    const auto hp = cache.h_prev.middleCols(begin, count).array();

    Matrix da_n = (dh.array() * (1.0 - z) * (1.0 - n.square())).matrix();
    Matrix d_reset_hidden = cell.hidden_weight.bottomRows(hd).transpose() * da_n;
    Matrix da_z = (dh.array() * (hp - n) * z * (1.0 - z)).matrix();
    Matrix da_r = (d_reset_hidden.array() * hp * r * (1.0 - r)).matrix();

    Matrix dh_prev = (dh.array() * z + d_reset_hidden.array() * r).matrix();
    dh_prev.noalias() += cell.hidden_weight.topRows(hd).transpose() * da_z;
    dh_prev.noalias() += cell.hidden_weight.middleRows(hd, hd).transpose() * da_r;

    d_pre.block(0, begin, hd, count) = da_z;
    d_pre.block(hd, begin, hd, count) = da_r;
    d_pre.block(2 * hd, begin, hd, count) = da_n;
    for (Index k = 0; k < count; ++k) carried.col(layout.row_sequence[begin + k]) = dh_prev.col(k);
  }

  grad.input_weight.noalias() += d_pre * x.transpose();
  grad.hidden_weight.topRows(2 * hd).noalias() += d_pre.topRows(2 * hd) * cache.h_prev.transpose();
  const Matrix reset_hidden = cache.reset.cwiseProduct(cache.h_prev);
  grad.hidden_weight.bottomRows(hd).noalias() += d_pre.bottomRows(hd) * reset_hidden.transpose();
  grad.bias.col(0) += d_pre.rowwise().sum();
  return cell.input_weight.transpose() * d_pre;
}

}  // namespace etd::nn
