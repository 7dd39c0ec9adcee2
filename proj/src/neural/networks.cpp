#include "etd/neural/networks.hpp"

#include <cmath>
#include <string>

#include "etd/errors.hpp"
#include "etd/neural/init.hpp"

namespace etd::nn {

namespace {

const double kSqrt2 = std::sqrt(2.0);

Dense make_dense(Index in, Index out, Activation act, double gain, std::mt19937_64& rng) {
  Dense layer(in, out, act);
  layer.weight = orthogonal_init(out, in, gain, rng);
  return layer;
}

RecurrentTrunk make_trunk(Index in, const NetShape& shape, std::mt19937_64& rng) {
  if (shape.mlp_layers < 1 || shape.mlp_width < 1 || shape.gru_hidden < 1)
    throw ShapeError("NetShape: widths and layer count must be >= 1");
  RecurrentTrunk trunk;
  Index width_in = in;
  for (Index l = 0; l < shape.mlp_layers; ++l) {
    trunk.mlp.push_back(make_dense(width_in, shape.mlp_width, Activation::kTanh, kSqrt2, rng));
    width_in = shape.mlp_width;
  }
  const Index hd = shape.gru_hidden;
  trunk.gru = GruCell(width_in, hd);
  // Each gate block gets its own orthogonal draw.
  for (Index g = 0; g < 3; ++g) {
    trunk.gru.input_weight.middleRows(g * hd, hd) = orthogonal_init(hd, width_in, 1.0, rng);
    trunk.gru.hidden_weight.middleRows(g * hd, hd) = orthogonal_init(hd, hd, 1.0, rng);
  }
  return trunk;
}

void append_trunk(RecurrentTrunk& trunk, std::vector<Matrix*>& out) {
  for (auto& layer : trunk.mlp) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&trunk.gru.input_weight);
  out.push_back(&trunk.gru.hidden_weight);
  out.push_back(&trunk.gru.bias);
}

void name_trunk(const std::string& prefix, const RecurrentTrunk& trunk,
                std::vector<std::pair<std::string, const Matrix*>>& out) {
  for (std::size_t l = 0; l < trunk.mlp.size(); ++l) {
    const std::string p = prefix + "mlp" + std::to_string(l) + ".";
    out.emplace_back(p + "weight", &trunk.mlp[l].weight);
    out.emplace_back(p + "bias", &trunk.mlp[l].bias);
  }
  out.emplace_back(prefix + "gru.input_weight", &trunk.gru.input_weight);
  out.emplace_back(prefix + "gru.hidden_weight", &trunk.gru.hidden_weight);
  out.emplace_back(prefix + "gru.bias", &trunk.gru.bias);
}

std::vector<const Matrix*> to_const(const std::vector<Matrix*>& params) {
  return {params.begin(), params.end()};
}

RecurrentTrunk zeros_like(const RecurrentTrunk& trunk) {
  RecurrentTrunk out;
  for (const auto& layer : trunk.mlp) out.mlp.emplace_back(layer.in_dim(), layer.out_dim(), layer.activation);
  out.gru = GruCell(trunk.gru.in_dim(), trunk.gru.hidden_dim());
  return out;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite entries");
}

Matrix mlp_forward(const RecurrentTrunk& trunk, const Matrix& x, FlopMeter* meter) {
  Matrix y = x;
  for (const auto& layer : trunk.mlp) y = dense_forward_batch(layer, y, meter);
  return y;
}

Matrix trunk_forward_sequence(const RecurrentTrunk& trunk, const Matrix& x,
                              const SequenceLayout& layout, TrunkTape& tape, FlopMeter* meter) {
  tape.activations.clear();
  tape.activations.push_back(x);
  for (const auto& layer : trunk.mlp)
    tape.activations.push_back(dense_forward_batch(layer, tape.activations.back(), meter));
  tape.hidden = gru_sequence_forward(trunk.gru, tape.activations.back(), layout, tape.gru, meter);
  return tape.hidden;
}

Matrix trunk_backward_sequence(const RecurrentTrunk& trunk, const SequenceLayout& layout,
                               const TrunkTape& tape, const Matrix& d_hidden, RecurrentTrunk& grad) {
  Matrix d = gru_sequence_backward(trunk.gru, tape.activations.back(), layout, tape.gru, d_hidden,
                                   grad.gru);
  for (std::size_t l = trunk.mlp.size(); l-- > 0;)
    d = dense_backward(trunk.mlp[l], tape.activations[l], tape.activations[l + 1], d, grad.mlp[l]);
  return d;
}

}  // namespace

std::vector<Matrix*> ActorNet::parameters() {
  std::vector<Matrix*> out;
  append_trunk(trunk, out);
  out.push_back(&policy_head.weight);
  out.push_back(&policy_head.bias);
  return out;
}

std::vector<const Matrix*> ActorNet::parameters() const {
  return to_const(const_cast<ActorNet*>(this)->parameters());
}

std::vector<std::pair<std::string, const Matrix*>> ActorNet::named_parameters() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  name_trunk("trunk.", trunk, out);
  out.emplace_back("policy_head.weight", &policy_head.weight);
  out.emplace_back("policy_head.bias", &policy_head.bias);
  return out;
}

std::vector<Matrix*> CriticNet::parameters() {
  std::vector<Matrix*> out;
  for (auto& t : trunks) append_trunk(t, out);
  out.push_back(&head_1.weight);
  out.push_back(&head_1.bias);
  out.push_back(&head_2.weight);
  out.push_back(&head_2.bias);
  return out;
}

std::vector<const Matrix*> CriticNet::parameters() const {
  return to_const(const_cast<CriticNet*>(this)->parameters());
}

std::vector<std::pair<std::string, const Matrix*>> CriticNet::named_parameters() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (std::size_t i = 0; i < trunks.size(); ++i)
    name_trunk("trunk" + std::to_string(i) + ".", trunks[i], out);
  out.emplace_back("head_1.weight", &head_1.weight);
  out.emplace_back("head_1.bias", &head_1.bias);
  out.emplace_back("head_2.weight", &head_2.weight);
  out.emplace_back("head_2.bias", &head_2.bias);
  return out;
}

ActorNet make_actor(Index obs_dim, Index n_actions, const NetShape& shape, std::mt19937_64& rng) {
  if (obs_dim < 1 || n_actions < 1) throw ShapeError("make_actor: dimensions must be >= 1");
  ActorNet net;
  net.trunk = make_trunk(obs_dim, shape, rng);
  net.policy_head = make_dense(shape.gru_hidden, n_actions, Activation::kLinear, 0.01, rng);
  return net;
}

CriticNet make_critic(Index input_dim, const NetShape& shape, int n_trunks, std::mt19937_64& rng) {
  if (input_dim < 1) throw ShapeError("make_critic: input dimension must be >= 1");
  if (n_trunks != 1 && n_trunks != 2) throw InputError("make_critic: n_trunks must be 1 or 2");
  CriticNet net;
  for (int i = 0; i < n_trunks; ++i) net.trunks.push_back(make_trunk(input_dim, shape, rng));
  net.head_1 = make_dense(shape.gru_hidden, 1, Activation::kLinear, 1.0, rng);
  net.head_2 = make_dense(shape.gru_hidden, 1, Activation::kLinear, 1.0, rng);
  return net;
}

ActorNet zeros_like(const ActorNet& net) {
  ActorNet out;
  out.trunk = zeros_like(net.trunk);
  out.policy_head = Dense(net.policy_head.in_dim(), net.policy_head.out_dim(), Activation::kLinear);
  return out;
}

CriticNet zeros_like(const CriticNet& net) {
  CriticNet out;
  for (const auto& t : net.trunks) out.trunks.push_back(zeros_like(t));
  out.head_1 = Dense(net.head_1.in_dim(), 1, Activation::kLinear);
  out.head_2 = Dense(net.head_2.in_dim(), 1, Activation::kLinear);
  return out;
}

Index parameter_count(const std::vector<const Matrix*>& params) {
  Index n = 0;
  for (const auto* p : params) n += p->size();
  return n;
}

void set_zero(const std::vector<Matrix*>& params) {
  for (auto* p : params) p->setZero();
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out = logits;
  for (Index j = 0; j < out.cols(); ++j) {
    auto col = out.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  return out;
}

double entropy_of(const Vector& probs) {
  double h = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  }
  return h;
}

PolicyBatch actor_step(const ActorNet& actor, const Matrix& obs, Matrix& hidden, FlopMeter* meter) {
  require_finite(obs, "actor observation");
  if (obs.rows() != actor.obs_dim())
    throw ShapeError("actor: observation has " + std::to_string(obs.rows()) + " rows, expected " +
                     std::to_string(actor.obs_dim()));
  const Matrix features = mlp_forward(actor.trunk, obs, meter);
  gru_step_batch(actor.trunk.gru, features, hidden, meter);
  PolicyBatch out;
  out.probs = softmax_columns(dense_forward_batch(actor.policy_head, hidden, meter));
  out.entropy.resize(out.probs.cols());
  for (Index j = 0; j < out.probs.cols(); ++j) out.entropy[j] = entropy_of(out.probs.col(j));
  return out;
}

ValueBatch critic_step(const CriticNet& critic, const Matrix& input, Matrix& hidden,
                       FlopMeter* meter) {
  require_finite(input, "critic input");
  if (input.rows() != critic.input_dim())
    throw ShapeError("critic: input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(critic.input_dim()));
  if (hidden.rows() != critic.hidden_dim() || hidden.cols() != input.cols())
    throw ShapeError("critic: hidden state shape mismatch");
  const Index hd = critic.trunk_hidden();
  for (std::size_t i = 0; i < critic.trunks.size(); ++i) {
    const Matrix features = mlp_forward(critic.trunks[i], input, meter);
    Matrix h = hidden.middleRows(static_cast<Index>(i) * hd, hd);
    gru_step_batch(critic.trunks[i].gru, features, h, meter);
    hidden.middleRows(static_cast<Index>(i) * hd, hd) = h;
  }
  const Index second = critic.trunks.size() > 1 ? hd : 0;
  ValueBatch out;
  out.v1 = dense_forward_batch(critic.head_1, hidden.topRows(hd), meter).row(0).transpose();
  out.v2 = dense_forward_batch(critic.head_2, hidden.middleRows(second, hd), meter).row(0).transpose();
  return out;
}

std::pair<PolicyOutput, GruState> actor_forward(const ActorNet& actor, const Vector& obs,
                                                const GruState& h, FlopMeter* meter) {
  Matrix hidden = h.hidden;
  PolicyBatch batch = actor_step(actor, obs, hidden, meter);
  return {PolicyOutput{batch.probs.col(0), batch.entropy[0]}, GruState{hidden.col(0)}};
}

CriticOutput critic_forward(const CriticNet& critic, const Vector& state, const GruState& h,
                            FlopMeter* meter) {
  Matrix hidden = h.hidden;
  ValueBatch batch = critic_step(critic, state, hidden, meter);
  return {batch.v1[0], batch.v2[0], GruState{hidden.col(0)}};
}

Matrix actor_forward_sequence(const ActorNet& actor, const Matrix& obs, const SequenceLayout& layout,
                              ActorTape& tape, FlopMeter* meter) {
  require_finite(obs, "actor observation");
  if (obs.rows() != actor.obs_dim() || obs.cols() != layout.rows())
    throw ShapeError("actor_forward_sequence: observations must be obs_dim x rows");
  tape.layout = layout;
  const Matrix& hidden = trunk_forward_sequence(actor.trunk, obs, layout, tape.trunk, meter);
  tape.recorded = true;
  return dense_forward_batch(actor.policy_head, hidden, meter);
}

Matrix actor_backward_sequence(const ActorNet& actor, const ActorTape& tape, const Matrix& d_logits,
                               ActorNet& grad) {
  if (!tape.recorded) throw UsageError("actor backward called without a recorded forward pass");
  const Matrix& hidden = tape.trunk.hidden;
  // The head is linear, so its backward pass never reads the output.
  Matrix d_hidden = dense_backward(actor.policy_head, hidden, Matrix(), d_logits, grad.policy_head);
  return trunk_backward_sequence(actor.trunk, tape.layout, tape.trunk, d_hidden, grad.trunk);
}

Matrix critic_forward_sequence(const CriticNet& critic, const Matrix& input,
                               const SequenceLayout& layout, CriticTape& tape, FlopMeter* meter) {
  require_finite(input, "critic input");
  if (input.rows() != critic.input_dim() || input.cols() != layout.rows())
    throw ShapeError("critic_forward_sequence: input must be input_dim x rows");
  tape.layout = layout;
  tape.trunks.assign(critic.trunks.size(), TrunkTape{});
  for (std::size_t i = 0; i < critic.trunks.size(); ++i)
    trunk_forward_sequence(critic.trunks[i], input, layout, tape.trunks[i], meter);
  tape.recorded = true;
  Matrix values(2, layout.rows());
  values.row(0) = dense_forward_batch(critic.head_1, tape.trunks.front().hidden, meter);
  values.row(1) = dense_forward_batch(critic.head_2, tape.trunks.back().hidden, meter);
  return values;
}

Matrix critic_backward_sequence(const CriticNet& critic, const CriticTape& tape,
                                const Matrix& d_values, CriticNet& grad) {
  if (!tape.recorded) throw UsageError("critic backward called without a recorded forward pass");
  if (d_values.rows() != 2 || d_values.cols() != tape.layout.rows())
    throw ShapeError("critic_backward_sequence: upstream gradient must be 2 x rows");
  Matrix d_h1 = dense_backward(critic.head_1, tape.trunks.front().hidden, Matrix(),
                               d_values.row(0), grad.head_1);
  Matrix d_h2 = dense_backward(critic.head_2, tape.trunks.back().hidden, Matrix(),
                               d_values.row(1), grad.head_2);
  Matrix d_input;
  if (critic.trunks.size() == 1) {
    d_input = trunk_backward_sequence(critic.trunks[0], tape.layout, tape.trunks[0], d_h1 + d_h2,
                                      grad.trunks[0]);
  } else {
    d_input = trunk_backward_sequence(critic.trunks[0], tape.layout, tape.trunks[0], d_h1,
                                      grad.trunks[0]);
    d_input += trunk_backward_sequence(critic.trunks[1], tape.layout, tape.trunks[1], d_h2,
                                       grad.trunks[1]);
  }
  return d_input;
}

}  // namespace etd::nn
