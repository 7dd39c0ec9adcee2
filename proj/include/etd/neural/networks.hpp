#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "etd/neural/dense.hpp"
#include "etd/neural/gru.hpp"

namespace etd::nn {

// Layer widths. Defaults:
// 3-layer MLP (64) -> GRU (128).
struct NetShape {
  Index mlp_width = 64;
  Index mlp_layers = 3;
  Index gru_hidden = 128;
};

// MLP (tanh) feeding a recurrent cell.
struct RecurrentTrunk {
  std::vector<Dense> mlp;
  GruCell gru;
};

struct PolicyOutput {
  Vector probs;
  double entropy = 0.0;
};

struct ActorNet {
  RecurrentTrunk trunk;
  Dense policy_head;  // H -> |A| logits

  Index obs_dim() const { return trunk.mlp.front().in_dim(); }
  Index n_actions() const { return policy_head.out_dim(); }
  Index hidden_dim() const { return trunk.gru.hidden_dim(); }

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::pair<std::string, const Matrix*>> named_parameters() const;
};

// Twin critic: one or two recurrent trunks and two independently initialized
// value heads. With one trunk both heads read the same hidden state; with two,
// head j reads trunk j. The critic hidden vector stacks the trunk states.
struct CriticNet {
  std::vector<RecurrentTrunk> trunks;
  Dense head_1;
  Dense head_2;

  Index input_dim() const { return trunks.front().mlp.front().in_dim(); }
  Index trunk_hidden() const { return trunks.front().gru.hidden_dim(); }
  Index hidden_dim() const { return trunk_hidden() * static_cast<Index>(trunks.size()); }

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::pair<std::string, const Matrix*>> named_parameters() const;
};

// Orthogonally initialized networks: sqrt(2) on MLP layers, 1.0 on the
// recurrent cell, 0.01 on the policy head, 1.0 on each value head.
ActorNet make_actor(Index obs_dim, Index n_actions, const NetShape& shape, std::mt19937_64& rng);
CriticNet make_critic(Index input_dim, const NetShape& shape, int n_trunks, std::mt19937_64& rng);

// Same shapes, every parameter zero. Used for gradient and moment storage.
ActorNet zeros_like(const ActorNet& net);
CriticNet zeros_like(const CriticNet& net);

Index parameter_count(const std::vector<const Matrix*>& params);
void set_zero(const std::vector<Matrix*>& params);

// Numerically stable softmax and entropy per column.
Matrix softmax_columns(const Matrix& logits);
double entropy_of(const Vector& probs);

// ---- single-sample inference ----

std::pair<PolicyOutput, GruState> actor_forward(const ActorNet& actor, const Vector& obs,
                                                const GruState& h, FlopMeter* meter = nullptr);

struct CriticOutput {
  double v1 = 0.0;
  double v2 = 0.0;
  GruState hidden;
};
CriticOutput critic_forward(const CriticNet& critic, const Vector& state, const GruState& h,
                            FlopMeter* meter = nullptr);

// ---- batched inference over independent lanes (one per column) ----

struct PolicyBatch {
  Matrix probs;    // |A| x B
  Vector entropy;  // B
};
PolicyBatch actor_step(const ActorNet& actor, const Matrix& obs, Matrix& hidden,
                       FlopMeter* meter = nullptr);

struct ValueBatch {
  Vector v1;
  Vector v2;
};
ValueBatch critic_step(const CriticNet& critic, const Matrix& input, Matrix& hidden,
                       FlopMeter* meter = nullptr);

// ---- training path over masked sequences ----

struct TrunkTape {
  std::vector<Matrix> activations;  // input followed by each MLP output
  GruSequenceCache gru;
  Matrix hidden;  // H x R
};

struct ActorTape {
  bool recorded = false;
  SequenceLayout layout;
  TrunkTape trunk;
};

struct CriticTape {
  bool recorded = false;
  SequenceLayout layout;
  std::vector<TrunkTape> trunks;
};

// Returns |A| x R logits for the awake rows of `layout`; obs is obs_dim x R.
Matrix actor_forward_sequence(const ActorNet& actor, const Matrix& obs,
                              const SequenceLayout& layout, ActorTape& tape,
                              FlopMeter* meter = nullptr);

// Accumulates parameter gradients and returns dL/dobs. Throws UsageError if
// `tape` holds no recorded forward pass.
Matrix actor_backward_sequence(const ActorNet& actor, const ActorTape& tape,
                               const Matrix& d_logits, ActorNet& grad);

// Returns 2 x R values (row 0: head 1, row 1: head 2).
Matrix critic_forward_sequence(const CriticNet& critic, const Matrix& input,
                               const SequenceLayout& layout, CriticTape& tape,
                               FlopMeter* meter = nullptr);

Matrix critic_backward_sequence(const CriticNet& critic, const CriticTape& tape,
                                const Matrix& d_values, CriticNet& grad);

}  // namespace etd::nn
