#pragma once

#include <utility>
#include <vector>

#include "pointreg/layers.hpp"
#include "pointreg/tape.hpp"

namespace pointreg {

/// Self-attention layer parameters: per-head projections applied to the
/// head slice of the features (and of the pair embeddings for wr), plus the
/// head-fusion matrix and the residual message MLP.
struct BoundSelfAttention {
  std::vector<Var> wq, wk, wv, wr;  // one d_h x d_h matrix per head
  Var wo;                           // d x d
  BoundMlp mlp;                     // 2d -> 2d -> d residual update
};

struct BoundCrossAttention {
  std::vector<Var> wq, wk, wv;
  Var wo;
  BoundMlp mlp;
};

struct AttentionSettings {
  int heads = 4;
  double leaky_slope = 0.2;
  /// Scale scores by 1/sqrt(d) instead of the per-head 1/sqrt(d_h).
  bool scale_full_dim = false;
};

/// Multi-head self-attention with an additive key bias from the pairwise
/// normal-angle embeddings: score(i,j) ~ q_i . (k_j + e_ij * wr). Pass an
/// invalid e_pairs to drop the bias term entirely. The result is the
/// residual update f + mlp([f, attention]).
Var self_attention(Tape& t, Var f, Var e_pairs, const BoundSelfAttention& p,
                   const AttentionSettings& s);

/// Queries from f_query, keys and values from f_kv; no bias term.
Var cross_attention(Tape& t, Var f_query, Var f_kv, const BoundCrossAttention& p,
                    const AttentionSettings& s);

/// L blocks of (self on X, self on Y, cross X<-Y, cross Y<-X). Both cross
/// updates read the pre-update features, so swapping the argument order
/// swaps the outputs exactly.
std::pair<Var, Var> transformer_forward(Tape& t, Var fx, Var fy, Var ex, Var ey,
                                        const std::vector<BoundSelfAttention>& self_layers,
                                        const std::vector<BoundCrossAttention>& cross_layers,
                                        const AttentionSettings& s);

}  // namespace pointreg
