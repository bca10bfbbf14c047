#include "pointreg/attention.hpp"

#include <cmath>

#include "pointreg/error.hpp"

namespace pointreg {

namespace {

int head_width(const Tape& t, Var f, const AttentionSettings& s) {
  const int d = static_cast<int>(t.value(f).cols());
  if (s.heads < 1 || d % s.heads != 0) {
    throw ConfigError("attention: head count must divide the feature width");
  }
  return d / s.heads;
}

double score_scale(int d, int dh, const AttentionSettings& s) {
  return 1.0 / std::sqrt(static_cast<double>(s.scale_full_dim ? d : dh));
}

}  // namespace

Var self_attention(Tape& t, Var f, Var e_pairs, const BoundSelfAttention& p,
                   const AttentionSettings& s) {
  const int dh = head_width(t, f, s);
  const int d = static_cast<int>(t.value(f).cols());
  const double scale_factor = score_scale(d, dh, s);

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(s.heads));
  for (int h = 0; h < s.heads; ++h) {
    const int c0 = h * dh;
    Var fh = slice_cols(t, f, c0, dh);
    Var q = matmul(t, fh, p.wq[static_cast<std::size_t>(h)]);
    Var k = matmul(t, fh, p.wk[static_cast<std::size_t>(h)]);
    Var v = matmul(t, fh, p.wv[static_cast<std::size_t>(h)]);
    Var scores = matmul_nt(t, q, k);
    if (e_pairs.valid()) {
      // q_i . (e_ij * wr) == (q * wr^T)_i . e_ij over the head slice of e.
      Var qr = matmul_nt(t, q, p.wr[static_cast<std::size_t>(h)]);
      scores = add(t, scores, pair_bias(t, qr, e_pairs, c0));
    }
    Var alpha = row_softmax(t, scale(t, scores, scale_factor));
    heads.push_back(matmul(t, alpha, v));
  }
  Var att = matmul(t, concat_cols(t, heads), p.wo);
  return add(t, f, mlp_forward(t, p.mlp, concat_cols(t, f, att), s.leaky_slope,
                               /*activate_output=*/false));
}

Var cross_attention(Tape& t, Var f_query, Var f_kv, const BoundCrossAttention& p,
                    const AttentionSettings& s) {
  const int dh = head_width(t, f_query, s);
  const int d = static_cast<int>(t.value(f_query).cols());
  if (t.value(f_kv).cols() != d) throw ConfigError("cross_attention: width mismatch");
  const double scale_factor = score_scale(d, dh, s);

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(s.heads));
  for (int h = 0; h < s.heads; ++h) {
    const int c0 = h * dh;
    Var q = matmul(t, slice_cols(t, f_query, c0, dh), p.wq[static_cast<std::size_t>(h)]);
    Var k = matmul(t, slice_cols(t, f_kv, c0, dh), p.wk[static_cast<std::size_t>(h)]);
    Var v = matmul(t, slice_cols(t, f_kv, c0, dh), p.wv[static_cast<std::size_t>(h)]);
    Var alpha = row_softmax(t, scale(t, matmul_nt(t, q, k), scale_factor));
    heads.push_back(matmul(t, alpha, v));
  }
  Var att = matmul(t, concat_cols(t, heads), p.wo);
  return add(t, f_query, mlp_forward(t, p.mlp, concat_cols(t, f_query, att),
                                     s.leaky_slope, /*activate_output=*/false));
}

std::pair<Var, Var> transformer_forward(Tape& t, Var fx, Var fy, Var ex, Var ey,
                                        const std::vector<BoundSelfAttention>& self_layers,
                                        const std::vector<BoundCrossAttention>& cross_layers,
                                        const AttentionSettings& s) {
  if (self_layers.size() != cross_layers.size()) {
    throw ConfigError("transformer_forward: layer count mismatch");
  }
  for (std::size_t l = 0; l < self_layers.size(); ++l) {
    Var sx = self_attention(t, fx, ex, self_layers[l], s);
    Var sy = self_attention(t, fy, ey, self_layers[l], s);
    Var cx = cross_attention(t, sx, sy, cross_layers[l], s);
    Var cy = cross_attention(t, sy, sx, cross_layers[l], s);
    fx = cx;
    fy = cy;
  }
  return {fx, fy};
}

}  // namespace pointreg
