#include <doctest.h>

#include <numeric>

#include "pointreg/attention.hpp"
#include "pointreg/normals.hpp"
#include "test_utils.hpp"

using namespace pointreg;
using testutil::random_matrix;

TEST_SUITE_BEGIN("attention");

namespace {

struct SelfWeights {
  std::vector<Matrix> wq, wk, wv, wr;
  Matrix wo, m_w1, m_b1, m_w2, m_b2;

  static SelfWeights random(int d, int heads, Rng& rng, double scale = 0.5) {
    const int dh = d / heads;
    SelfWeights w;
    for (int h = 0; h < heads; ++h) {
      w.wq.push_back(random_matrix(dh, dh, rng, scale));
      w.wk.push_back(random_matrix(dh, dh, rng, scale));
      w.wv.push_back(random_matrix(dh, dh, rng, scale));
      w.wr.push_back(random_matrix(dh, dh, rng, scale));
    }
    w.wo = random_matrix(d, d, rng, scale);
    w.m_w1 = random_matrix(2 * d, 2 * d, rng, scale);
    w.m_b1 = random_matrix(1, 2 * d, rng, 0.1);
    w.m_w2 = random_matrix(2 * d, d, rng, scale);
    w.m_b2 = random_matrix(1, d, rng, 0.1);
    return w;
  }

  BoundSelfAttention bind(Tape& t, bool zero_wr = false) const {
    BoundSelfAttention b;
    for (std::size_t h = 0; h < wq.size(); ++h) {
      b.wq.push_back(t.leaf(wq[h], true));
      b.wk.push_back(t.leaf(wk[h], true));
      b.wv.push_back(t.leaf(wv[h], true));
      b.wr.push_back(t.leaf(zero_wr ? Matrix::Zero(wr[h].rows(), wr[h].cols()) : wr[h], true));
    }
    b.wo = t.leaf(wo, true);
    b.mlp = BoundMlp{t.leaf(m_w1, true), t.leaf(m_b1, true), t.leaf(m_w2, true),
                     t.leaf(m_b2, true)};
    return b;
  }
};

struct CrossWeights {
  std::vector<Matrix> wq, wk, wv;
  Matrix wo, m_w1, m_b1, m_w2, m_b2;

  static CrossWeights random(int d, int heads, Rng& rng, double scale = 0.5) {
    const int dh = d / heads;
    CrossWeights w;
    for (int h = 0; h < heads; ++h) {
      w.wq.push_back(random_matrix(dh, dh, rng, scale));
      w.wk.push_back(random_matrix(dh, dh, rng, scale));
      w.wv.push_back(random_matrix(dh, dh, rng, scale));
    }
    w.wo = random_matrix(d, d, rng, scale);
    w.m_w1 = random_matrix(2 * d, 2 * d, rng, scale);
    w.m_b1 = random_matrix(1, 2 * d, rng, 0.1);
    w.m_w2 = random_matrix(2 * d, d, rng, scale);
    w.m_b2 = random_matrix(1, d, rng, 0.1);
    return w;
  }

  BoundCrossAttention bind(Tape& t) const {
    BoundCrossAttention b;
    for (std::size_t h = 0; h < wq.size(); ++h) {
      b.wq.push_back(t.leaf(wq[h], true));
      b.wk.push_back(t.leaf(wk[h], true));
      b.wv.push_back(t.leaf(wv[h], true));
    }
    b.wo = t.leaf(wo, true);
    b.mlp = BoundMlp{t.leaf(m_w1, true), t.leaf(m_b1, true), t.leaf(m_w2, true),
                     t.leaf(m_b2, true)};
    return b;
  }
};

// Plain Eigen re-implementation of the bias-free block stack, written
// independently of the tape ops.
Matrix ref_mlp(const Matrix& x, const Matrix& w1, const Matrix& b1, const Matrix& w2,
               const Matrix& b2, double slope) {
  Matrix h = x * w1;
  h.rowwise() += b1.row(0);
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      if (h(r, c) < 0.0) h(r, c) *= slope;
    }
  }
  Matrix out = h * w2;
  out.rowwise() += b2.row(0);
  return out;
}

Matrix ref_softmax_rows(Matrix s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    Eigen::RowVectorXd e = (s.row(i).array() - m).exp();
    s.row(i) = e / e.sum();
  }
  return s;
}

Matrix ref_attention(const Matrix& fq, const Matrix& fkv,
                     const std::vector<Matrix>& wq, const std::vector<Matrix>& wk,
                     const std::vector<Matrix>& wv, const Matrix& wo,
                     const Matrix& m_w1, const Matrix& m_b1, const Matrix& m_w2,
                     const Matrix& m_b2, double slope) {
  const int heads = static_cast<int>(wq.size());
  const int dh = static_cast<int>(wq[0].rows());
  Matrix concat(fq.rows(), heads * dh);
  for (int h = 0; h < heads; ++h) {
    const Matrix q = fq.middleCols(h * dh, dh) * wq[static_cast<std::size_t>(h)];
    const Matrix k = fkv.middleCols(h * dh, dh) * wk[static_cast<std::size_t>(h)];
    const Matrix v = fkv.middleCols(h * dh, dh) * wv[static_cast<std::size_t>(h)];
    const Matrix alpha = ref_softmax_rows(q * k.transpose() / std::sqrt(double(dh)));
    concat.middleCols(h * dh, dh) = alpha * v;
  }
  const Matrix att = concat * wo;
  Matrix joined(fq.rows(), 2 * fq.cols());
  joined << fq, att;
  return fq + ref_mlp(joined, m_w1, m_b1, m_w2, m_b2, slope);
}

}  // namespace

TEST_CASE("single-point self-attention is the value vector plus residual") {
  Rng rng(51);
  const int d = 8, heads = 2, dh = d / heads;
  SelfWeights w = SelfWeights::random(d, heads, rng);
  Matrix f = random_matrix(1, d, rng);

  Tape t;
  Var fv = t.leaf(f, false);
  Var e = t.constant(Matrix::Zero(1, d));  // single pair embedding
  Var out = self_attention(t, fv, e, w.bind(t), {heads, 0.2, false});

  // Softmax over one key is 1, so attention output per head is exactly v_1.
  Matrix concat(1, d);
  for (int h = 0; h < heads; ++h) {
    concat.middleCols(h * dh, dh) =
        f.middleCols(h * dh, dh) * w.wv[static_cast<std::size_t>(h)];
  }
  const Matrix att = concat * w.wo;
  Matrix joined(1, 2 * d);
  joined << f, att;
  const Matrix want = f + ref_mlp(joined, w.m_w1, w.m_b1, w.m_w2, w.m_b2, 0.2);
  CHECK((t.value(out) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention rows sum to one per head") {
  // Recover the row-stochasticity through a probe: with wv = identity-ish
  // values summed, easier to assert on the softmax op directly.
  Rng rng(52);
  Tape t;
  Var scores = t.leaf(random_matrix(9, 9, rng, 3.0));
  const Matrix alpha = t.value(row_softmax(t, scores));
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    CHECK(std::abs(alpha.row(i).sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("wr = 0 reduces the full stack to the bias-free reference") {
  Rng rng(53);
  const int d = 12, heads = 4, layers = 3;
  const int nx = 16, ny = 24;
  Matrix fx = random_matrix(nx, d, rng);
  Matrix fy = random_matrix(ny, d, rng);
  // Arbitrary pair embeddings; wr = 0 must erase their influence.
  Matrix ex_table = random_matrix(nx * nx, d, rng);
  Matrix ey_table = random_matrix(ny * ny, d, rng);

  std::vector<SelfWeights> self_w;
  std::vector<CrossWeights> cross_w;
  for (int l = 0; l < layers; ++l) {
    self_w.push_back(SelfWeights::random(d, heads, rng));
    cross_w.push_back(CrossWeights::random(d, heads, rng));
  }

  Tape t;
  std::vector<BoundSelfAttention> self_b;
  std::vector<BoundCrossAttention> cross_b;
  for (int l = 0; l < layers; ++l) {
    self_b.push_back(self_w[static_cast<std::size_t>(l)].bind(t, /*zero_wr=*/true));
    cross_b.push_back(cross_w[static_cast<std::size_t>(l)].bind(t));
  }
  auto [hx, hy] = transformer_forward(t, t.leaf(fx), t.leaf(fy), t.constant(ex_table),
                                      t.constant(ey_table), self_b, cross_b,
                                      {heads, 0.2, false});

  Matrix rx = fx, ry = fy;
  for (int l = 0; l < layers; ++l) {
    const auto& sw = self_w[static_cast<std::size_t>(l)];
    const auto& cw = cross_w[static_cast<std::size_t>(l)];
    const Matrix sx = ref_attention(rx, rx, sw.wq, sw.wk, sw.wv, sw.wo, sw.m_w1,
                                    sw.m_b1, sw.m_w2, sw.m_b2, 0.2);
    const Matrix sy = ref_attention(ry, ry, sw.wq, sw.wk, sw.wv, sw.wo, sw.m_w1,
                                    sw.m_b1, sw.m_w2, sw.m_b2, 0.2);
    const Matrix cx = ref_attention(sx, sy, cw.wq, cw.wk, cw.wv, cw.wo, cw.m_w1,
                                    cw.m_b1, cw.m_w2, cw.m_b2, 0.2);
    const Matrix cy = ref_attention(sy, sx, cw.wq, cw.wk, cw.wv, cw.wo, cw.m_w1,
                                    cw.m_b1, cw.m_w2, cw.m_b2, 0.2);
    rx = cx;
    ry = cy;
  }
  CHECK((t.value(hx) - rx).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((t.value(hy) - ry).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cross attention with one key returns that value for every query") {
  Rng rng(54);
  const int d = 6, heads = 2, dh = 3;
  CrossWeights w = CrossWeights::random(d, heads, rng);
  Matrix fq = random_matrix(5, d, rng);
  Matrix fkv = random_matrix(1, d, rng);

  Tape t;
  Var out = cross_attention(t, t.leaf(fq), t.leaf(fkv), w.bind(t), {heads, 0.2, false});

  Matrix concat(5, d);
  for (int h = 0; h < heads; ++h) {
    const Matrix v = fkv.middleCols(h * dh, dh) * w.wv[static_cast<std::size_t>(h)];
    for (int r = 0; r < 5; ++r) concat.block(r, h * dh, 1, dh) = v;
  }
  const Matrix att = concat * w.wo;
  Matrix joined(5, 2 * d);
  joined << fq, att;
  const Matrix want = fq + ref_mlp(joined, w.m_w1, w.m_b1, w.m_w2, w.m_b2, 0.2);
  CHECK((t.value(out) - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant keys make cross attention constant across queries") {
  Rng rng(55);
  const int d = 8, heads = 4;
  CrossWeights w = CrossWeights::random(d, heads, rng);
  Matrix fq = random_matrix(6, d, rng);
  Matrix fkv(4, d);
  const Matrix one_row = random_matrix(1, d, rng);
  for (int r = 0; r < 4; ++r) fkv.row(r) = one_row.row(0);

  Tape t;
  Var att_in = t.leaf(fq);
  Var out = cross_attention(t, att_in, t.leaf(fkv), w.bind(t), {heads, 0.2, false});
  // The attention summand is identical for every query row; differences in
  // the output come only from the residual/query path. Verify by diffing two
  // queries made equal.
  Matrix fq2 = fq;
  fq2.row(3) = fq.row(0);
  Tape t2;
  Var out2 = cross_attention(t2, t2.leaf(fq2), t2.leaf(fkv), w.bind(t2),
                             {heads, 0.2, false});
  CHECK((t2.value(out2).row(3) - t2.value(out2).row(0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((t.value(out).row(0) - t2.value(out2).row(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cross attention wq gradient passes finite differences on 8x8 clouds") {
  Rng rng(56);
  const int d = 8, heads = 2;
  CrossWeights w = CrossWeights::random(d, heads, rng);
  Matrix fq = random_matrix(8, d, rng);
  Matrix fkv = random_matrix(8, d, rng);
  const Matrix weights = random_matrix(8, d, rng);

  auto forward = [&](Tape& t) {
    BoundCrossAttention b = w.bind(t);
    Var out = cross_attention(t, t.leaf(fq), t.leaf(fkv), b, {heads, 0.2, false});
    return std::pair{weighted_sum(t, out, weights), b};
  };
  Tape t;
  auto [loss, bound] = forward(t);
  t.backward(loss);
  auto eval = [&]() {
    Tape fresh;
    return fresh.value(forward(fresh).first)(0, 0);
  };
  CHECK(testutil::max_grad_rel_err(w.wq[0], t.grad(bound.wq[0]), eval) < 1e-4);
  CHECK(testutil::max_grad_rel_err(w.wq[1], t.grad(bound.wq[1]), eval) < 1e-4);
}

TEST_CASE("empty stack is the identity and argument order swaps outputs") {
  Rng rng(57);
  Matrix fx = random_matrix(7, 8, rng);
  Matrix fy = random_matrix(9, 8, rng);

  Tape t;
  auto [hx, hy] = transformer_forward(t, t.leaf(fx), t.leaf(fy), Var{}, Var{}, {}, {},
                                      {2, 0.2, false});
  CHECK((t.value(hx) - fx).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t.value(hy) - fy).cwiseAbs().maxCoeff() == 0.0);

  const int layers = 2, heads = 2, d = 8;
  std::vector<SelfWeights> self_w;
  std::vector<CrossWeights> cross_w;
  for (int l = 0; l < layers; ++l) {
    self_w.push_back(SelfWeights::random(d, heads, rng));
    cross_w.push_back(CrossWeights::random(d, heads, rng));
  }
  Matrix ex = random_matrix(7 * 7, d, rng);
  Matrix ey = random_matrix(9 * 9, d, rng);

  auto run = [&](const Matrix& a, const Matrix& b, const Matrix& ea, const Matrix& eb) {
    Tape tape;
    std::vector<BoundSelfAttention> sb;
    std::vector<BoundCrossAttention> cb;
    for (int l = 0; l < layers; ++l) {
      sb.push_back(self_w[static_cast<std::size_t>(l)].bind(tape));
      cb.push_back(cross_w[static_cast<std::size_t>(l)].bind(tape));
    }
    auto [ha, hb] = transformer_forward(tape, tape.leaf(a), tape.leaf(b),
                                        tape.constant(ea), tape.constant(eb), sb, cb,
                                        {heads, 0.2, false});
    return std::pair{Matrix(tape.value(ha)), Matrix(tape.value(hb))};
  };
  const auto [hx1, hy1] = run(fx, fy, ex, ey);
  const auto [hy2, hx2] = run(fy, fx, ey, ex);
  CHECK((hx1 - hx2).cwiseAbs().maxCoeff() == 0.0);  // bitwise swap symmetry
  CHECK((hy1 - hy2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("permutation equivariance of the full stack") {
  Rng rng(58);
  const int d = 8, heads = 2, layers = 2;
  const int nx = 10, ny = 6;
  Matrix fx = random_matrix(nx, d, rng);
  Matrix fy = random_matrix(ny, d, rng);
  // Pair tables must permute consistently with the rows.
  Matrix angles = random_matrix(nx, nx, rng, 1.0).cwiseAbs();
  angles = ((angles + angles.transpose()) / 2.0).eval();
  Matrix ey = random_matrix(ny * ny, d, rng);

  std::vector<SelfWeights> self_w;
  std::vector<CrossWeights> cross_w;
  for (int l = 0; l < layers; ++l) {
    self_w.push_back(SelfWeights::random(d, heads, rng));
    cross_w.push_back(CrossWeights::random(d, heads, rng));
  }

  auto table_from_angles = [&](const Matrix& a) {
    Matrix table(a.rows() * a.cols(), d);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (int c = 0; c < d; ++c) {
          table(i * a.cols() + j, c) = std::sin(a(i, j) * (c + 1));
        }
      }
    }
    return table;
  };

  auto run = [&](const Matrix& a, const Matrix& ang) {
    Tape tape;
    std::vector<BoundSelfAttention> sb;
    std::vector<BoundCrossAttention> cb;
    for (int l = 0; l < layers; ++l) {
      sb.push_back(self_w[static_cast<std::size_t>(l)].bind(tape));
      cb.push_back(cross_w[static_cast<std::size_t>(l)].bind(tape));
    }
    auto [ha, hb] = transformer_forward(tape, tape.leaf(a), tape.leaf(fy),
                                        tape.constant(table_from_angles(ang)),
                                        tape.constant(ey), sb, cb, {heads, 0.2, false});
    return std::pair{Matrix(tape.value(ha)), Matrix(tape.value(hb))};
  };

  const auto [hx, hy] = run(fx, angles);

  std::vector<int> perm(nx);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Matrix pfx(nx, d);
  Matrix pangles(nx, nx);
  for (int i = 0; i < nx; ++i) {
    pfx.row(perm[static_cast<std::size_t>(i)]) = fx.row(i);
    for (int j = 0; j < nx; ++j) {
      pangles(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) =
          angles(i, j);
    }
  }
  const auto [phx, phy] = run(pfx, pangles);
  double worst = 0.0;
  for (int i = 0; i < nx; ++i) {
    worst = std::max(worst, (phx.row(perm[static_cast<std::size_t>(i)]) - hx.row(i))
                                .cwiseAbs()
                                .maxCoeff());
  }
  CHECK(worst < 1e-11);
  CHECK((phy - hy).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_SUITE_END();
