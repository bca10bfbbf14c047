#include "pointreg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pointreg/error.hpp"

namespace pointreg {

int GroundTruthMatches::matched_count() const {
  int k = 0;
  for (int j : src_to_tgt) {
    if (j != kUnmatched) ++k;
  }
  return k;
}

GroundTruthMatches GroundTruthMatches::from_forward_map(
    const std::vector<int>& src_to_tgt, int target_size) {
  GroundTruthMatches gt;
  gt.src_to_tgt = src_to_tgt;
  gt.tgt_to_src.assign(static_cast<std::size_t>(target_size), kUnmatched);
  for (std::size_t i = 0; i < src_to_tgt.size(); ++i) {
    const int j = src_to_tgt[i];
    if (j == kUnmatched) continue;
    if (j < 0 || j >= target_size) throw ConfigError("ground truth: target index out of range");
    if (gt.tgt_to_src[static_cast<std::size_t>(j)] != kUnmatched) {
      throw ConfigError("ground truth: duplicate target index");
    }
    gt.tgt_to_src[static_cast<std::size_t>(j)] = static_cast<int>(i);
  }
  return gt;
}

void GroundTruthMatches::validate() const {
  for (std::size_t i = 0; i < src_to_tgt.size(); ++i) {
    const int j = src_to_tgt[i];
    if (j == kUnmatched) continue;
    if (j < 0 || j >= target_size() ||
        tgt_to_src[static_cast<std::size_t>(j)] != static_cast<int>(i)) {
      throw ConfigError("ground truth: forward/backward maps are inconsistent");
    }
  }
  for (std::size_t j = 0; j < tgt_to_src.size(); ++j) {
    const int i = tgt_to_src[j];
    if (i == kUnmatched) continue;
    if (i < 0 || i >= source_size() ||
        src_to_tgt[static_cast<std::size_t>(i)] != static_cast<int>(j)) {
      throw ConfigError("ground truth: forward/backward maps are inconsistent");
    }
  }
}

Var score_matrix(Tape& t, Var hx, Var hy) {
  if (t.value(hx).cols() != t.value(hy).cols()) {
    throw ConfigError("score_matrix: encodings must share the feature width");
  }
  return matmul_nt(t, hx, hy);
}

Var augment_slack(Tape& t, Var scores, Var slack) {
  const Matrix& c = t.value(scores);
  const Matrix& s = t.value(slack);
  if (s.rows() != 1 || s.cols() != 1) throw ConfigError("augment_slack: slack must be 1x1");
  const Eigen::Index m = c.rows(), n = c.cols();
  Matrix z(m + 1, n + 1);
  z.topLeftCorner(m, n) = c;
  z.row(m).setConstant(s(0, 0));
  z.col(n).setConstant(s(0, 0));
  const Var out{static_cast<int>(t.size())};
  return t.emit(std::move(z), t.requires_grad(scores) || t.requires_grad(slack),
                [scores, slack, m, n, out](Tape& tp) {
                  const Matrix& g = tp.grad(out);
                  if (tp.requires_grad(scores)) {
                    tp.grad_buffer(scores) += g.topLeftCorner(m, n);
                  }
                  if (tp.requires_grad(slack)) {
                    tp.grad_buffer(slack)(0, 0) +=
                        g.row(m).sum() + g.col(n).sum() - g(m, n);
                  }
                });
}

namespace {

// logsumexp over a stashed row/column with max-shift.
double lse(const Eigen::ArrayXd& x) {
  const double m = x.maxCoeff();
  return m + std::log((x - m).exp().sum());
}

}  // namespace

Var sinkhorn_normalize(Tape& t, Var z_var, int iters) {
  if (iters < 1) throw ConfigError("sinkhorn: iters must be >= 1");
  const Matrix& z = t.value(z_var);
  if (!z.allFinite()) throw NumericError("sinkhorn: non-finite input scores");
  const Eigen::Index m1 = z.rows(), n1 = z.cols();
  const Eigen::Index m = m1 - 1, n = n1 - 1;
  if (m < 1 || n < 1) throw ConfigError("sinkhorn: input must carry a slack row and column");

  // Balanced log-domain Sinkhorn over the augmented table: real rows and
  // columns carry unit mass, the slack row absorbs N and the slack column M,
  // so unmatched mass has somewhere to go and a constant shift of the whole
  // table is absorbed exactly by the potentials.
  Eigen::VectorXd log_mu = Eigen::VectorXd::Zero(m1);
  Eigen::VectorXd log_nu = Eigen::VectorXd::Zero(n1);
  log_mu(m) = std::log(static_cast<double>(n));
  log_nu(n) = std::log(static_cast<double>(m));

  Matrix u_hist(iters, m1);
  Matrix v_hist(iters, n1);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m1);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n1);
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index i = 0; i < m1; ++i) {
      u(i) = log_mu(i) - lse(z.row(i).transpose().array() + v.array());
    }
    u_hist.row(it) = u.transpose();
    for (Eigen::Index j = 0; j < n1; ++j) {
      v(j) = log_nu(j) - lse(z.col(j).array() + u.array());
    }
    v_hist.row(it) = v.transpose();
  }
  Matrix p(m1, n1);
  for (Eigen::Index i = 0; i < m1; ++i) {
    for (Eigen::Index j = 0; j < n1; ++j) {
      p(i, j) = std::exp(z(i, j) + u(i) + v(j));
    }
  }

  const Var out{static_cast<int>(t.size())};
  return t.emit(
      std::move(p), t.requires_grad(z_var),
      [z_var, iters, m, n, log_mu = std::move(log_mu), log_nu = std::move(log_nu),
       u_hist = std::move(u_hist), v_hist = std::move(v_hist), out](Tape& tp) {
        const Matrix& g = tp.grad(out);
        const Matrix& z = tp.value(z_var);
        const Matrix& p = tp.value(out);
        const Eigen::Index m1 = m + 1, n1 = n + 1;
        Matrix& gz = tp.grad_buffer(z_var);

        // Through P = exp(Z + u* + v*).
        Matrix gp = g.cwiseProduct(p);
        gz += gp;
        Eigen::VectorXd gu = gp.rowwise().sum();
        Eigen::VectorXd gv = gp.colwise().sum().transpose();

        Eigen::VectorXd u_t(m1), v_t(n1), v_prev(n1);
        for (int it = iters - 1; it >= 0; --it) {
          u_t = u_hist.row(it).transpose();
          v_t = v_hist.row(it).transpose();
          v_prev = it > 0 ? Eigen::VectorXd(v_hist.row(it - 1).transpose())
                          : Eigen::VectorXd::Zero(n1);
          // Column pass: v_j = log_nu_j - lse_i(z_ij + u_i); the softmax
          // weights are exp(z_ij + u_i + v_j - log_nu_j).
          for (Eigen::Index j = 0; j < n1; ++j) {
            if (gv(j) == 0.0) continue;
            for (Eigen::Index i = 0; i < m1; ++i) {
              const double w = std::exp(z(i, j) + u_t(i) + v_t(j) - log_nu(j));
              gz(i, j) -= gv(j) * w;
              gu(i) -= gv(j) * w;
            }
          }
          // Row pass: u_i = log_mu_i - lse_j(z_ij + v_prev_j).
          gv.setZero();
          for (Eigen::Index i = 0; i < m1; ++i) {
            if (gu(i) == 0.0) continue;
            for (Eigen::Index j = 0; j < n1; ++j) {
              const double w = std::exp(z(i, j) + v_prev(j) + u_t(i) - log_mu(i));
              gz(i, j) -= gu(i) * w;
              gv(j) -= gu(i) * w;
            }
          }
          gu.setZero();
        }
      });
}

Var sinkhorn(Tape& t, Var scores, Var slack, int iters) {
  return sinkhorn_normalize(t, augment_slack(t, scores, slack), iters);
}

Var sinkhorn(Tape& t, Var scores, double slack, int iters) {
  Matrix s(1, 1);
  s(0, 0) = slack;
  return sinkhorn(t, scores, t.constant(std::move(s)), iters);
}

Var gap_loss(Tape& t, Var cbar_var, const GroundTruthMatches& gt, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("gap_loss: alpha must be positive");
  const Matrix& cbar = t.value(cbar_var);
  const Eigen::Index m = cbar.rows() - 1, n = cbar.cols() - 1;
  if (gt.source_size() != m || gt.target_size() != n) {
    throw ConfigError("gap_loss: ground truth size does not match the assignment");
  }
  if ((cbar.array() <= 0.0).any()) {
    throw NumericError("gap_loss: assignment probabilities must be positive");
  }
  gt.validate();

  const Matrix lam = cbar.array().log();
  double loss = 0.0;
  double min_hinge = std::numeric_limits<double>::infinity();
  // Row terms: one hinge per column competitor, slack column included.
  for (Eigen::Index i = 0; i < m; ++i) {
    const int true_j = gt.src_to_tgt[static_cast<std::size_t>(i)];
    const Eigen::Index ci = true_j == GroundTruthMatches::kUnmatched
                                ? n
                                : static_cast<Eigen::Index>(true_j);
    double s = 0.0;
    for (Eigen::Index j = 0; j <= n; ++j) {
      const double arg = lam(i, j) - lam(i, ci) + alpha;
      if (j != ci) min_hinge = std::min(min_hinge, std::abs(arg));
      if (arg > 0.0) s += arg;
    }
    loss += std::log(s + 1.0);
  }
  // Column terms, symmetric over row competitors.
  for (Eigen::Index j = 0; j < n; ++j) {
    const int true_i = gt.tgt_to_src[static_cast<std::size_t>(j)];
    const Eigen::Index rj = true_i == GroundTruthMatches::kUnmatched
                                ? m
                                : static_cast<Eigen::Index>(true_i);
    double s = 0.0;
    for (Eigen::Index i = 0; i <= m; ++i) {
      const double arg = lam(i, j) - lam(rj, j) + alpha;
      if (i != rj) min_hinge = std::min(min_hinge, std::abs(arg));
      if (arg > 0.0) s += arg;
    }
    loss += std::log(s + 1.0);
  }
  t.kinks().min_hinge_gap = std::min(t.kinks().min_hinge_gap, min_hinge);

  Matrix out(1, 1);
  out(0, 0) = loss;
  const Var out_var{static_cast<int>(t.size())};
  auto gt_copy = gt;
  return t.emit(std::move(out), t.requires_grad(cbar_var),
                [cbar_var, gt_copy = std::move(gt_copy), alpha, out_var](Tape& tp) {
                  const double g = tp.grad(out_var)(0, 0);
                  const Matrix& cbar = tp.value(cbar_var);
                  const Eigen::Index m = cbar.rows() - 1, n = cbar.cols() - 1;
                  const Matrix lam = cbar.array().log();
                  Matrix glam = Matrix::Zero(m + 1, n + 1);
                  for (Eigen::Index i = 0; i < m; ++i) {
                    const int true_j = gt_copy.src_to_tgt[static_cast<std::size_t>(i)];
                    const Eigen::Index ci = true_j == GroundTruthMatches::kUnmatched
                                                ? n
                                                : static_cast<Eigen::Index>(true_j);
                    double s = 0.0;
                    for (Eigen::Index j = 0; j <= n; ++j) {
                      const double arg = lam(i, j) - lam(i, ci) + alpha;
                      if (arg > 0.0) s += arg;
                    }
                    const double coeff = g / (s + 1.0);
                    for (Eigen::Index j = 0; j <= n; ++j) {
                      if (j == ci) continue;  // its hinge argument is constant
                      if (lam(i, j) - lam(i, ci) + alpha > 0.0) {
                        glam(i, j) += coeff;
                        glam(i, ci) -= coeff;
                      }
                    }
                  }
                  for (Eigen::Index j = 0; j < n; ++j) {
                    const int true_i = gt_copy.tgt_to_src[static_cast<std::size_t>(j)];
                    const Eigen::Index rj = true_i == GroundTruthMatches::kUnmatched
                                                ? m
                                                : static_cast<Eigen::Index>(true_i);
                    double s = 0.0;
                    for (Eigen::Index i = 0; i <= m; ++i) {
                      const double arg = lam(i, j) - lam(rj, j) + alpha;
                      if (arg > 0.0) s += arg;
                    }
                    const double coeff = g / (s + 1.0);
                    for (Eigen::Index i = 0; i <= m; ++i) {
                      if (i == rj) continue;
                      if (lam(i, j) - lam(rj, j) + alpha > 0.0) {
                        glam(i, j) += coeff;
                        glam(rj, j) -= coeff;
                      }
                    }
                  }
                  tp.grad_buffer(cbar_var) += glam.cwiseQuotient(cbar);
                });
}

Eigen::MatrixXi hard_assignment(const Matrix& cbar) {
  const Eigen::Index m = cbar.rows() - 1, n = cbar.cols() - 1;
  if (m < 1 || n < 1) throw ConfigError("hard_assignment: input must carry slack");
  std::vector<Eigen::Index> row_best(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> col_best(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j <= n; ++j) {
      if (cbar(i, j) > cbar(i, best)) best = j;
    }
    row_best[static_cast<std::size_t>(i)] = best;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i <= m; ++i) {
      if (cbar(i, j) > cbar(best, j)) best = i;
    }
    col_best[static_cast<std::size_t>(j)] = best;
  }
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = row_best[static_cast<std::size_t>(i)];
    if (j < n && col_best[static_cast<std::size_t>(j)] == i) a(i, j) = 1;
  }
  return a;
}

GroundTruthMatches gt_correspondences(const PointCloud& x, const PointCloud& y,
                                      const RigidTransform& t_gt,
                                      double dist_threshold) {
  if (!(dist_threshold > 0.0)) throw ConfigError("gt_correspondences: threshold must be positive");
  const PointCloud tx = apply_transform(x, t_gt);
  const int m = static_cast<int>(tx.size());
  const int n = static_cast<int>(y.size());

  auto nearest = [](const Eigen::Vector3d& p, const std::vector<Eigen::Vector3d>& pts) {
    int best = 0;
    double best_d = (pts[0] - p).squaredNorm();
    for (int k = 1; k < static_cast<int>(pts.size()); ++k) {
      const double d = (pts[static_cast<std::size_t>(k)] - p).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return std::pair<int, double>{best, best_d};
  };

  std::vector<int> fwd(static_cast<std::size_t>(m));
  std::vector<int> bwd(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) fwd[static_cast<std::size_t>(i)] = nearest(tx.points[static_cast<std::size_t>(i)], y.points).first;
  for (int j = 0; j < n; ++j) bwd[static_cast<std::size_t>(j)] = nearest(y.points[static_cast<std::size_t>(j)], tx.points).first;

  GroundTruthMatches gt;
  gt.src_to_tgt.assign(static_cast<std::size_t>(m), GroundTruthMatches::kUnmatched);
  gt.tgt_to_src.assign(static_cast<std::size_t>(n), GroundTruthMatches::kUnmatched);
  const double thr2 = dist_threshold * dist_threshold;
  for (int i = 0; i < m; ++i) {
    const int j = fwd[static_cast<std::size_t>(i)];
    if (bwd[static_cast<std::size_t>(j)] != i) continue;
    const double d2 = (tx.points[static_cast<std::size_t>(i)] - y.points[static_cast<std::size_t>(j)]).squaredNorm();
    if (d2 < thr2) {
      gt.src_to_tgt[static_cast<std::size_t>(i)] = j;
      gt.tgt_to_src[static_cast<std::size_t>(j)] = i;
    }
  }
  return gt;
}

MatchingCounts& MatchingCounts::operator+=(const MatchingCounts& o) {
  true_positives += o.true_positives;
  predicted += o.predicted;
  gt_matched += o.gt_matched;
  correct_rows += o.correct_rows;
  source_points += o.source_points;
  return *this;
}

MatchingCounts count_matches(const Eigen::MatrixXi& assignment,
                             const GroundTruthMatches& gt) {
  const Eigen::Index m = assignment.rows(), n = assignment.cols();
  if (gt.source_size() != m || gt.target_size() != n) {
    throw ConfigError("count_matches: shape mismatch");
  }
  MatchingCounts c;
  c.source_points = m;
  c.gt_matched = gt.matched_count();
  for (Eigen::Index i = 0; i < m; ++i) {
    int declared = GroundTruthMatches::kUnmatched;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (assignment(i, j) != 0) {
        declared = static_cast<int>(j);
        ++c.predicted;
      }
    }
    const int want = gt.src_to_tgt[static_cast<std::size_t>(i)];
    if (declared != GroundTruthMatches::kUnmatched && declared == want) ++c.true_positives;
    if (declared == want) ++c.correct_rows;
  }
  return c;
}

MatchingMetrics metrics_from_counts(const MatchingCounts& c) {
  MatchingMetrics m;
  if (c.predicted > 0) {
    m.precision = 100.0 * static_cast<double>(c.true_positives) / static_cast<double>(c.predicted);
  }
  if (c.gt_matched > 0) {
    m.recall = 100.0 * static_cast<double>(c.true_positives) / static_cast<double>(c.gt_matched);
  }
  if (c.source_points > 0) {
    m.accuracy = 100.0 * static_cast<double>(c.correct_rows) / static_cast<double>(c.source_points);
  }
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
    m.f1 = 2.0 * (*m.precision) * (*m.recall) / (*m.precision + *m.recall);
  }
  return m;
}

MatchingMetrics matching_metrics(const Eigen::MatrixXi& assignment,
                                 const GroundTruthMatches& gt) {
  return metrics_from_counts(count_matches(assignment, gt));
}

CorrespondenceSet correspondences_from_assignment(const Eigen::MatrixXi& assignment,
                                                  const Matrix& cbar) {
  CorrespondenceSet corr;
  for (Eigen::Index i = 0; i < assignment.rows(); ++i) {
    for (Eigen::Index j = 0; j < assignment.cols(); ++j) {
      if (assignment(i, j) != 0) {
        corr.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        corr.scores.push_back(cbar(i, j));
      }
    }
  }
  return corr;
}

}  // namespace pointreg
