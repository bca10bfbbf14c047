#include "pointreg/tape.hpp"

#include <algorithm>
#include <cmath>

#include "pointreg/error.hpp"

namespace pointreg {

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Matrix value, bool requires_grad, std::function<void(Tape&)> fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var target) {
  if (!grad_enabled_) throw ConfigError("backward() on a no-grad tape");
  const Node& out = nodes_[static_cast<std::size_t>(target.id)];
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw ConfigError("backward() target must be a 1x1 scalar");
  }
  grad_buffer(target)(0, 0) += 1.0;
  for (int i = target.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward && n.grad.size() > 0) n.backward(*this);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.resize(0, 0);
}

void Tape::truncate(std::size_t mark) {
  if (mark < nodes_.size()) nodes_.resize(mark);
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch");
  }
}

bool any_grad(Tape& t, Var a) { return t.requires_grad(a); }
bool any_grad(Tape& t, Var a, Var b) { return t.requires_grad(a) || t.requires_grad(b); }

Var next_var(const Tape& t) { return Var{static_cast<int>(t.size())}; }

}  // namespace

Var add(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "add");
  const Var out = next_var(t);
  return t.emit(t.value(a) + t.value(b), any_grad(t, a, b), [a, b, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    if (tp.requires_grad(a)) tp.grad_buffer(a) += g;
    if (tp.requires_grad(b)) tp.grad_buffer(b) += g;
  });
}

Var sub(Tape& t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "sub");
  const Var out = next_var(t);
  return t.emit(t.value(a) - t.value(b), any_grad(t, a, b), [a, b, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    if (tp.requires_grad(a)) tp.grad_buffer(a) += g;
    if (tp.requires_grad(b)) tp.grad_buffer(b) -= g;
  });
}

Var scale(Tape& t, Var a, double s) {
  const Var out = next_var(t);
  return t.emit(t.value(a) * s, any_grad(t, a), [a, s, out](Tape& tp) {
    if (tp.requires_grad(a)) tp.grad_buffer(a) += tp.grad(out) * s;
  });
}

Var add_rowvec(Tape& t, Var a, Var r) {
  const Matrix& av = t.value(a);
  const Matrix& rv = t.value(r);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ConfigError("add_rowvec: r must be 1 x cols(a)");
  }
  Matrix v = av.rowwise() + rv.row(0);
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a, r), [a, r, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    if (tp.requires_grad(a)) tp.grad_buffer(a) += g;
    if (tp.requires_grad(r)) tp.grad_buffer(r) += g.colwise().sum();
  });
}

Var leaky_relu(Tape& t, Var a, double slope) {
  const Matrix& av = t.value(a);
  Matrix v = av.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  if (av.size() > 0) {
    t.kinks().min_relu_gap =
        std::min(t.kinks().min_relu_gap, av.cwiseAbs().minCoeff());
  }
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a), [a, slope, out](Tape& tp) {
    if (!tp.requires_grad(a)) return;
    const Matrix& g = tp.grad(out);
    const Matrix& av = tp.value(a);
    Matrix& ga = tp.grad_buffer(a);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      for (Eigen::Index rr = 0; rr < g.rows(); ++rr) {
        ga(rr, c) += g(rr, c) * (av(rr, c) > 0.0 ? 1.0 : slope);
      }
    }
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.rows() != bv.rows()) throw ConfigError("concat_cols: row mismatch");
  Matrix v(av.rows(), av.cols() + bv.cols());
  v << av, bv;
  const int wa = static_cast<int>(av.cols());
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a, b), [a, b, wa, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    if (tp.requires_grad(a)) tp.grad_buffer(a) += g.leftCols(wa);
    if (tp.requires_grad(b)) tp.grad_buffer(b) += g.rightCols(g.cols() - wa);
  });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: empty part list");
  Var acc = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) acc = concat_cols(t, acc, parts[i]);
  return acc;
}

Var slice_cols(Tape& t, Var a, int col0, int width) {
  const Matrix& av = t.value(a);
  if (col0 < 0 || width < 1 || col0 + width > av.cols()) {
    throw ConfigError("slice_cols: range out of bounds");
  }
  Matrix v = av.middleCols(col0, width);
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a), [a, col0, width, out](Tape& tp) {
    if (tp.requires_grad(a)) {
      tp.grad_buffer(a).middleCols(col0, width) += tp.grad(out);
    }
  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols() != bv.rows()) throw ConfigError("matmul: inner dimension mismatch");
  Matrix v = av * bv;
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a, b), [a, b, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    if (tp.requires_grad(a)) tp.grad_buffer(a).noalias() += g * tp.value(b).transpose();
    if (tp.requires_grad(b)) tp.grad_buffer(b).noalias() += tp.value(a).transpose() * g;
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.cols() != bv.cols()) throw ConfigError("matmul_nt: inner dimension mismatch");
  Matrix v = av * bv.transpose();
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a, b), [a, b, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    if (tp.requires_grad(a)) tp.grad_buffer(a).noalias() += g * tp.value(b);
    if (tp.requires_grad(b)) tp.grad_buffer(b).noalias() += g.transpose() * tp.value(a);
  });
}

Var row_softmax(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  Matrix v(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const double m = av.row(i).maxCoeff();
    Eigen::RowVectorXd e = (av.row(i).array() - m).exp();
    v.row(i) = e / e.sum();
  }
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a), [a, out](Tape& tp) {
    if (!tp.requires_grad(a)) return;
    const Matrix& y = tp.value(out);
    const Matrix& g = tp.grad(out);
    Matrix& ga = tp.grad_buffer(a);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      ga.row(i).array() += (g.row(i).array() - dot) * y.row(i).array();
    }
  });
}

Var sum_all(Tape& t, Var a) {
  Matrix v(1, 1);
  v(0, 0) = t.value(a).sum();
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a), [a, out](Tape& tp) {
    if (tp.requires_grad(a)) {
      tp.grad_buffer(a).array() += tp.grad(out)(0, 0);
    }
  });
}

Var weighted_sum(Tape& t, Var a, const Matrix& w) {
  check_same_shape(t.value(a), w, "weighted_sum");
  Matrix v(1, 1);
  v(0, 0) = (t.value(a).array() * w.array()).sum();
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a), [a, w, out](Tape& tp) {
    if (tp.requires_grad(a)) tp.grad_buffer(a) += tp.grad(out)(0, 0) * w;
  });
}

Var group_max(Tape& t, Var a, int group) {
  const Matrix& av = t.value(a);
  if (group < 1 || av.rows() % group != 0) {
    throw ConfigError("group_max: rows must be a multiple of group");
  }
  const Eigen::Index n = av.rows() / group;
  Matrix v(n, av.cols());
  // argmax per (group, column); lowest row index wins ties via strict >.
  std::vector<int> arg(static_cast<std::size_t>(n * av.cols()));
  double min_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < av.cols(); ++c) {
      double best = av(i * group, c);
      double second = -std::numeric_limits<double>::infinity();
      int best_r = 0;
      for (int m = 1; m < group; ++m) {
        const double x = av(i * group + m, c);
        if (x > best) {
          second = best;
          best = x;
          best_r = m;
        } else if (x > second) {
          second = x;
        }
      }
      if (group > 1) min_gap = std::min(min_gap, best - second);
      v(i, c) = best;
      arg[static_cast<std::size_t>(i * av.cols() + c)] = best_r;
    }
  }
  t.kinks().min_max_gap = std::min(t.kinks().min_max_gap, min_gap);
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, a),
                [a, group, arg = std::move(arg), out](Tape& tp) {
                  if (!tp.requires_grad(a)) return;
                  const Matrix& g = tp.grad(out);
                  Matrix& ga = tp.grad_buffer(a);
                  for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    for (Eigen::Index c = 0; c < g.cols(); ++c) {
                      const int m = arg[static_cast<std::size_t>(i * g.cols() + c)];
                      ga(i * group + m, c) += g(i, c);
                    }
                  }
                });
}

Var edge_features(Tape& t, Var f, const std::vector<int>& neighbors, int k) {
  const Matrix& fv = t.value(f);
  const Eigen::Index n = fv.rows();
  const Eigen::Index w = fv.cols();
  if (k < 1 || neighbors.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(k)) {
    throw ConfigError("edge_features: neighbor list must hold k entries per point");
  }
  Matrix v(n * k, 2 * w);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int m = 0; m < k; ++m) {
      const int j = neighbors[static_cast<std::size_t>(i * k + m)];
      v.row(i * k + m).head(w) = fv.row(i);
      v.row(i * k + m).tail(w) = fv.row(j) - fv.row(i);
    }
  }
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, f),
                [f, neighbors, k, w, out](Tape& tp) {
                  if (!tp.requires_grad(f)) return;
                  const Matrix& g = tp.grad(out);
                  Matrix& gf = tp.grad_buffer(f);
                  const Eigen::Index n = gf.rows();
                  for (Eigen::Index i = 0; i < n; ++i) {
                    for (int m = 0; m < k; ++m) {
                      const int j = neighbors[static_cast<std::size_t>(i * k + m)];
                      gf.row(i) += g.row(i * k + m).head(w) - g.row(i * k + m).tail(w);
                      gf.row(j) += g.row(i * k + m).tail(w);
                    }
                  }
                });
}

Var pair_bias(Tape& t, Var q, Var e, int col0) {
  const Matrix& qv = t.value(q);
  const Matrix& ev = t.value(e);
  const Eigen::Index n = qv.rows();
  const Eigen::Index w = qv.cols();
  if (ev.rows() != n * n) throw ConfigError("pair_bias: e must have rows(q)^2 rows");
  if (col0 < 0 || col0 + w > ev.cols()) throw ConfigError("pair_bias: column slice out of range");
  Matrix v(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v.row(i).noalias() =
        (ev.middleRows(i * n, n).middleCols(col0, w) * qv.row(i).transpose()).transpose();
  }
  const Var out = next_var(t);
  return t.emit(std::move(v), any_grad(t, q, e), [q, e, col0, out](Tape& tp) {
    const Matrix& g = tp.grad(out);
    const Matrix& qv = tp.value(q);
    const Matrix& ev = tp.value(e);
    const Eigen::Index n = qv.rows();
    const Eigen::Index w = qv.cols();
    if (tp.requires_grad(q)) {
      Matrix& gq = tp.grad_buffer(q);
      for (Eigen::Index i = 0; i < n; ++i) {
        gq.row(i).noalias() += g.row(i) * ev.middleRows(i * n, n).middleCols(col0, w);
      }
    }
    if (tp.requires_grad(e)) {
      Matrix& ge = tp.grad_buffer(e);
      for (Eigen::Index i = 0; i < n; ++i) {
        ge.middleRows(i * n, n).middleCols(col0, w).noalias() +=
            g.row(i).transpose() * qv.row(i);
      }
    }
  });
}

}  // namespace pointreg
