#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

namespace pointreg {

using Matrix = Eigen::MatrixXd;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Distances to the nearest non-differentiable point crossed during a
/// forward pass. Gradient checks resample inputs that land too close to a
/// kink, where one-sided subgradients and finite differences disagree.
struct KinkReport {
  double min_relu_gap = std::numeric_limits<double>::infinity();
  double min_max_gap = std::numeric_limits<double>::infinity();
  double min_hinge_gap = std::numeric_limits<double>::infinity();

  double smallest() const {
    return std::min({min_relu_gap, min_max_gap, min_hinge_gap});
  }
};

/// Reverse-mode autodiff over dense matrices. Operations append nodes with
/// backward closures; backward() replays them in reverse, accumulating into
/// per-node gradient buffers in a fixed order (bitwise reproducible).
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  /// Gradient of the last backward() target w.r.t. v. Zero-sized until
  /// backward touches the node.
  const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad.size() > 0; }

  /// Seeds d(target) = 1 (target must be 1x1) and runs all closures in
  /// reverse emission order.
  void backward(Var target);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  /// Frees every node emitted at or after mark. No Var created after the
  /// mark may be used again. Only for no-grad forward passes.
  void truncate(std::size_t mark);

  const KinkReport& kinks() const { return kinks_; }
  KinkReport& kinks() { return kinks_; }

  // Implementation surface for operations.
  struct Node {
    Matrix value;
    Matrix grad;  // empty until used
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };
  Var emit(Matrix value, bool requires_grad, std::function<void(Tape&)> fn);
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  /// Gradient accumulation buffer, allocated as zeros on first touch.
  Matrix& grad_buffer(Var v);

 private:
  std::vector<Node> nodes_;
  bool grad_enabled_;
  KinkReport kinks_;
};

// ----- elementwise / structural ops -----

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
/// a + r broadcast over rows; r must be 1 x cols(a).
Var add_rowvec(Tape& t, Var a, Var r);
Var leaky_relu(Tape& t, Var a, double slope);
Var concat_cols(Tape& t, Var a, Var b);
Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var slice_cols(Tape& t, Var a, int col0, int width);

// ----- linear algebra -----

Var matmul(Tape& t, Var a, Var b);
/// a * b^T
Var matmul_nt(Tape& t, Var a, Var b);

// ----- reductions / nonlinearities -----

Var row_softmax(Tape& t, Var a);
Var sum_all(Tape& t, Var a);
/// sum(a .* w) with constant weights; handy for scalarizing test losses.
Var weighted_sum(Tape& t, Var a, const Matrix& w);

/// Elementwise max over consecutive row groups of size `group`; ties route
/// the gradient to the lowest row index. rows(a) must be a multiple of group.
Var group_max(Tape& t, Var a, int group);

/// For each point i and its m-th neighbor j = neighbors[i*k + m], emits row
/// [f_i, f_j - f_i] at index i*k + m.
Var edge_features(Tape& t, Var f, const std::vector<int>& neighbors, int k);

/// B(i, j) = dot(q.row(i), e.row(i*M + j).segment(col0, cols(q))) where M is
/// rows(q) and e holds one row per ordered point pair. Used for the pairwise
/// additive attention bias.
Var pair_bias(Tape& t, Var q, Var e, int col0);

}  // namespace pointreg
