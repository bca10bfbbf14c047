#pragma once

#include <optional>
#include <vector>

#include "pointreg/geometry.hpp"
#include "pointreg/tape.hpp"

namespace pointreg {

/// Ground-truth assignment between a source cloud of M points and a target
/// cloud of N points. kUnmatched marks points whose counterpart was cropped
/// away; they belong to the slack row/column.
struct GroundTruthMatches {
  static constexpr int kUnmatched = -1;

  std::vector<int> src_to_tgt;  // size M, target index or kUnmatched
  std::vector<int> tgt_to_src;  // size N, source index or kUnmatched

  int source_size() const { return static_cast<int>(src_to_tgt.size()); }
  int target_size() const { return static_cast<int>(tgt_to_src.size()); }
  int matched_count() const;

  /// Builds the inverse map from src_to_tgt.
  static GroundTruthMatches from_forward_map(const std::vector<int>& src_to_tgt,
                                             int target_size);
  /// Throws ConfigError if the two maps are not mutually consistent.
  void validate() const;
};

/// C(i, j) = h_i^X . h_j^Y.
Var score_matrix(Tape& t, Var hx, Var hy);

/// Appends a slack row and column filled with the (learnable) slack score.
/// slack must be a 1x1 tensor.
Var augment_slack(Tape& t, Var scores, Var slack);

/// Alternating row/column normalization of log-potentials z, iters rounds:
/// rows 0..M-1 are normalized over all N+1 columns, then columns 0..N-1 over
/// all M+1 rows. Returns exponentiated probabilities. Input must already
/// carry the slack row/column.
Var sinkhorn_normalize(Tape& t, Var z, int iters);

/// augment_slack + sinkhorn_normalize.
Var sinkhorn(Tape& t, Var scores, Var slack, int iters);
Var sinkhorn(Tape& t, Var scores, double slack, int iters);

/// Margin loss over the soft assignment: for every point, competitors that
/// come within `alpha` (in log space) of its true match contribute a hinge
/// term. Unmatched points use the slack index as their true match. Throws
/// NumericError if any probability is <= 0.
Var gap_loss(Tape& t, Var cbar, const GroundTruthMatches& gt, double alpha);

/// Mutual-argmax binarization of an (M+1)x(N+1) soft assignment. A point
/// whose row (column) argmax lands in the slack column (row) matches
/// nothing. Ties break toward the lowest index.
Eigen::MatrixXi hard_assignment(const Matrix& cbar);

/// Pairs (i, j) where y_j is the nearest neighbor of t_gt(x_i) within
/// dist_threshold and the relation is mutual.
GroundTruthMatches gt_correspondences(const PointCloud& x, const PointCloud& y,
                                      const RigidTransform& t_gt,
                                      double dist_threshold);

/// Raw confusion counts; aggregate across pairs before deriving metrics.
struct MatchingCounts {
  long true_positives = 0;
  long predicted = 0;      // declared pairs
  long gt_matched = 0;     // ground-truth pairs
  long correct_rows = 0;   // source points whose decision (incl. slack) is right
  long source_points = 0;

  MatchingCounts& operator+=(const MatchingCounts& o);
};

MatchingCounts count_matches(const Eigen::MatrixXi& assignment,
                             const GroundTruthMatches& gt);

/// Percentages; a metric with a zero denominator is left empty rather than
/// reported as 0.
struct MatchingMetrics {
  std::optional<double> precision;
  std::optional<double> accuracy;
  std::optional<double> recall;
  std::optional<double> f1;
};

MatchingMetrics metrics_from_counts(const MatchingCounts& c);
MatchingMetrics matching_metrics(const Eigen::MatrixXi& assignment,
                                 const GroundTruthMatches& gt);

/// Scored correspondence list from a hard assignment, scores taken from the
/// soft assignment probabilities.
CorrespondenceSet correspondences_from_assignment(const Eigen::MatrixXi& assignment,
                                                  const Matrix& cbar);

}  // namespace pointreg
