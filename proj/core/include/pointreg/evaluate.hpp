#pragma once

#include <optional>
#include <vector>

#include "pointreg/datagen.hpp"
#include "pointreg/matching.hpp"
#include "pointreg/model.hpp"
#include "pointreg/pose.hpp"

namespace pointreg {

enum class PoseEstimator { kRansac, kSvd, kIcp };

PoseEstimator estimator_from_name(const std::string& name);

struct EvalOptions {
  PoseEstimator estimator = PoseEstimator::kRansac;
  bool oracle_matches = false;    // use ground-truth correspondences
  bool normal_bias = true;        // false drops the normal-angle attention bias
  RansacConfig ransac;
  int icp_max_iters = 100;
  double icp_tol = 1e-8;
};

struct PairEval {
  MatchingCounts counts;
  int match_count = 0;
  int inlier_count = 0;
  bool pose_valid = false;
  RigidTransform estimate;
  Eigen::Vector3d rot_err_deg = Eigen::Vector3d::Zero();
  Eigen::Vector3d trans_err_m = Eigen::Vector3d::Zero();
  double geo_err_deg = 0.0;
};

/// Matches one pair (model or oracle correspondences), estimates the pose
/// with the selected arm, and scores both against the ground truth. Pose
/// failures (degenerate correspondence sets) are flagged, not thrown.
/// `params` may be null only for oracle matching or the ICP arm.
PairEval evaluate_pair(const ModelParams* params, const LoadedPair& pair,
                       const EvalOptions& options);

struct EvalSummary {
  int pairs = 0;
  int pose_failures = 0;
  // Per-axis aggregation over all pose-valid pairs and the three axes.
  double rmse_r_deg = 0.0, mae_r_deg = 0.0;
  double rmse_t_m = 0.0, mae_t_m = 0.0;
  // Scalar-angle style, reported alongside the per-axis numbers.
  double rmse_geo_deg = 0.0, mae_geo_deg = 0.0;
  MatchingMetrics matching;
};

EvalSummary summarize(const std::vector<PairEval>& rows);

}  // namespace pointreg
