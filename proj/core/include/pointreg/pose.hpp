#pragma once

#include <cstdint>
#include <vector>

#include "pointreg/geometry.hpp"

namespace pointreg {

/// Least-squares rigid alignment of paired points via SVD of the weighted
/// cross-covariance, reflection-corrected. Throws NumericError when the
/// pairs are collinear or otherwise rank deficient, ConfigError on bad
/// sizes or weights.
RigidTransform kabsch(const std::vector<Eigen::Vector3d>& src,
                      const std::vector<Eigen::Vector3d>& dst,
                      const std::vector<double>* weights = nullptr);

struct RansacConfig {
  int k_c = 256;                   // best-scored correspondences kept
  int max_iters = 500;
  double inlier_threshold = 0.05;  // meters
  int sample_size = 3;
  std::uint64_t seed = 0;
};

struct RansacResult {
  RigidTransform transform;
  std::vector<std::uint8_t> inlier_mask;  // over the input correspondence list
  int inlier_count = 0;
  int iterations = 0;  // hypothesis rounds actually run
};

/// Classic RANSAC over the k_c highest-scored correspondences: minimal
/// Kabsch fits, inlier counting at inlier_threshold, final refit on the
/// best model's inliers. Deterministic given the seed; ties go to the
/// earlier hypothesis.
RansacResult ransac_register(const CorrespondenceSet& corr, const PointCloud& x,
                             const PointCloud& y, const RansacConfig& cfg);

struct IcpResult {
  RigidTransform transform;
  int iterations = 0;
  std::vector<double> mse_history;  // mean squared matching distance per round
};

/// Alternates nearest-neighbor matching with Kabsch until the incremental
/// correction falls below tol. May converge to a local minimum; the matching
/// MSE is nonincreasing across iterations.
IcpResult icp(const PointCloud& x, const PointCloud& y, int max_iters, double tol);

}  // namespace pointreg
