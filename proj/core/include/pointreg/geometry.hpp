#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace pointreg {

/// Ordered set of 3D points in meters, with optional per-point unit normals.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // empty, or one unit vector per point

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws NumericError if any coordinate is non-finite or a normal is not
  /// unit length (tolerance 1e-6), ConfigError on normal/point count mismatch.
  void validate() const;
};

/// Rotation in SO(3) plus translation in meters.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  /// Checks ||R^T R - I||_F < tol and det(R) = 1 within tol.
  bool is_valid(double tol = 1e-9) const;
};

/// Matched index pairs between a source and a target cloud. Bijective on its
/// support: no source or target index appears twice.
struct CorrespondenceSet {
  std::vector<std::pair<int, int>> pairs;  // (source index, target index)
  std::vector<double> scores;              // empty, or one score per pair
};

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
RigidTransform invert(const RigidTransform& t);
/// compose(a, b) applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Indices of the k nearest points to cloud.points[query], excluding the
/// query itself. Ties broken by lower index. Throws ConfigError unless
/// 1 <= k < cloud.size().
std::vector<int> knn(const PointCloud& cloud, int query, int k);

/// All points within radius r of the query (the query itself included),
/// truncated to the k_max nearest, ordered by distance then index.
std::vector<int> radius_neighbors(const PointCloud& cloud, int query, double r,
                                  int k_max);

/// XYZ Euler decomposition of a rotation matrix, R = Rx(x) * Ry(y) * Rz(z).
struct EulerAngles {
  Eigen::Vector3d radians = Eigen::Vector3d::Zero();
  bool gimbal_lock = false;  // |pitch| within ~1e-6 of 90 degrees
};

EulerAngles euler_xyz(const Eigen::Matrix3d& rotation);
/// Algebraically equivalent decomposition through a different pitch formula;
/// agrees with euler_xyz away from gimbal lock (used as a cross-check).
EulerAngles euler_xyz_alt(const Eigen::Matrix3d& rotation);

/// Per-axis absolute difference of XYZ Euler angles, in degrees.
Eigen::Vector3d rotation_error_deg(const Eigen::Matrix3d& r_est,
                                   const Eigen::Matrix3d& r_gt);
/// Per-axis absolute difference, in meters.
Eigen::Vector3d translation_error_m(const Eigen::Vector3d& t_est,
                                    const Eigen::Vector3d& t_gt);
/// Scalar geodesic angle of r_est * r_gt^T in degrees (reported alongside the
/// per-axis errors, not used for ranking).
double rotation_geodesic_deg(const Eigen::Matrix3d& r_est,
                             const Eigen::Matrix3d& r_gt);

Eigen::Matrix3d rotation_about_x(double radians);
Eigen::Matrix3d rotation_about_y(double radians);
Eigen::Matrix3d rotation_about_z(double radians);
/// Rx(x) * Ry(y) * Rz(z), the inverse of euler_xyz.
Eigen::Matrix3d rotation_from_euler_xyz(const Eigen::Vector3d& radians);

}  // namespace pointreg
