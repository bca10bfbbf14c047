#include "pointreg/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pointreg/error.hpp"

namespace pointreg {

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!p.allFinite()) throw NumericError("point cloud has non-finite coordinates");
  }
  if (!normals.empty()) {
    if (normals.size() != points.size()) {
      throw ConfigError("normal count does not match point count");
    }
    for (const auto& n : normals) {
      if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
        throw NumericError("normals must be unit length");
      }
    }
  }
}

bool RigidTransform::is_valid(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).norm() >= tol) return false;
  return std::abs(rotation.determinant() - 1.0) < tol && translation.allFinite();
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(t.rotation * p + t.translation);
  if (cloud.has_normals()) {
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(t.rotation * n);
  }
  return out;
}

RigidTransform invert(const RigidTransform& t) {
  RigidTransform inv;
  inv.rotation = t.rotation.transpose();
  inv.translation = -(inv.rotation * t.translation);
  return inv;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

namespace {

// (squared distance, index) pairs for all points except the query.
std::vector<std::pair<double, int>> distances_from(const PointCloud& cloud,
                                                   int query) {
  std::vector<std::pair<double, int>> d;
  d.reserve(cloud.size());
  const Eigen::Vector3d& q = cloud.points[static_cast<std::size_t>(query)];
  for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
    if (i == query) continue;
    d.emplace_back((cloud.points[static_cast<std::size_t>(i)] - q).squaredNorm(), i);
  }
  return d;
}

}  // namespace

std::vector<int> knn(const PointCloud& cloud, int query, int k) {
  const int n = static_cast<int>(cloud.size());
  if (query < 0 || query >= n) throw ConfigError("knn: query index out of range");
  if (k < 1 || k >= n) throw ConfigError("knn: k must satisfy 1 <= k < cloud size");

  auto d = distances_from(cloud, query);
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(d[static_cast<std::size_t>(i)].second);
  return out;
}

std::vector<int> radius_neighbors(const PointCloud& cloud, int query, double r,
                                  int k_max) {
  const int n = static_cast<int>(cloud.size());
  if (query < 0 || query >= n) throw ConfigError("radius_neighbors: query index out of range");
  if (!(r > 0.0)) throw ConfigError("radius_neighbors: radius must be positive");
  if (k_max < 1) throw ConfigError("radius_neighbors: k_max must be >= 1");

  const double r2 = r * r;
  std::vector<std::pair<double, int>> within;
  within.emplace_back(0.0, query);
  const Eigen::Vector3d& q = cloud.points[static_cast<std::size_t>(query)];
  for (int i = 0; i < n; ++i) {
    if (i == query) continue;
    const double d2 = (cloud.points[static_cast<std::size_t>(i)] - q).squaredNorm();
    if (d2 <= r2) within.emplace_back(d2, i);
  }
  std::sort(within.begin(), within.end());
  if (static_cast<int>(within.size()) > k_max) within.resize(static_cast<std::size_t>(k_max));
  std::vector<int> out;
  out.reserve(within.size());
  for (const auto& [d2, i] : within) out.push_back(i);
  return out;
}

namespace {
constexpr double kRadToDeg = 180.0 / EIGEN_PI;
constexpr double kGimbalTol = 1e-6;
}  // namespace

// R = Rx * Ry * Rz gives
//   [  cy*cz          -cy*sz           sy   ]
//   [  cx*sz+sx*sy*cz  cx*cz-sx*sy*sz -sx*cy]
//   [  sx*sz-cx*sy*cz  sx*cz+cx*sy*sz  cx*cy]
EulerAngles euler_xyz(const Eigen::Matrix3d& r) {
  EulerAngles e;
  const double sy = std::clamp(r(0, 2), -1.0, 1.0);
  e.radians.y() = std::asin(sy);
  if (1.0 - std::abs(sy) < kGimbalTol) {
    e.gimbal_lock = true;
    // cy ~ 0: x and z are coupled; conventionally put everything in x.
    e.radians.x() = std::atan2(r(1, 0), r(1, 1));
    e.radians.z() = 0.0;
  } else {
    e.radians.x() = std::atan2(-r(1, 2), r(2, 2));
    e.radians.z() = std::atan2(-r(0, 1), r(0, 0));
  }
  return e;
}

EulerAngles euler_xyz_alt(const Eigen::Matrix3d& r) {
  EulerAngles e;
  const double cy = std::sqrt(r(0, 0) * r(0, 0) + r(0, 1) * r(0, 1));
  e.radians.y() = std::atan2(std::clamp(r(0, 2), -1.0, 1.0), cy);
  if (cy < kGimbalTol) {
    e.gimbal_lock = true;
    e.radians.x() = std::atan2(r(1, 0), r(1, 1));
    e.radians.z() = 0.0;
  } else {
    e.radians.x() = std::atan2(-r(1, 2) / cy, r(2, 2) / cy);
    e.radians.z() = std::atan2(-r(0, 1) / cy, r(0, 0) / cy);
  }
  return e;
}

Eigen::Vector3d rotation_error_deg(const Eigen::Matrix3d& r_est,
                                   const Eigen::Matrix3d& r_gt) {
  const EulerAngles est = euler_xyz(r_est);
  const EulerAngles gt = euler_xyz(r_gt);
  return (est.radians - gt.radians).cwiseAbs() * kRadToDeg;
}

Eigen::Vector3d translation_error_m(const Eigen::Vector3d& t_est,
                                    const Eigen::Vector3d& t_gt) {
  return (t_est - t_gt).cwiseAbs();
}

double rotation_geodesic_deg(const Eigen::Matrix3d& r_est,
                             const Eigen::Matrix3d& r_gt) {
  const double c = std::clamp(((r_est * r_gt.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

Eigen::Matrix3d rotation_about_x(double a) {
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

Eigen::Matrix3d rotation_about_y(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

Eigen::Matrix3d rotation_about_z(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Eigen::Matrix3d rotation_from_euler_xyz(const Eigen::Vector3d& radians) {
  return rotation_about_x(radians.x()) * rotation_about_y(radians.y()) *
         rotation_about_z(radians.z());
}

}  // namespace pointreg
