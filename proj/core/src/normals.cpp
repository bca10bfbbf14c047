#include "pointreg/normals.hpp"

#include <cmath>

#include "pointreg/error.hpp"
#include "pointreg/parallel.hpp"

namespace pointreg {

NormalField estimate_normals(const PointCloud& cloud, double radius, int k_nn) {
  if (cloud.size() < 3) throw ConfigError("estimate_normals: need at least 3 points");
  if (!(radius > 0.0)) throw ConfigError("estimate_normals: radius must be positive");
  if (k_nn < 1) throw ConfigError("estimate_normals: k_nn must be >= 1");

  const std::size_t n = cloud.size();
  NormalField field;
  field.vectors.assign(n, Eigen::Vector3d::UnitZ());
  field.degenerate.assign(n, 0);
  field.sign_margin.assign(n, 0.0);

  parallel_for(0, n, [&](std::size_t i) {
    const auto nbrs = radius_neighbors(cloud, static_cast<int>(i), radius, k_nn);
    if (nbrs.size() < 3) {
      field.degenerate[i] = 1;
      return;
    }
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j : nbrs) mean += cloud.points[static_cast<std::size_t>(j)];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int j : nbrs) {
      const Eigen::Vector3d d = cloud.points[static_cast<std::size_t>(j)] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nbrs.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    if (!(evals(2) > 0.0) || evals(1) <= 1e-9 * evals(2)) {
      // collinear or fully degenerate neighborhood
      field.degenerate[i] = 1;
      return;
    }
    Eigen::Vector3d normal = eig.eigenvectors().col(0);
    // Orient toward the denser side: sum_j n . (x_i - x_j) >= 0, and the sum
    // equals |S| * (x_i - mean).
    const Eigen::Vector3d toward =
        static_cast<double>(nbrs.size()) * (cloud.points[i] - mean);
    const double s = normal.dot(toward);
    if (s < 0.0) normal = -normal;
    field.vectors[i] = normal;
    field.sign_margin[i] = std::abs(s);
  });
  return field;
}

double normal_angle(const Eigen::Vector3d& zi, const Eigen::Vector3d& zj) {
  const double c = std::clamp(zi.dot(zj), -1.0, 1.0);
  return std::acos(c);
}

Eigen::VectorXd angle_embedding(double angle, int d, double tau) {
  if (d < 2 || d % 2 != 0) throw ConfigError("angle_embedding: d must be a positive even int");
  if (!(tau > 0.0)) throw ConfigError("angle_embedding: tau must be positive");
  Eigen::VectorXd g(d);
  for (int ind = 0; ind < d / 2; ++ind) {
    const double denom = tau * std::pow(10000.0, 2.0 * ind / static_cast<double>(d));
    const double arg = angle / denom;
    g(2 * ind) = std::sin(arg);
    g(2 * ind + 1) = std::cos(arg);
  }
  return g;
}

Matrix pair_angles(const NormalField& normals) {
  const Eigen::Index n = static_cast<Eigen::Index>(normals.size());
  Matrix angles(n, n);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      angles(static_cast<Eigen::Index>(i), j) =
          normal_angle(normals.vectors[i], normals.vectors[static_cast<std::size_t>(j)]);
    }
  });
  return angles;
}

Matrix angle_embedding_table(const Matrix& angles, int d, double tau) {
  if (angles.rows() != angles.cols()) throw ConfigError("angle_embedding_table: square input expected");
  if (d < 2 || d % 2 != 0) throw ConfigError("angle_embedding_table: d must be a positive even int");
  if (!(tau > 0.0)) throw ConfigError("angle_embedding_table: tau must be positive");
  const Eigen::Index n = angles.rows();
  Eigen::VectorXd inv_denom(d / 2);
  for (int ind = 0; ind < d / 2; ++ind) {
    inv_denom(ind) = 1.0 / (tau * std::pow(10000.0, 2.0 * ind / static_cast<double>(d)));
  }
  Matrix table(n * n, d);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = angles(static_cast<Eigen::Index>(i), j);
      const Eigen::Index row = static_cast<Eigen::Index>(i) * n + j;
      for (int ind = 0; ind < d / 2; ++ind) {
        const double arg = a * inv_denom(ind);
        table(row, 2 * ind) = std::sin(arg);
        table(row, 2 * ind + 1) = std::cos(arg);
      }
    }
  });
  return table;
}

Var embed_pairs(Tape& t, const Matrix& g_table, Var w_e) {
  const Matrix& w = t.value(w_e);
  if (w.rows() != w.cols() || w.rows() != g_table.cols()) {
    throw ConfigError("embed_pairs: w_e must be d x d with d matching the embedding width");
  }
  Var g = t.constant(g_table);
  return matmul(t, g, w_e);
}

}  // namespace pointreg
