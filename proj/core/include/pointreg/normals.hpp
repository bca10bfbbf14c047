#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pointreg/geometry.hpp"
#include "pointreg/tape.hpp"

namespace pointreg {

/// One unit normal per point. Sign is fixed so the normal points toward the
/// denser side of the local neighborhood: sum over neighbors of
/// z_i . (x_i - x_j) >= 0. Points whose neighborhood was too small or
/// collinear fall back to +z and are flagged.
///
/// sign_margin holds |sum z . (x_i - x_j)| per point; it is exactly zero on
/// perfectly planar neighborhoods (three points, or a flat patch), where the
/// orientation is a tie that the >= 0 branch resolves arbitrarily.
struct NormalField {
  std::vector<Eigen::Vector3d> vectors;
  std::vector<uint8_t> degenerate;
  std::vector<double> sign_margin;

  std::size_t size() const { return vectors.size(); }
};

/// PCA normals over radius neighborhoods (at most k_nn points each). The
/// normal is the eigenvector of the neighborhood covariance with the
/// smallest eigenvalue.
NormalField estimate_normals(const PointCloud& cloud, double radius, int k_nn);

/// Angle between two unit vectors in [0, pi].
double normal_angle(const Eigen::Vector3d& zi, const Eigen::Vector3d& zj);

/// Sinusoidal multi-frequency encoding of an angle: component 2k is
/// sin(angle / (tau * 10000^(2k/d))), component 2k+1 the matching cos.
Eigen::VectorXd angle_embedding(double angle, int d, double tau);

/// N x N matrix of pairwise normal angles (radians).
Matrix pair_angles(const NormalField& normals);

/// (N*N) x d table of angle embeddings, row i*N+j for the ordered pair
/// (i, j). This is the constant input to the learned pair projection.
Matrix angle_embedding_table(const Matrix& angles, int d, double tau);

/// e = g_table * w_e, differentiable in w_e. Throws ConfigError if w_e is
/// not square with rows matching the embedding width.
Var embed_pairs(Tape& t, const Matrix& g_table, Var w_e);

}  // namespace pointreg
