#include "pointreg/descriptor.hpp"

#include <algorithm>

#include "pointreg/error.hpp"
#include "pointreg/parallel.hpp"

namespace pointreg {

std::vector<int> build_feature_graph(const Matrix& features, int k_graph) {
  const Eigen::Index n = features.rows();
  if (k_graph < 1 || k_graph >= n) {
    throw ConfigError("build_feature_graph: need 1 <= k_graph < point count");
  }
  std::vector<int> graph(static_cast<std::size_t>(n) * static_cast<std::size_t>(k_graph));
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    std::vector<std::pair<double, int>> d;
    d.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == static_cast<Eigen::Index>(i)) continue;
      d.emplace_back((features.row(j) - features.row(static_cast<Eigen::Index>(i))).squaredNorm(),
                     static_cast<int>(j));
    }
    std::partial_sort(d.begin(), d.begin() + k_graph, d.end());
    for (int m = 0; m < k_graph; ++m) {
      graph[i * static_cast<std::size_t>(k_graph) + static_cast<std::size_t>(m)] =
          d[static_cast<std::size_t>(m)].second;
    }
  });
  return graph;
}

Var edge_conv(Tape& t, Var features, const std::vector<int>& graph, int k,
              const BoundMlp& mlp, double slope) {
  Var edges = edge_features(t, features, graph, k);
  Var mapped = mlp_forward(t, mlp, edges, slope, /*activate_output=*/true);
  return group_max(t, mapped, k);
}

Var dgcnn_forward(Tape& t, const Matrix& coords, const BoundDescriptor& desc,
                  int k_graph, double slope) {
  const Eigen::Index n = coords.rows();
  if (n < 2) throw ConfigError("dgcnn_forward: need at least 2 points");
  const int k = std::min<int>(k_graph, static_cast<int>(n) - 1);

  Var f0 = t.constant(coords);
  const auto graph1 = build_feature_graph(coords, k);
  Var f1 = edge_conv(t, f0, graph1, k, desc.edge1, slope);

  const auto graph2 = build_feature_graph(t.value(f1), k);
  Var f2 = edge_conv(t, f1, graph2, k, desc.edge2, slope);

  Var fused = concat_cols(t, f1, f2);
  return leaky_relu(t, add_rowvec(t, matmul(t, fused, desc.fuse_w), desc.fuse_b), slope);
}

Matrix cloud_to_matrix(const PointCloud& cloud) {
  Matrix m(static_cast<Eigen::Index>(cloud.size()), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = cloud.points[i].transpose();
  }
  return m;
}

}  // namespace pointreg
