#pragma once

#include <vector>

#include "pointreg/geometry.hpp"
#include "pointreg/layers.hpp"
#include "pointreg/tape.hpp"

namespace pointreg {

/// k-NN graph in the current feature space, one flat list of k neighbor
/// indices per row of `features` (self excluded, ties broken by index).
/// Throws ConfigError unless 1 <= k_graph < rows.
std::vector<int> build_feature_graph(const Matrix& features, int k_graph);

/// One EdgeConv: out_i = max over neighbors j of mlp([f_i, f_j - f_i]),
/// where the max is elementwise and gradients follow the argmax entry.
Var edge_conv(Tape& t, Var features, const std::vector<int>& graph, int k,
              const BoundMlp& mlp, double slope);

struct BoundDescriptor {
  BoundMlp edge1, edge2;
  Var fuse_w, fuse_b;
};

/// Two EdgeConv layers with a dynamic graph rebuild in between (first graph
/// from raw coordinates, second from layer-one features), fused by a
/// pointwise layer to width d. k_graph is clamped to n-1 on small clouds.
Var dgcnn_forward(Tape& t, const Matrix& coords, const BoundDescriptor& desc,
                  int k_graph, double slope);

/// N x 3 coordinate matrix of a cloud.
Matrix cloud_to_matrix(const PointCloud& cloud);

}  // namespace pointreg
