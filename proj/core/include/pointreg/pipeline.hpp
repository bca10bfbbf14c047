#pragma once

#include "pointreg/geometry.hpp"
#include "pointreg/matching.hpp"
#include "pointreg/model.hpp"
#include "pointreg/tape.hpp"

namespace pointreg {

struct PipelineVars {
  Var hx, hy;   // final encodings
  Var scores;   // M x N
  Var cbar;     // (M+1) x (N+1) soft assignment
};

/// Full matching forward pass on a tape: PCA normals and pair-angle
/// embeddings (constants), DGCNN features, the attention stack, the score
/// matrix and the soft assignment. With use_normal_bias false the additive
/// normal-angle bias is dropped from every self-attention layer.
PipelineVars run_pipeline(Tape& t, const BoundModel& bound, const ModelConfig& cfg,
                          const PointCloud& x, const PointCloud& y,
                          bool use_normal_bias = true);

struct MatchPrediction {
  Matrix cbar;
  Eigen::MatrixXi assignment;
  CorrespondenceSet correspondences;
};

/// No-grad forward pass to a hard assignment with soft-probability scores.
MatchPrediction predict_matches(const ModelParams& params, const PointCloud& x,
                                const PointCloud& y, bool use_normal_bias = true);

}  // namespace pointreg
