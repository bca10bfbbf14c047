#include "pointreg/pipeline.hpp"

#include "pointreg/descriptor.hpp"
#include "pointreg/error.hpp"
#include "pointreg/normals.hpp"

namespace pointreg {

PipelineVars run_pipeline(Tape& t, const BoundModel& bound, const ModelConfig& cfg,
                          const PointCloud& x, const PointCloud& y,
                          bool use_normal_bias) {
  if (x.size() < 2 || y.size() < 2) throw ConfigError("pipeline: clouds too small");

  Var ex{}, ey{};
  if (use_normal_bias && cfg.layers > 0) {
    // Pair embeddings are computed once per cloud and shared by all layers.
    const NormalField nx = estimate_normals(x, cfg.normal_radius, cfg.normal_k);
    const NormalField ny = estimate_normals(y, cfg.normal_radius, cfg.normal_k);
    ex = embed_pairs(t, angle_embedding_table(pair_angles(nx), cfg.d, cfg.tau), bound.w_e);
    ey = embed_pairs(t, angle_embedding_table(pair_angles(ny), cfg.d, cfg.tau), bound.w_e);
  }

  Var fx = dgcnn_forward(t, cloud_to_matrix(x), bound.descriptor, cfg.k_graph,
                         cfg.leaky_slope);
  Var fy = dgcnn_forward(t, cloud_to_matrix(y), bound.descriptor, cfg.k_graph,
                         cfg.leaky_slope);

  auto [hx, hy] = transformer_forward(t, fx, fy, ex, ey, bound.self_layers,
                                      bound.cross_layers, cfg.attention_settings());

  PipelineVars out;
  out.hx = hx;
  out.hy = hy;
  out.scores = score_matrix(t, hx, hy);
  out.cbar = sinkhorn(t, out.scores, bound.slack, cfg.sinkhorn_iters);
  return out;
}

MatchPrediction predict_matches(const ModelParams& params, const PointCloud& x,
                                const PointCloud& y, bool use_normal_bias) {
  Tape t(/*grad_enabled=*/false);
  const BoundModel bound = bind_model(t, params);
  const PipelineVars vars = run_pipeline(t, bound, params.cfg, x, y, use_normal_bias);
  MatchPrediction pred;
  pred.cbar = t.value(vars.cbar);
  pred.assignment = hard_assignment(pred.cbar);
  pred.correspondences = correspondences_from_assignment(pred.assignment, pred.cbar);
  return pred;
}

}  // namespace pointreg
