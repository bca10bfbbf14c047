#include "pointreg/evaluate.hpp"

#include <cmath>

#include "pointreg/error.hpp"
#include "pointreg/pipeline.hpp"

namespace pointreg {

PoseEstimator estimator_from_name(const std::string& name) {
  if (name == "ransac") return PoseEstimator::kRansac;
  if (name == "svd") return PoseEstimator::kSvd;
  if (name == "icp") return PoseEstimator::kIcp;
  throw ConfigError("unknown estimator '" + name + "'");
}

namespace {

CorrespondenceSet oracle_correspondences(const GroundTruthMatches& gt) {
  CorrespondenceSet corr;
  for (int i = 0; i < gt.source_size(); ++i) {
    const int j = gt.src_to_tgt[static_cast<std::size_t>(i)];
    if (j != GroundTruthMatches::kUnmatched) {
      corr.pairs.emplace_back(i, j);
      corr.scores.push_back(1.0);
    }
  }
  return corr;
}

}  // namespace

PairEval evaluate_pair(const ModelParams* params, const LoadedPair& pair,
                       const EvalOptions& options) {
  PairEval out;

  CorrespondenceSet corr;
  if (options.oracle_matches) {
    corr = oracle_correspondences(pair.gt);
    Eigen::MatrixXi oracle = Eigen::MatrixXi::Zero(pair.gt.source_size(),
                                                   pair.gt.target_size());
    for (const auto& [i, j] : corr.pairs) oracle(i, j) = 1;
    out.counts = count_matches(oracle, pair.gt);
  } else if (options.estimator != PoseEstimator::kIcp) {
    if (!params) throw ConfigError("evaluate_pair: model required without --oracle-matches");
    const MatchPrediction pred =
        predict_matches(*params, pair.x, pair.y, options.normal_bias);
    corr = pred.correspondences;
    out.counts = count_matches(pred.assignment, pair.gt);
  } else {
    // The ICP arm ignores correspondences entirely; score matching metrics
    // from the model only when one was supplied.
    if (params) {
      const MatchPrediction pred =
          predict_matches(*params, pair.x, pair.y, options.normal_bias);
      out.counts = count_matches(pred.assignment, pair.gt);
    } else {
      out.counts.source_points = pair.gt.source_size();
      out.counts.gt_matched = pair.gt.matched_count();
    }
  }
  out.match_count = static_cast<int>(corr.pairs.size());

  try {
    switch (options.estimator) {
      case PoseEstimator::kRansac: {
        RansacResult res = ransac_register(corr, pair.x, pair.y, options.ransac);
        out.estimate = res.transform;
        out.inlier_count = res.inlier_count;
        break;
      }
      case PoseEstimator::kSvd: {
        std::vector<Eigen::Vector3d> src, dst;
        src.reserve(corr.pairs.size());
        dst.reserve(corr.pairs.size());
        for (const auto& [i, j] : corr.pairs) {
          src.push_back(pair.x.points.at(static_cast<std::size_t>(i)));
          dst.push_back(pair.y.points.at(static_cast<std::size_t>(j)));
        }
        out.estimate = kabsch(src, dst);
        out.inlier_count = static_cast<int>(corr.pairs.size());
        break;
      }
      case PoseEstimator::kIcp: {
        IcpResult res = icp(pair.x, pair.y, options.icp_max_iters, options.icp_tol);
        out.estimate = res.transform;
        out.inlier_count = static_cast<int>(pair.x.size());
        break;
      }
    }
    out.pose_valid = true;
  } catch (const Error&) {
    out.pose_valid = false;
  }

  if (out.pose_valid) {
    out.rot_err_deg = rotation_error_deg(out.estimate.rotation, pair.t_gt.rotation);
    out.trans_err_m = translation_error_m(out.estimate.translation, pair.t_gt.translation);
    out.geo_err_deg = rotation_geodesic_deg(out.estimate.rotation, pair.t_gt.rotation);
  }
  return out;
}

EvalSummary summarize(const std::vector<PairEval>& rows) {
  EvalSummary s;
  s.pairs = static_cast<int>(rows.size());
  MatchingCounts counts;
  double sq_r = 0.0, abs_r = 0.0, sq_t = 0.0, abs_t = 0.0;
  double sq_geo = 0.0, abs_geo = 0.0;
  long axes = 0, valid = 0;
  for (const auto& row : rows) {
    counts += row.counts;
    if (!row.pose_valid) {
      ++s.pose_failures;
      continue;
    }
    ++valid;
    for (int a = 0; a < 3; ++a) {
      sq_r += row.rot_err_deg(a) * row.rot_err_deg(a);
      abs_r += row.rot_err_deg(a);
      sq_t += row.trans_err_m(a) * row.trans_err_m(a);
      abs_t += row.trans_err_m(a);
      ++axes;
    }
    sq_geo += row.geo_err_deg * row.geo_err_deg;
    abs_geo += row.geo_err_deg;
  }
  if (axes > 0) {
    s.rmse_r_deg = std::sqrt(sq_r / static_cast<double>(axes));
    s.mae_r_deg = abs_r / static_cast<double>(axes);
    s.rmse_t_m = std::sqrt(sq_t / static_cast<double>(axes));
    s.mae_t_m = abs_t / static_cast<double>(axes);
  }
  if (valid > 0) {
    s.rmse_geo_deg = std::sqrt(sq_geo / static_cast<double>(valid));
    s.mae_geo_deg = abs_geo / static_cast<double>(valid);
  }
  s.matching = metrics_from_counts(counts);
  return s;
}

}  // namespace pointreg
