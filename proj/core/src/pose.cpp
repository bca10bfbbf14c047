#include "pointreg/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pointreg/error.hpp"

namespace pointreg {

RigidTransform kabsch(const std::vector<Eigen::Vector3d>& src,
                      const std::vector<Eigen::Vector3d>& dst,
                      const std::vector<double>* weights) {
  const std::size_t n = src.size();
  if (n != dst.size()) throw ConfigError("kabsch: point count mismatch");
  if (n < 3) throw ConfigError("kabsch: need at least 3 pairs");

  double wsum = 0.0;
  if (weights) {
    if (weights->size() != n) throw ConfigError("kabsch: weight count mismatch");
    for (double w : *weights) {
      if (w < 0.0) throw ConfigError("kabsch: weights must be nonnegative");
      wsum += w;
    }
    if (!(wsum > 0.0)) throw ConfigError("kabsch: weights must not all be zero");
  } else {
    wsum = static_cast<double>(n);
  }

  Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const double w = weights ? (*weights)[k] : 1.0;
    cs += w * src[k];
    cd += w * dst[k];
  }
  cs /= wsum;
  cd /= wsum;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const double w = weights ? (*weights)[k] : 1.0;
    h += w * (src[k] - cs) * (dst[k] - cd).transpose();
  }
  h /= wsum;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  if (!(sigma(0) > 0.0) || sigma(1) <= 1e-12 * sigma(0)) {
    throw NumericError("kabsch: degenerate (collinear or coincident) point pairs");
  }

  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidTransform t;
  t.rotation = v * d * u.transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

namespace {

double mean_inlier_residual(const std::vector<Eigen::Vector3d>& sx,
                            const std::vector<Eigen::Vector3d>& sy,
                            const RigidTransform& t, double thr, int* inliers) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < sx.size(); ++k) {
    const double r = (t.rotation * sx[k] + t.translation - sy[k]).norm();
    if (r < thr) {
      sum += r;
      ++count;
    }
  }
  *inliers = count;
  return count > 0 ? sum / count : std::numeric_limits<double>::infinity();
}

}  // namespace

RansacResult ransac_register(const CorrespondenceSet& corr, const PointCloud& x,
                             const PointCloud& y, const RansacConfig& cfg) {
  const int total = static_cast<int>(corr.pairs.size());
  if (cfg.sample_size < 3) throw ConfigError("ransac: sample_size must be >= 3");
  if (cfg.k_c < cfg.sample_size) throw ConfigError("ransac: k_c must be >= sample_size");
  if (cfg.max_iters < 1) throw ConfigError("ransac: max_iters must be >= 1");
  if (total < cfg.sample_size) {
    throw NumericError("ransac: fewer correspondences than sample_size");
  }
  if (!corr.scores.empty() && corr.scores.size() != corr.pairs.size()) {
    throw ConfigError("ransac: score count mismatch");
  }

  // Keep the k_c highest-scored correspondences (stable on ties).
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  if (!corr.scores.empty()) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return corr.scores[static_cast<std::size_t>(a)] > corr.scores[static_cast<std::size_t>(b)];
    });
  }
  const int kept = std::min(cfg.k_c, total);
  order.resize(static_cast<std::size_t>(kept));

  std::vector<Eigen::Vector3d> sx, sy;
  sx.reserve(static_cast<std::size_t>(kept));
  sy.reserve(static_cast<std::size_t>(kept));
  for (int idx : order) {
    const auto& [i, j] = corr.pairs[static_cast<std::size_t>(idx)];
    sx.push_back(x.points.at(static_cast<std::size_t>(i)));
    sy.push_back(y.points.at(static_cast<std::size_t>(j)));
  }

  std::mt19937_64 rng(cfg.seed);
  auto draw = [&](int bound) {
    // rejection sampling keeps the draw unbiased and portable
    const std::uint64_t span = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    return static_cast<int>(r % span);
  };

  RigidTransform best;
  bool have_model = false;
  int best_inliers = -1;
  double best_residual = std::numeric_limits<double>::infinity();
  int rounds = 0;

  std::vector<Eigen::Vector3d> ss(static_cast<std::size_t>(cfg.sample_size));
  std::vector<Eigen::Vector3d> sd(static_cast<std::size_t>(cfg.sample_size));
  std::vector<int> picked(static_cast<std::size_t>(cfg.sample_size));
  for (int it = 0; it < cfg.max_iters; ++it) {
    ++rounds;
    for (int s = 0; s < cfg.sample_size; ++s) {
      int cand;
      bool dup;
      do {
        cand = draw(kept);
        dup = false;
        for (int p = 0; p < s; ++p) dup = dup || picked[static_cast<std::size_t>(p)] == cand;
      } while (dup);
      picked[static_cast<std::size_t>(s)] = cand;
      ss[static_cast<std::size_t>(s)] = sx[static_cast<std::size_t>(cand)];
      sd[static_cast<std::size_t>(s)] = sy[static_cast<std::size_t>(cand)];
    }
    RigidTransform model;
    try {
      model = kabsch(ss, sd);
    } catch (const NumericError&) {
      continue;  // degenerate sample
    }
    int inliers = 0;
    const double res = mean_inlier_residual(sx, sy, model, cfg.inlier_threshold, &inliers);
    if (inliers > best_inliers || (inliers == best_inliers && res < best_residual)) {
      best = model;
      best_inliers = inliers;
      best_residual = res;
      have_model = true;
    }
    if (best_inliers == kept) break;  // cannot improve
  }
  if (!have_model) {
    throw NumericError("ransac: every sampled hypothesis was degenerate");
  }

  // Polish: refit on the inliers of the best model.
  std::vector<Eigen::Vector3d> is, id;
  for (std::size_t k = 0; k < sx.size(); ++k) {
    if ((best.rotation * sx[k] + best.translation - sy[k]).norm() < cfg.inlier_threshold) {
      is.push_back(sx[k]);
      id.push_back(sy[k]);
    }
  }
  if (static_cast<int>(is.size()) >= cfg.sample_size) {
    try {
      best = kabsch(is, id);
    } catch (const NumericError&) {
      // keep the sample model if the refit is degenerate
    }
  }

  RansacResult result;
  result.transform = best;
  result.iterations = rounds;
  result.inlier_mask.assign(corr.pairs.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double r = (best.rotation * sx[k] + best.translation - sy[k]).norm();
    if (r < cfg.inlier_threshold) {
      result.inlier_mask[static_cast<std::size_t>(order[k])] = 1;
      ++result.inlier_count;
    }
  }
  return result;
}

IcpResult icp(const PointCloud& x, const PointCloud& y, int max_iters, double tol) {
  if (x.size() == 0 || y.size() == 0) throw ConfigError("icp: empty cloud");
  if (max_iters < 1) throw ConfigError("icp: max_iters must be >= 1");

  IcpResult result;
  std::vector<Eigen::Vector3d> moved(x.points);
  std::vector<Eigen::Vector3d> matched(x.size());
  for (int it = 0; it < max_iters; ++it) {
    result.iterations = it + 1;
    double mse = 0.0;
    for (std::size_t i = 0; i < moved.size(); ++i) {
      int best = 0;
      double best_d = (y.points[0] - moved[i]).squaredNorm();
      for (std::size_t j = 1; j < y.points.size(); ++j) {
        const double d = (y.points[j] - moved[i]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(j);
        }
      }
      matched[i] = y.points[static_cast<std::size_t>(best)];
      mse += best_d;
    }
    result.mse_history.push_back(mse / static_cast<double>(moved.size()));

    RigidTransform correction;
    try {
      correction = kabsch(moved, matched);
    } catch (const NumericError&) {
      break;  // degenerate matching; keep the current estimate
    }
    result.transform = compose(correction, result.transform);
    for (auto& p : moved) p = correction.rotation * p + correction.translation;

    const double delta = (correction.rotation - Eigen::Matrix3d::Identity()).norm() +
                         correction.translation.norm();
    if (delta < tol) break;
  }
  return result;
}

}  // namespace pointreg
