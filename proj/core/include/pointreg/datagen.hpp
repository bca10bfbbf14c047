#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pointreg/geometry.hpp"
#include "pointreg/matching.hpp"

namespace pointreg {

enum class ShapeKind { kPlane, kSphere, kTorus, kBox, kComposite };

ShapeKind shape_from_name(const std::string& name);
std::string shape_name(ShapeKind kind);

/// Deterministic surface sampling of a parametric primitive. The composite
/// concatenates a box and a torus at fixed offsets so the result has no
/// global symmetry.
PointCloud synth_shape(ShapeKind kind, int n, std::uint64_t seed);

struct NoiseSpec {
  double sigma = 0.1;  // meters, std of the per-coordinate Gaussian
  double clip = 0.05;  // meters, hard bound on each perturbation
};

struct PairSpec {
  int n_points = 1024;
  std::array<double, 2> rot_range_deg{0.0, 45.0};   // per axis
  std::array<double, 2> trans_range_m{0.0, 0.5};    // per axis
  std::optional<int> crop_keep;                     // nearest neighbors kept per cloud
  std::optional<NoiseSpec> noise;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RegistrationPair {
  PointCloud x, y;
  RigidTransform t_gt;
  GroundTruthMatches gt;  // exact construction bookkeeping, noise or not
};

/// Builds a registration pair from a source cloud: subsample to n_points,
/// center and scale into the unit sphere, apply a random rigid transform and
/// permutation, then optionally crop each cloud around an independent random
/// anchor and add clipped Gaussian noise to both clouds.
RegistrationPair make_pair(const PointCloud& source, const PairSpec& spec);

/// One dataset record: cloud file paths (relative to the manifest) plus the
/// ground-truth transform and match list. An empty match list means the
/// matches were not recorded and are derived at load time from t_gt by the
/// mutual-nearest-under-threshold rule.
struct ManifestRecord {
  std::string x_path, y_path;
  RigidTransform t_gt;
  std::vector<int> src_to_tgt;  // -1 for unmatched
};

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::string& path);

struct LoadedPair {
  PointCloud x, y;
  RigidTransform t_gt;
  GroundTruthMatches gt;
};

/// Resolves the record's cloud paths against the manifest's directory.
/// gt_threshold only matters for records without a recorded match list.
LoadedPair load_pair(const ManifestRecord& record, const std::string& manifest_path,
                     double gt_threshold = 0.05);
std::vector<LoadedPair> load_pairs(const std::string& manifest_path,
                                   double gt_threshold = 0.05);

}  // namespace pointreg
