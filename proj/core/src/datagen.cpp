#include "pointreg/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pointreg/error.hpp"
#include "pointreg/io.hpp"
#include "pointreg/rng.hpp"

namespace pointreg {

ShapeKind shape_from_name(const std::string& name) {
  if (name == "plane") return ShapeKind::kPlane;
  if (name == "sphere") return ShapeKind::kSphere;
  if (name == "torus") return ShapeKind::kTorus;
  if (name == "box") return ShapeKind::kBox;
  if (name == "composite") return ShapeKind::kComposite;
  throw ConfigError("unknown shape '" + name + "'");
}

std::string shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kPlane: return "plane";
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kTorus: return "torus";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kComposite: return "composite";
  }
  return "?";
}

namespace {

Eigen::Vector3d sample_plane(Rng& rng) {
  return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0};
}

Eigen::Vector3d sample_sphere(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * kPi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Eigen::Vector3d sample_torus(Rng& rng) {
  const double big = 0.7, small = 0.3;
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  const double phi = rng.uniform(0.0, 2.0 * kPi);
  const double ring = big + small * std::cos(phi);
  return {ring * std::cos(theta), ring * std::sin(theta), small * std::sin(phi)};
}

Eigen::Vector3d sample_box(Rng& rng) {
  const int face = rng.uniform_int(0, 5);
  const double a = rng.uniform(-1.0, 1.0);
  const double b = rng.uniform(-1.0, 1.0);
  const double s = face % 2 == 0 ? 1.0 : -1.0;
  switch (face / 2) {
    case 0: return {s, a, b};
    case 1: return {a, s, b};
    default: return {a, b, s};
  }
}

}  // namespace

PointCloud synth_shape(ShapeKind kind, int n, std::uint64_t seed) {
  if (n < 8) throw ConfigError("synth_shape: need at least 8 points");
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(n));
  switch (kind) {
    case ShapeKind::kPlane:
      for (int i = 0; i < n; ++i) cloud.points.push_back(sample_plane(rng));
      break;
    case ShapeKind::kSphere:
      for (int i = 0; i < n; ++i) cloud.points.push_back(sample_sphere(rng));
      break;
    case ShapeKind::kTorus:
      for (int i = 0; i < n; ++i) cloud.points.push_back(sample_torus(rng));
      break;
    case ShapeKind::kBox:
      for (int i = 0; i < n; ++i) cloud.points.push_back(sample_box(rng));
      break;
    case ShapeKind::kComposite: {
      // Box and torus at fixed offsets; together they pin down orientation.
      const int half = n / 2;
      const Eigen::Vector3d box_center(-0.55, 0.1, 0.0);
      const Eigen::Vector3d torus_center(0.5, -0.15, 0.2);
      for (int i = 0; i < half; ++i) {
        cloud.points.push_back(box_center + 0.45 * sample_box(rng));
      }
      for (int i = half; i < n; ++i) {
        cloud.points.push_back(torus_center + 0.5 * sample_torus(rng));
      }
      break;
    }
  }
  return cloud;
}

void PairSpec::validate() const {
  if (n_points < 4) throw ConfigError("pair spec: n_points must be >= 4");
  if (rot_range_deg[0] > rot_range_deg[1]) throw ConfigError("pair spec: bad rotation range");
  if (trans_range_m[0] > trans_range_m[1]) throw ConfigError("pair spec: bad translation range");
  if (crop_keep) {
    if (*crop_keep < 4) throw ConfigError("pair spec: crop_keep must be >= 4");
    if (*crop_keep > n_points) throw ConfigError("pair spec: crop_keep must be <= n_points");
  }
  if (noise) {
    if (noise->sigma < 0.0) throw ConfigError("pair spec: noise sigma must be >= 0");
    if (noise->clip < 0.0) throw ConfigError("pair spec: noise clip must be >= 0");
  }
}

namespace {

// Keeps the `keep` points nearest to the anchor (anchor included), in their
// original relative order. Returns kept original indices.
std::vector<int> crop_indices(const std::vector<Eigen::Vector3d>& pts, int anchor,
                              int keep) {
  std::vector<std::pair<double, int>> d;
  d.reserve(pts.size());
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    d.emplace_back((pts[static_cast<std::size_t>(i)] -
                    pts[static_cast<std::size_t>(anchor)]).squaredNorm(),
                   i);
  }
  std::sort(d.begin(), d.end());
  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(keep));
  for (int r = 0; r < keep; ++r) kept.push_back(d[static_cast<std::size_t>(r)].second);
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

RegistrationPair make_pair(const PointCloud& source, const PairSpec& spec) {
  spec.validate();
  if (static_cast<int>(source.size()) < spec.n_points) {
    throw ConfigError("make_pair: source cloud smaller than n_points");
  }
  Rng rng(spec.seed);

  // Subsample without replacement.
  std::vector<int> idx(source.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(spec.n_points));

  std::vector<Eigen::Vector3d> base;
  base.reserve(idx.size());
  for (int i : idx) base.push_back(source.points[static_cast<std::size_t>(i)]);

  // Center and scale into the unit sphere.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : base) centroid += p;
  centroid /= static_cast<double>(base.size());
  double max_norm = 0.0;
  for (auto& p : base) {
    p -= centroid;
    max_norm = std::max(max_norm, p.norm());
  }
  if (!(max_norm > 0.0)) throw ConfigError("make_pair: degenerate source cloud");
  for (auto& p : base) p /= max_norm;

  // Ground-truth transform: per-axis Euler angles and translations, uniform
  // within their ranges.
  const double deg = kPi / 180.0;
  Eigen::Vector3d angles;
  for (int a = 0; a < 3; ++a) {
    angles(a) = rng.uniform(spec.rot_range_deg[0], spec.rot_range_deg[1]) * deg;
  }
  RigidTransform t_gt;
  t_gt.rotation = rotation_from_euler_xyz(angles);
  for (int a = 0; a < 3; ++a) {
    t_gt.translation(a) = rng.uniform(spec.trans_range_m[0], spec.trans_range_m[1]);
  }

  // Y is a permutation of the transformed points: y[perm[i]] = T(x[i]).
  const int n = spec.n_points;
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  std::vector<Eigen::Vector3d> xs = base;
  std::vector<Eigen::Vector3d> ys(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ys[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        t_gt.rotation * base[static_cast<std::size_t>(i)] + t_gt.translation;
  }
  std::vector<int> x_to_y(perm.begin(), perm.end());

  // Independent anchor crops.
  if (spec.crop_keep) {
    const int keep = *spec.crop_keep;
    const int anchor_x = rng.uniform_int(0, n - 1);
    const std::vector<int> keep_x = crop_indices(xs, anchor_x, keep);
    const int anchor_y = rng.uniform_int(0, n - 1);
    const std::vector<int> keep_y = crop_indices(ys, anchor_y, keep);

    std::vector<int> new_y_index(static_cast<std::size_t>(n), -1);
    for (int r = 0; r < keep; ++r) new_y_index[static_cast<std::size_t>(keep_y[static_cast<std::size_t>(r)])] = r;

    std::vector<Eigen::Vector3d> cx, cy;
    std::vector<int> cmap;
    cx.reserve(static_cast<std::size_t>(keep));
    cy.reserve(static_cast<std::size_t>(keep));
    for (int r = 0; r < keep; ++r) cy.push_back(ys[static_cast<std::size_t>(keep_y[static_cast<std::size_t>(r)])]);
    for (int r = 0; r < keep; ++r) {
      const int old_i = keep_x[static_cast<std::size_t>(r)];
      cx.push_back(xs[static_cast<std::size_t>(old_i)]);
      cmap.push_back(new_y_index[static_cast<std::size_t>(x_to_y[static_cast<std::size_t>(old_i)])]);
    }
    xs = std::move(cx);
    ys = std::move(cy);
    x_to_y = std::move(cmap);
  }

  // Clipped Gaussian noise on both clouds, X first, coordinates in order.
  if (spec.noise && spec.noise->sigma > 0.0) {
    const double clip = spec.noise->clip;
    auto perturb = [&](std::vector<Eigen::Vector3d>& pts) {
      for (auto& p : pts) {
        for (int c = 0; c < 3; ++c) {
          p(c) += std::clamp(spec.noise->sigma * rng.normal(), -clip, clip);
        }
      }
    };
    perturb(xs);
    perturb(ys);
  }

  RegistrationPair pair;
  pair.x.points = std::move(xs);
  pair.y.points = std::move(ys);
  pair.t_gt = t_gt;
  pair.gt = GroundTruthMatches::from_forward_map(x_to_y, static_cast<int>(pair.y.size()));
  return pair;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (const auto& rec : records) {
    out << rec.x_path << ' ' << rec.y_path;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << rec.t_gt.rotation(r, c);
    }
    for (int c = 0; c < 3; ++c) out << ' ' << rec.t_gt.translation(c);
    out << ' ' << rec.src_to_tgt.size();
    for (int m : rec.src_to_tgt) out << ' ' << m;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestRecord rec;
    std::size_t count = 0;
    if (!(ss >> rec.x_path >> rec.y_path)) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed record");
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (!(ss >> rec.t_gt.rotation(r, c))) {
          throw IoError(path + ":" + std::to_string(lineno) + ": malformed rotation");
        }
      }
    }
    for (int c = 0; c < 3; ++c) {
      if (!(ss >> rec.t_gt.translation(c))) {
        throw IoError(path + ":" + std::to_string(lineno) + ": malformed translation");
      }
    }
    if (!(ss >> count)) {
      throw IoError(path + ":" + std::to_string(lineno) + ": missing match count");
    }
    rec.src_to_tgt.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!(ss >> rec.src_to_tgt[i])) {
        throw IoError(path + ":" + std::to_string(lineno) + ": truncated match list");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

LoadedPair load_pair(const ManifestRecord& record, const std::string& manifest_path,
                     double gt_threshold) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  LoadedPair pair;
  pair.x = read_cloud(resolve(record.x_path));
  pair.y = read_cloud(resolve(record.y_path));
  pair.t_gt = record.t_gt;
  if (record.src_to_tgt.empty()) {
    pair.gt = gt_correspondences(pair.x, pair.y, pair.t_gt, gt_threshold);
  } else {
    if (record.src_to_tgt.size() != pair.x.size()) {
      throw IoError("manifest match list does not match " + record.x_path);
    }
    pair.gt = GroundTruthMatches::from_forward_map(record.src_to_tgt,
                                                   static_cast<int>(pair.y.size()));
  }
  return pair;
}

std::vector<LoadedPair> load_pairs(const std::string& manifest_path,
                                   double gt_threshold) {
  const auto records = read_manifest(manifest_path);
  std::vector<LoadedPair> pairs;
  pairs.reserve(records.size());
  for (const auto& rec : records) {
    pairs.push_back(load_pair(rec, manifest_path, gt_threshold));
  }
  return pairs;
}

}  // namespace pointreg
