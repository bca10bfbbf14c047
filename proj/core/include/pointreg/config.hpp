#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointreg/datagen.hpp"
#include "pointreg/evaluate.hpp"
#include "pointreg/model.hpp"
#include "pointreg/training.hpp"

namespace pointreg {

/// Union of every tunable knob, layered as defaults < preset < config file
/// < command line. Keys use dotted names ("model.d", "gen.n_points", ...).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  RansacConfig ransac;
  PairSpec pair;
  ShapeKind shape = ShapeKind::kComposite;
  int gen_pairs = 200;
  double gt_threshold = 0.05;  // meters, for oracle correspondence building
  int threads = 0;             // 0 = hardware concurrency
  std::uint64_t seed = 0;

  /// Cross-field validation (head divisibility, crop bounds, ...).
  void validate() const;
};

/// Named bundles: "clean", "partial", "partial-noisy" mirror the synthetic
/// evaluation protocols; "toy" is the desk-scale training setup.
void apply_preset(RunConfig& cfg, const std::string& name);
std::vector<std::string> preset_names();

/// One "key=value" assignment; throws ConfigError on unknown keys or
/// unparseable values.
void apply_assignment(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat key=value file, one per line, '#' comments allowed.
void apply_config_file(RunConfig& cfg, const std::string& path);

}  // namespace pointreg
