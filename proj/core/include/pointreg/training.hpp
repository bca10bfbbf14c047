#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pointreg/datagen.hpp"
#include "pointreg/matching.hpp"
#include "pointreg/model.hpp"
#include "pointreg/pipeline.hpp"

namespace pointreg {

struct ForwardOutputs {
  Var loss;
  PipelineVars vars;
};

/// Full pipeline to the margin loss. Normals and graph construction act as
/// constants; gradients reach every bound tensor.
ForwardOutputs forward_loss(Tape& t, const BoundModel& bound, const ModelConfig& cfg,
                            const PointCloud& x, const PointCloud& y,
                            const GroundTruthMatches& gt,
                            bool use_normal_bias = true);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m, v;
  long step = 0;

  static AdamState init(const ModelParams& params);
};

/// One Adam update from params.grads with bias correction. Throws
/// NumericError (naming the tensor) and leaves params untouched if any
/// gradient is non-finite. Gradients are not cleared here.
void adam_step(ModelParams& params, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
  AdamConfig adam;
  int epochs = 30;
  int grad_accum = 1;         // pairs per optimizer step
  double val_fraction = 0.2;  // taken from the end of the pair list
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // written every epoch when non-empty
  std::string log_path;         // line-delimited epoch records when non-empty

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  MatchingMetrics val_metrics;
};

std::string format_epoch_record(const EpochStats& s);

/// Epoch loop over shuffled training pairs with a held-out validation
/// split. Returns per-epoch statistics; optionally streams progress lines.
std::vector<EpochStats> train(const std::vector<LoadedPair>& pairs,
                              ModelParams& params, const TrainConfig& cfg,
                              std::ostream* progress = nullptr);

}  // namespace pointreg
