#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointreg/attention.hpp"
#include "pointreg/descriptor.hpp"
#include "pointreg/tape.hpp"

namespace pointreg {

/// Pipeline hyperparameters. The descriptor layer widths derive from d
/// (d/3 and 2d/3), so d must be divisible by 6 and by the head count.
struct ModelConfig {
  int d = 96;
  int layers = 6;
  int heads = 4;
  int k_graph = 16;
  double tau = 1.0;
  double normal_radius = 0.3;  // meters
  int normal_k = 128;
  int sinkhorn_iters = 100;
  double gap_alpha = 0.5;
  double leaky_slope = 0.2;
  double slack_init = 1.0;
  bool scale_full_dim = false;

  void validate() const;
  AttentionSettings attention_settings() const {
    return AttentionSettings{heads, leaky_slope, scale_full_dim};
  }
};

struct TensorSpec {
  std::string name;
  int rows = 0, cols = 0;
};

/// Canonical tensor layout for a configuration; ordering is shared by
/// initialization, binding, the optimizer and the checkpoint format.
std::vector<TensorSpec> model_schema(const ModelConfig& cfg);

/// All learnable tensors plus matching gradient buffers.
struct ModelParams {
  ModelConfig cfg;
  std::vector<std::string> names;
  std::vector<Matrix> values;
  std::vector<Matrix> grads;

  std::size_t tensor_count() const { return values.size(); }
  int find(const std::string& name) const;
  void zero_grad();
};

/// Glorot-uniform weights, zero biases, slack at cfg.slack_init.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Plain-text header (config + tensor shapes) followed by raw row-major
/// little-endian doubles. Round-trips bitwise.
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

/// Per-tape view of the parameters, leaves in canonical order.
struct BoundModel {
  BoundDescriptor descriptor;
  Var w_e;
  std::vector<BoundSelfAttention> self_layers;
  std::vector<BoundCrossAttention> cross_layers;
  Var slack;
  std::vector<Var> tensors;  // aligned with ModelParams
};

BoundModel bind_model(Tape& t, const ModelParams& params);

/// Adds the tape gradients of the bound leaves into params.grads.
void accumulate_grads(const Tape& t, const BoundModel& bound, ModelParams& params);

}  // namespace pointreg
