#include "pointreg/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pointreg/error.hpp"
#include "pointreg/rng.hpp"

namespace pointreg {

ForwardOutputs forward_loss(Tape& t, const BoundModel& bound, const ModelConfig& cfg,
                            const PointCloud& x, const PointCloud& y,
                            const GroundTruthMatches& gt, bool use_normal_bias) {
  ForwardOutputs out;
  out.vars = run_pipeline(t, bound, cfg, x, y, use_normal_bias);
  out.loss = gap_loss(t, out.vars.cbar, gt, cfg.gap_alpha);
  return out;
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState state;
  state.m.reserve(params.tensor_count());
  state.v.reserve(params.tensor_count());
  for (const auto& value : params.values) {
    state.m.emplace_back(Matrix::Zero(value.rows(), value.cols()));
    state.v.emplace_back(Matrix::Zero(value.rows(), value.cols()));
  }
  return state;
}

void adam_step(ModelParams& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.tensor_count()) {
    throw ConfigError("adam_step: state does not match the parameter set");
  }
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    if (!params.grads[i].allFinite()) {
      throw NumericError("adam_step: non-finite gradient in '" + params.names[i] +
                         "', step rejected");
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    const Matrix& g = params.grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const Matrix m_hat = state.m[i] / bc1;
    const Matrix v_hat = state.v[i] / bc2;
    const Matrix denom =
        v_hat.cwiseSqrt() + Matrix::Constant(g.rows(), g.cols(), cfg.eps);
    params.values[i] -= cfg.lr * m_hat.cwiseQuotient(denom);
  }
}

void TrainConfig::validate() const {
  if (!(adam.lr >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (grad_accum < 1) throw ConfigError("train: grad_accum must be >= 1");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("train: val_fraction must be in [0, 1)");
  }
}

std::string format_epoch_record(const EpochStats& s) {
  auto num = [](std::optional<double> v) {
    if (!v) return std::string("undef");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", *v);
    return std::string(buf);
  };
  char buf[128];
  std::snprintf(buf, sizeof(buf), "epoch=%d train_loss=%.9g val_loss=%.9g", s.epoch,
                s.train_loss, s.val_loss);
  return std::string(buf) + " P=" + num(s.val_metrics.precision) +
         " A=" + num(s.val_metrics.accuracy) + " R=" + num(s.val_metrics.recall) +
         " F1=" + num(s.val_metrics.f1);
}

namespace {

struct ValResult {
  double loss = 0.0;
  MatchingMetrics metrics;
};

ValResult run_validation(const std::vector<LoadedPair>& pairs,
                         const std::vector<std::size_t>& val_idx,
                         const ModelParams& params) {
  ValResult out;
  MatchingCounts counts;
  for (std::size_t k : val_idx) {
    const LoadedPair& pair = pairs[k];
    Tape t(/*grad_enabled=*/false);
    const BoundModel bound = bind_model(t, params);
    PipelineVars vars = run_pipeline(t, bound, params.cfg, pair.x, pair.y);
    Var loss = gap_loss(t, vars.cbar, pair.gt, params.cfg.gap_alpha);
    out.loss += t.value(loss)(0, 0);
    counts += count_matches(hard_assignment(t.value(vars.cbar)), pair.gt);
  }
  if (!val_idx.empty()) out.loss /= static_cast<double>(val_idx.size());
  out.metrics = metrics_from_counts(counts);
  return out;
}

}  // namespace

std::vector<EpochStats> train(const std::vector<LoadedPair>& pairs,
                              ModelParams& params, const TrainConfig& cfg,
                              std::ostream* progress) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("train: empty pair list");

  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(pairs.size())));
  const std::size_t n_train = pairs.size() - n_val;
  if (n_train == 0) throw ConfigError("train: validation split leaves no training pairs");

  std::vector<std::size_t> train_idx(n_train), val_idx(n_val);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::iota(val_idx.begin(), val_idx.end(), n_train);

  AdamState state = AdamState::init(params);
  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path);
    if (!log) throw IoError("cannot write " + cfg.log_path);
  }

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = train_idx;
    order_rng.shuffle(order);

    double train_loss = 0.0;
    int since_step = 0;
    params.zero_grad();
    for (std::size_t k : order) {
      const LoadedPair& pair = pairs[k];
      Tape t(/*grad_enabled=*/true);
      const BoundModel bound = bind_model(t, params);
      ForwardOutputs fwd = forward_loss(t, bound, params.cfg, pair.x, pair.y, pair.gt);
      train_loss += t.value(fwd.loss)(0, 0);
      t.backward(fwd.loss);
      accumulate_grads(t, bound, params);
      if (++since_step == cfg.grad_accum) {
        adam_step(params, state, cfg.adam);
        params.zero_grad();
        since_step = 0;
      }
    }
    if (since_step > 0) {
      adam_step(params, state, cfg.adam);
      params.zero_grad();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss / static_cast<double>(order.size());
    const ValResult val = run_validation(pairs, val_idx, params);
    stats.val_loss = val.loss;
    stats.val_metrics = val.metrics;
    history.push_back(stats);

    const std::string record = format_epoch_record(stats);
    if (log.is_open()) log << record << '\n';
    if (progress) (*progress) << record << std::endl;
    if (!cfg.checkpoint_path.empty()) save_params(params, cfg.checkpoint_path);
  }
  if (log.is_open() && !log) throw IoError("write failed: " + cfg.log_path);
  return history;
}

}  // namespace pointreg
