#include "pointreg/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pointreg/error.hpp"
#include "pointreg/rng.hpp"

namespace pointreg {

void ModelConfig::validate() const {
  if (d < 6 || d % 6 != 0) throw ConfigError("model: d must be a positive multiple of 6");
  if (heads < 1 || d % heads != 0) throw ConfigError("model: heads must divide d");
  if (layers < 0) throw ConfigError("model: layers must be >= 0");
  if (k_graph < 1) throw ConfigError("model: k_graph must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("model: tau must be positive");
  if (!(normal_radius > 0.0)) throw ConfigError("model: normal_radius must be positive");
  if (normal_k < 3) throw ConfigError("model: normal_k must be >= 3");
  if (sinkhorn_iters < 1) throw ConfigError("model: sinkhorn_iters must be >= 1");
  if (!(gap_alpha > 0.0)) throw ConfigError("model: gap_alpha must be positive");
}

std::vector<TensorSpec> model_schema(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d;
  const int c1 = d / 3;
  const int c2 = 2 * d / 3;
  const int dh = d / cfg.heads;

  std::vector<TensorSpec> spec;
  auto push = [&spec](std::string name, int r, int c) {
    spec.push_back({std::move(name), r, c});
  };

  push("edge1.w1", 6, c1);
  push("edge1.b1", 1, c1);
  push("edge1.w2", c1, c1);
  push("edge1.b2", 1, c1);
  push("edge2.w1", 2 * c1, c2);
  push("edge2.b1", 1, c2);
  push("edge2.w2", c2, c2);
  push("edge2.b2", 1, c2);
  push("fuse.w", c1 + c2, d);
  push("fuse.b", 1, d);
  push("embed.w_e", d, d);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string self = "self" + std::to_string(l);
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string head = self + ".h" + std::to_string(h);
      push(head + ".wq", dh, dh);
      push(head + ".wk", dh, dh);
      push(head + ".wv", dh, dh);
      push(head + ".wr", dh, dh);
    }
    push(self + ".wo", d, d);
    push(self + ".mlp.w1", 2 * d, 2 * d);
    push(self + ".mlp.b1", 1, 2 * d);
    push(self + ".mlp.w2", 2 * d, d);
    push(self + ".mlp.b2", 1, d);
    const std::string cross = "cross" + std::to_string(l);
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string head = cross + ".h" + std::to_string(h);
      push(head + ".wq", dh, dh);
      push(head + ".wk", dh, dh);
      push(head + ".wv", dh, dh);
    }
    push(cross + ".wo", d, d);
    push(cross + ".mlp.w1", 2 * d, 2 * d);
    push(cross + ".mlp.b1", 1, 2 * d);
    push(cross + ".mlp.w2", 2 * d, d);
    push(cross + ".mlp.b2", 1, d);
  }
  push("match.slack", 1, 1);
  return spec;
}

int ModelParams::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void ModelParams::zero_grad() {
  for (auto& g : grads) g.setZero();
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams params;
  params.cfg = cfg;
  Rng rng(seed);
  for (const auto& spec : model_schema(cfg)) {
    Matrix value(spec.rows, spec.cols);
    const bool is_bias = spec.name.find(".b") != std::string::npos;
    if (spec.name == "match.slack") {
      value(0, 0) = cfg.slack_init;
    } else if (is_bias) {
      value.setZero();
    } else {
      const double lim = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) value(r, c) = rng.uniform(-lim, lim);
      }
    }
    params.names.push_back(spec.name);
    params.grads.emplace_back(Matrix::Zero(spec.rows, spec.cols));
    params.values.push_back(std::move(value));
  }
  return params;
}

namespace {
constexpr char kMagic[] = "pointreg-model v1";
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  std::ostringstream header;
  header.precision(17);
  header << kMagic << '\n'
         << "d " << params.cfg.d << '\n'
         << "layers " << params.cfg.layers << '\n'
         << "heads " << params.cfg.heads << '\n'
         << "k_graph " << params.cfg.k_graph << '\n'
         << "tau " << params.cfg.tau << '\n'
         << "normal_radius " << params.cfg.normal_radius << '\n'
         << "normal_k " << params.cfg.normal_k << '\n'
         << "sinkhorn_iters " << params.cfg.sinkhorn_iters << '\n'
         << "gap_alpha " << params.cfg.gap_alpha << '\n'
         << "leaky_slope " << params.cfg.leaky_slope << '\n'
         << "slack_init " << params.cfg.slack_init << '\n'
         << "scale_full_dim " << (params.cfg.scale_full_dim ? 1 : 0) << '\n'
         << "tensors " << params.tensor_count() << '\n';
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    header << params.names[i] << ' ' << params.values[i].rows() << ' '
           << params.values[i].cols() << '\n';
  }
  header << "binary\n";
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& value : params.values) {
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double x = value(r, c);
        out.write(reinterpret_cast<const char*>(&x), sizeof(double));
      }
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError(path + ": not a pointreg model file");
  }

  ModelConfig cfg;
  std::size_t declared_tensors = 0;
  auto read_kv = [&](const std::string& key) {
    if (!std::getline(in, line)) throw IoError(path + ": truncated header");
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw IoError(path + ": expected header key '" + key + "'");
    return ss;
  };
  read_kv("d") >> cfg.d;
  read_kv("layers") >> cfg.layers;
  read_kv("heads") >> cfg.heads;
  read_kv("k_graph") >> cfg.k_graph;
  read_kv("tau") >> cfg.tau;
  read_kv("normal_radius") >> cfg.normal_radius;
  read_kv("normal_k") >> cfg.normal_k;
  read_kv("sinkhorn_iters") >> cfg.sinkhorn_iters;
  read_kv("gap_alpha") >> cfg.gap_alpha;
  read_kv("leaky_slope") >> cfg.leaky_slope;
  read_kv("slack_init") >> cfg.slack_init;
  int full_dim = 0;
  read_kv("scale_full_dim") >> full_dim;
  cfg.scale_full_dim = full_dim != 0;
  read_kv("tensors") >> declared_tensors;

  const auto schema = model_schema(cfg);
  if (schema.size() != declared_tensors) {
    throw IoError(path + ": tensor count does not match the configuration");
  }

  ModelParams params;
  params.cfg = cfg;
  for (const auto& spec : schema) {
    if (!std::getline(in, line)) throw IoError(path + ": truncated header");
    std::istringstream ss(line);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    ss >> name >> rows >> cols;
    if (name != spec.name || rows != spec.rows || cols != spec.cols) {
      throw IoError(path + ": tensor '" + spec.name + "' has unexpected name or shape");
    }
    params.names.push_back(spec.name);
    params.values.emplace_back(spec.rows, spec.cols);
    params.grads.emplace_back(Matrix::Zero(spec.rows, spec.cols));
  }
  if (!std::getline(in, line) || line != "binary") {
    throw IoError(path + ": missing binary marker");
  }
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    Matrix& value = params.values[i];
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        double x = 0.0;
        if (!in.read(reinterpret_cast<char*>(&x), sizeof(double))) {
          throw IoError(path + ": truncated tensor data at '" + params.names[i] + "'");
        }
        value(r, c) = x;
      }
    }
  }
  return params;
}

BoundModel bind_model(Tape& t, const ModelParams& params) {
  BoundModel bound;
  bound.tensors.reserve(params.tensor_count());
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    bound.tensors.push_back(t.leaf(params.values[i], /*requires_grad=*/true));
  }

  std::size_t at = 0;
  auto next = [&]() { return bound.tensors[at++]; };
  auto next_mlp = [&]() {
    BoundMlp mlp;
    mlp.w1 = next();
    mlp.b1 = next();
    mlp.w2 = next();
    mlp.b2 = next();
    return mlp;
  };

  bound.descriptor.edge1 = next_mlp();
  bound.descriptor.edge2 = next_mlp();
  bound.descriptor.fuse_w = next();
  bound.descriptor.fuse_b = next();
  bound.w_e = next();
  for (int l = 0; l < params.cfg.layers; ++l) {
    BoundSelfAttention self;
    for (int h = 0; h < params.cfg.heads; ++h) {
      self.wq.push_back(next());
      self.wk.push_back(next());
      self.wv.push_back(next());
      self.wr.push_back(next());
    }
    self.wo = next();
    self.mlp = next_mlp();
    bound.self_layers.push_back(std::move(self));
    BoundCrossAttention cross;
    for (int h = 0; h < params.cfg.heads; ++h) {
      cross.wq.push_back(next());
      cross.wk.push_back(next());
      cross.wv.push_back(next());
    }
    cross.wo = next();
    cross.mlp = next_mlp();
    bound.cross_layers.push_back(std::move(cross));
  }
  bound.slack = next();
  if (at != params.tensor_count()) throw ConfigError("bind_model: schema drift");
  return bound;
}

void accumulate_grads(const Tape& t, const BoundModel& bound, ModelParams& params) {
  if (bound.tensors.size() != params.tensor_count()) {
    throw ConfigError("accumulate_grads: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params.tensor_count(); ++i) {
    if (t.has_grad(bound.tensors[i])) params.grads[i] += t.grad(bound.tensors[i]);
  }
}

}  // namespace pointreg
