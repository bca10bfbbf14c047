#include "pointreg/config.hpp"

#include <fstream>
#include <sstream>

#include "pointreg/error.hpp"

namespace pointreg {

void RunConfig::validate() const {
  model.validate();
  train.validate();
  pair.validate();
  if (gen_pairs < 1) throw ConfigError("config: gen.pairs must be >= 1");
  if (!(gt_threshold > 0.0)) throw ConfigError("config: gt_threshold must be positive");
  if (threads < 0) throw ConfigError("config: threads must be >= 0");
  if (ransac.sample_size < 3) throw ConfigError("config: ransac.sample_size must be >= 3");
  if (ransac.k_c < ransac.sample_size) {
    throw ConfigError("config: ransac.k_c must be >= ransac.sample_size");
  }
}

std::vector<std::string> preset_names() {
  return {"clean", "partial", "partial-noisy", "toy"};
}

void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "clean") {
    cfg.pair = PairSpec{};
    cfg.pair.n_points = 1024;
    cfg.gen_pairs = 200;
    cfg.train.epochs = 30;
  } else if (name == "partial") {
    cfg.pair = PairSpec{};
    cfg.pair.n_points = 1024;
    cfg.pair.crop_keep = 768;
    cfg.gen_pairs = 200;
    cfg.train.epochs = 30;
  } else if (name == "partial-noisy") {
    cfg.pair = PairSpec{};
    cfg.pair.n_points = 1024;
    cfg.pair.crop_keep = 768;
    cfg.pair.noise = NoiseSpec{0.1, 0.05};  // variance 0.01, clipped to 5 cm
    cfg.gen_pairs = 200;
    cfg.train.epochs = 80;
  } else if (name == "toy") {
    cfg.pair = PairSpec{};
    cfg.pair.n_points = 64;
    cfg.shape = ShapeKind::kComposite;
    cfg.gen_pairs = 200;
    cfg.train.epochs = 30;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

namespace {

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  if (used != value.size()) throw ConfigError(key + ": trailing junk in '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  if (used != value.size()) throw ConfigError(key + ": trailing junk in '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

}  // namespace

void apply_assignment(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model.d") cfg.model.d = static_cast<int>(parse_int(key, value));
  else if (key == "model.layers") cfg.model.layers = static_cast<int>(parse_int(key, value));
  else if (key == "model.heads") cfg.model.heads = static_cast<int>(parse_int(key, value));
  else if (key == "model.k_graph") cfg.model.k_graph = static_cast<int>(parse_int(key, value));
  else if (key == "model.tau") cfg.model.tau = parse_real(key, value);
  else if (key == "model.normal_radius") cfg.model.normal_radius = parse_real(key, value);
  else if (key == "model.normal_k") cfg.model.normal_k = static_cast<int>(parse_int(key, value));
  else if (key == "model.sinkhorn_iters") cfg.model.sinkhorn_iters = static_cast<int>(parse_int(key, value));
  else if (key == "model.gap_alpha") cfg.model.gap_alpha = parse_real(key, value);
  else if (key == "model.leaky_slope") cfg.model.leaky_slope = parse_real(key, value);
  else if (key == "model.slack_init") cfg.model.slack_init = parse_real(key, value);
  else if (key == "model.scale_full_dim") cfg.model.scale_full_dim = parse_bool(key, value);
  else if (key == "train.lr") cfg.train.adam.lr = parse_real(key, value);
  else if (key == "train.beta1") cfg.train.adam.beta1 = parse_real(key, value);
  else if (key == "train.beta2") cfg.train.adam.beta2 = parse_real(key, value);
  else if (key == "train.eps") cfg.train.adam.eps = parse_real(key, value);
  else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "train.grad_accum") cfg.train.grad_accum = static_cast<int>(parse_int(key, value));
  else if (key == "train.val_fraction") cfg.train.val_fraction = parse_real(key, value);
  else if (key == "ransac.k_c") cfg.ransac.k_c = static_cast<int>(parse_int(key, value));
  else if (key == "ransac.max_iters") cfg.ransac.max_iters = static_cast<int>(parse_int(key, value));
  else if (key == "ransac.inlier_threshold") cfg.ransac.inlier_threshold = parse_real(key, value);
  else if (key == "ransac.sample_size") cfg.ransac.sample_size = static_cast<int>(parse_int(key, value));
  else if (key == "gen.n_points") cfg.pair.n_points = static_cast<int>(parse_int(key, value));
  else if (key == "gen.rot_min_deg") cfg.pair.rot_range_deg[0] = parse_real(key, value);
  else if (key == "gen.rot_max_deg") cfg.pair.rot_range_deg[1] = parse_real(key, value);
  else if (key == "gen.trans_min_m") cfg.pair.trans_range_m[0] = parse_real(key, value);
  else if (key == "gen.trans_max_m") cfg.pair.trans_range_m[1] = parse_real(key, value);
  else if (key == "gen.crop_keep") {
    const long long v = parse_int(key, value);
    if (v <= 0) cfg.pair.crop_keep.reset();
    else cfg.pair.crop_keep = static_cast<int>(v);
  } else if (key == "gen.noise_sigma") {
    if (!cfg.pair.noise) cfg.pair.noise = NoiseSpec{};
    cfg.pair.noise->sigma = parse_real(key, value);
    if (cfg.pair.noise->sigma == 0.0) cfg.pair.noise.reset();
  } else if (key == "gen.noise_clip") {
    if (!cfg.pair.noise) cfg.pair.noise = NoiseSpec{};
    cfg.pair.noise->clip = parse_real(key, value);
  } else if (key == "gen.shape") cfg.shape = shape_from_name(value);
  else if (key == "gen.pairs") cfg.gen_pairs = static_cast<int>(parse_int(key, value));
  else if (key == "gt_threshold") cfg.gt_threshold = parse_real(key, value);
  else if (key == "threads") cfg.threads = static_cast<int>(parse_int(key, value));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_assignment(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace pointreg
