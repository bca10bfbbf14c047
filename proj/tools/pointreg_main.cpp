// Command line front end: dataset generation, training, registration and
// evaluation over the pointreg core library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pointreg/config.hpp"
#include "pointreg/error.hpp"
#include "pointreg/evaluate.hpp"
#include "pointreg/io.hpp"
#include "pointreg/parallel.hpp"
#include "pointreg/pipeline.hpp"
#include "pointreg/rng.hpp"
#include "pointreg/training.hpp"

namespace fs = std::filesystem;
using namespace pointreg;

namespace {

std::string num6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string metric6(const std::optional<double>& v) {
  return v ? num6(*v) : std::string("undef");
}

// Layering shared by all subcommands: defaults < preset < file < CLI.
struct ConfigCli {
  std::string preset;
  std::string config_file;
  std::vector<std::string> sets;  // raw key=value overrides
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Named defaults: clean, partial, partial-noisy, toy");
    app->add_option("--config", config_file, "key=value config file");
    app->add_option("--set", sets, "Explicit key=value override (repeatable)");
    app->add_option("--seed", seed, "Master RNG seed");
    app->add_option("--threads", threads, "Worker threads (0 = all cores)");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!preset.empty()) apply_preset(cfg, preset);
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_assignment(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    return cfg;
  }
};

void finalize(RunConfig& cfg) {
  cfg.validate();
  set_thread_count(cfg.threads);
  cfg.ransac.seed = cfg.seed;
}

int cmd_gen(const ConfigCli& common, const std::string& out_dir,
            const std::string& source_file) {
  RunConfig cfg = common.resolve();
  finalize(cfg);

  fs::create_directories(out_dir);
  std::optional<PointCloud> source;
  if (!source_file.empty()) source = read_cloud(source_file);

  const int n_pairs = cfg.gen_pairs;
  std::vector<ManifestRecord> records(static_cast<std::size_t>(n_pairs));
  std::vector<double> overlap(static_cast<std::size_t>(n_pairs));
  parallel_for(0, static_cast<std::size_t>(n_pairs), [&](std::size_t k) {
    PairSpec spec = cfg.pair;
    spec.seed = mix_seed(cfg.seed, k);
    const PointCloud base =
        source ? *source : synth_shape(cfg.shape, spec.n_points, mix_seed(cfg.seed ^ 0x5eedULL, k));
    const RegistrationPair pair = make_pair(base, spec);

    ManifestRecord rec;
    rec.x_path = "pair_" + std::to_string(k) + "_x.xyz";
    rec.y_path = "pair_" + std::to_string(k) + "_y.xyz";
    rec.t_gt = pair.t_gt;
    rec.src_to_tgt = pair.gt.src_to_tgt;
    write_xyz(pair.x, (fs::path(out_dir) / rec.x_path).string());
    write_xyz(pair.y, (fs::path(out_dir) / rec.y_path).string());
    overlap[k] = pair.x.size() == 0
                     ? 0.0
                     : static_cast<double>(pair.gt.matched_count()) /
                           static_cast<double>(pair.x.size());
    records[k] = std::move(rec);
  });

  const std::string manifest = (fs::path(out_dir) / "manifest.txt").string();
  write_manifest(manifest, records);

  double mean_overlap = 0.0;
  for (double o : overlap) mean_overlap += o;
  mean_overlap /= static_cast<double>(n_pairs);
  std::cout << "generated " << n_pairs << " pairs (" << cfg.pair.n_points
            << " points each) in " << out_dir << "\n"
            << "mean overlap: " << num6(100.0 * mean_overlap) << " %\n"
            << "manifest: " << manifest << "\n";
  return 0;
}

int cmd_train(const ConfigCli& common, const std::string& manifest,
              const std::string& out_dir, std::optional<int> epochs,
              std::optional<double> lr) {
  RunConfig cfg = common.resolve();
  if (epochs) cfg.train.epochs = *epochs;
  if (lr) cfg.train.adam.lr = *lr;
  finalize(cfg);

  const auto pairs = load_pairs(manifest, cfg.gt_threshold);
  if (pairs.empty()) throw ConfigError("train: manifest is empty");

  fs::create_directories(out_dir);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;
  train_cfg.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
  train_cfg.log_path = (fs::path(out_dir) / "train_log.txt").string();

  ModelParams params = init_params(cfg.model, cfg.seed);
  train(pairs, params, train_cfg, &std::cout);
  std::cout << "checkpoint: " << train_cfg.checkpoint_path << "\n"
            << "log: " << train_cfg.log_path << "\n";
  return 0;
}

int cmd_register(const ConfigCli& common, const std::string& checkpoint,
                 const std::string& x_file, const std::string& y_file,
                 const std::string& estimator_name, bool ablate_normals) {
  RunConfig cfg = common.resolve();
  finalize(cfg);
  const PoseEstimator estimator = estimator_from_name(estimator_name);

  const PointCloud x = read_cloud(x_file);
  const PointCloud y = read_cloud(y_file);

  RigidTransform estimate;
  int match_count = 0, inlier_count = 0;
  if (estimator == PoseEstimator::kIcp) {
    const IcpResult res = icp(x, y, 100, 1e-10);
    estimate = res.transform;
    match_count = static_cast<int>(x.size());
    inlier_count = static_cast<int>(x.size());
  } else {
    if (checkpoint.empty()) {
      throw ConfigError("register: --checkpoint is required unless --estimator icp");
    }
    const ModelParams params = load_params(checkpoint);
    const MatchPrediction pred = predict_matches(params, x, y, !ablate_normals);
    match_count = static_cast<int>(pred.correspondences.pairs.size());
    if (estimator == PoseEstimator::kRansac) {
      const RansacResult res = ransac_register(pred.correspondences, x, y, cfg.ransac);
      estimate = res.transform;
      inlier_count = res.inlier_count;
    } else {
      std::vector<Eigen::Vector3d> src, dst;
      for (const auto& [i, j] : pred.correspondences.pairs) {
        src.push_back(x.points.at(static_cast<std::size_t>(i)));
        dst.push_back(y.points.at(static_cast<std::size_t>(j)));
      }
      estimate = kabsch(src, dst);
      inlier_count = match_count;
    }
  }

  std::cout << "rotation:\n";
  for (int r = 0; r < 3; ++r) {
    std::cout << "  " << num6(estimate.rotation(r, 0)) << ' '
              << num6(estimate.rotation(r, 1)) << ' ' << num6(estimate.rotation(r, 2))
              << '\n';
  }
  std::cout << "translation (m): " << num6(estimate.translation.x()) << ' '
            << num6(estimate.translation.y()) << ' ' << num6(estimate.translation.z())
            << '\n'
            << "matches: " << match_count << "\ninliers: " << inlier_count << '\n';
  std::cout << "result";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) std::cout << ' ' << num6(estimate.rotation(r, c));
  }
  for (int c = 0; c < 3; ++c) std::cout << ' ' << num6(estimate.translation(c));
  std::cout << ' ' << match_count << ' ' << inlier_count << '\n';
  return 0;
}

int cmd_eval(const ConfigCli& common, const std::string& manifest,
             const std::string& checkpoint, const std::string& estimator_name,
             const std::string& ablate, bool oracle_matches) {
  RunConfig cfg = common.resolve();
  finalize(cfg);

  EvalOptions options;
  options.estimator = estimator_from_name(estimator_name);
  options.oracle_matches = oracle_matches;
  options.ransac = cfg.ransac;
  if (!ablate.empty()) {
    if (ablate != "no-normals" && ablate != "mdgat-attention-off") {
      throw ConfigError("eval: --ablate accepts no-normals or mdgat-attention-off");
    }
    options.normal_bias = false;
  }

  const auto pairs = load_pairs(manifest, cfg.gt_threshold);
  if (pairs.empty()) throw ConfigError("eval: manifest is empty");

  std::optional<ModelParams> params;
  if (!checkpoint.empty()) params = load_params(checkpoint);
  if (!params && !oracle_matches && options.estimator != PoseEstimator::kIcp) {
    throw ConfigError("eval: --checkpoint required unless --oracle-matches or --estimator icp");
  }

  std::vector<PairEval> rows(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    rows[k] = evaluate_pair(params ? &*params : nullptr, pairs[k], options);
    const auto& r = rows[k];
    std::cout << "pair=" << k << " pose_valid=" << (r.pose_valid ? 1 : 0)
              << " rot_err_deg=" << num6(r.rot_err_deg.x()) << ','
              << num6(r.rot_err_deg.y()) << ',' << num6(r.rot_err_deg.z())
              << " trans_err_m=" << num6(r.trans_err_m.x()) << ','
              << num6(r.trans_err_m.y()) << ',' << num6(r.trans_err_m.z())
              << " geo_err_deg=" << num6(r.geo_err_deg) << " matches=" << r.match_count
              << " inliers=" << r.inlier_count << "\n";
  }
  const EvalSummary s = summarize(rows);

  std::cout << "\n           RMSE(R) deg  MAE(R) deg  RMSE(t) m   MAE(t) m\n";
  std::printf("per-axis   %-12s %-11s %-11s %-11s\n", num6(s.rmse_r_deg).c_str(),
              num6(s.mae_r_deg).c_str(), num6(s.rmse_t_m).c_str(),
              num6(s.mae_t_m).c_str());
  std::printf("geodesic   %-12s %-11s\n", num6(s.rmse_geo_deg).c_str(),
              num6(s.mae_geo_deg).c_str());
  std::cout << "matching   P=" << metric6(s.matching.precision)
            << " % A=" << metric6(s.matching.accuracy)
            << " % R=" << metric6(s.matching.recall)
            << " % F1=" << metric6(s.matching.f1) << " %\n";
  if (s.pose_failures > 0) {
    std::cout << "pose failures: " << s.pose_failures << " of " << s.pairs << "\n";
  }
  std::cout << "summary rmse_r=" << num6(s.rmse_r_deg) << " mae_r=" << num6(s.mae_r_deg)
            << " rmse_t=" << num6(s.rmse_t_m) << " mae_t=" << num6(s.mae_t_m)
            << " rmse_geo=" << num6(s.rmse_geo_deg) << " mae_geo=" << num6(s.mae_geo_deg)
            << " P=" << metric6(s.matching.precision) << " A=" << metric6(s.matching.accuracy)
            << " R=" << metric6(s.matching.recall) << " F1=" << metric6(s.matching.f1)
            << " pairs=" << s.pairs << " pose_failures=" << s.pose_failures << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointreg: desk-scale rigid point cloud registration"};
  app.require_subcommand(1);

  ConfigCli common_gen, common_train, common_register, common_eval;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic registration dataset");
  std::string gen_out = "dataset", gen_source;
  common_gen.attach(gen);
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--source", gen_source, "Optional source cloud file (.xyz/.ply)");
  std::optional<int> gen_pairs, gen_points;
  gen->add_option("--pairs", gen_pairs, "Number of pairs");
  gen->add_option("--n-points", gen_points, "Points per cloud");
  std::string gen_shape;
  gen->add_option("--shape", gen_shape, "plane|sphere|torus|box|composite");

  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset manifest");
  std::string train_manifest, train_out = "run";
  std::optional<int> train_epochs;
  std::optional<double> train_lr;
  common_train.attach(train_cmd);
  train_cmd->add_option("--manifest", train_manifest, "Dataset manifest")->required();
  train_cmd->add_option("--out", train_out, "Output directory (checkpoint + log)");
  train_cmd->add_option("--epochs", train_epochs, "Epoch count");
  train_cmd->add_option("--lr", train_lr, "Adam learning rate");

  auto* reg = app.add_subcommand("register", "Register two point cloud files");
  std::string reg_checkpoint, reg_x, reg_y, reg_estimator = "ransac";
  bool reg_ablate = false;
  common_register.attach(reg);
  reg->add_option("--checkpoint", reg_checkpoint, "Trained model checkpoint");
  reg->add_option("--x", reg_x, "Source cloud file")->required();
  reg->add_option("--y", reg_y, "Target cloud file")->required();
  reg->add_option("--estimator", reg_estimator, "ransac|svd|icp");
  reg->add_flag("--ablate-normals", reg_ablate, "Drop the normal-angle attention bias");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on a dataset manifest");
  std::string eval_manifest, eval_checkpoint, eval_estimator = "ransac", eval_ablate;
  bool eval_oracle = false;
  common_eval.attach(eval_cmd);
  eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Trained model checkpoint");
  eval_cmd->add_option("--estimator", eval_estimator, "ransac|svd|icp");
  eval_cmd->add_option("--ablate", eval_ablate,
                       "no-normals|mdgat-attention-off (disable the normal bias)");
  eval_cmd->add_flag("--oracle-matches", eval_oracle,
                     "Score with ground-truth correspondences");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      if (gen_pairs) common_gen.sets.push_back("gen.pairs=" + std::to_string(*gen_pairs));
      if (gen_points) common_gen.sets.push_back("gen.n_points=" + std::to_string(*gen_points));
      if (!gen_shape.empty()) common_gen.sets.push_back("gen.shape=" + gen_shape);
      return cmd_gen(common_gen, gen_out, gen_source);
    }
    if (train_cmd->parsed()) {
      return cmd_train(common_train, train_manifest, train_out, train_epochs, train_lr);
    }
    if (reg->parsed()) {
      return cmd_register(common_register, reg_checkpoint, reg_x, reg_y, reg_estimator,
                          reg_ablate);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(common_eval, eval_manifest, eval_checkpoint, eval_estimator,
                      eval_ablate, eval_oracle);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
