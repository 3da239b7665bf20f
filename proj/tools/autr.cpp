// Command-line front end: dataset generation, training, evaluation, and
// single-scene inference over the tensor-container formats.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "autr/container.hpp"
#include "autr/dataset.hpp"
#include "autr/metrics.hpp"
#include "autr/model.hpp"
#include "autr/objective.hpp"
#include "autr/ops.hpp"
#include "autr/synthetic.hpp"

namespace {

std::vector<int64_t> range_pool(int64_t lo, int64_t hi) {
  std::vector<int64_t> pool;
  for (int64_t c = lo; c < hi; ++c) pool.push_back(c);
  return pool;
}

int run_gen_data(const std::string& config_path, const std::string& out_dir) {
  autr::Config cfg = autr::Config::parse_file(config_path);
  autr::DataGenConfig gen = autr::DataGenConfig::from_config(cfg);

  const int64_t k = cfg.get_int("num_classes");
  const int64_t open_k = cfg.get_int("open_set_classes");
  if (open_k >= k) {
    throw autr::ContractError(
        "open_set_classes must leave at least one training class");
  }
  // The held-out pool sits in the middle of the class range so unseen
  // classes are interior points of the appearance and band-pattern spaces
  // (generalization by interpolation, not extrapolation).
  const int64_t b_lo = (k - open_k) / 2;
  std::vector<int64_t> pool_a = range_pool(0, b_lo);
  for (int64_t c : range_pool(b_lo + open_k, k)) pool_a.push_back(c);
  const auto pool_b = range_pool(b_lo, b_lo + open_k);
  const bool multi = cfg.get_bool("multi_source");
  const double noise = cfg.get_double("noise_level");
  const uint64_t seed = static_cast<uint64_t>(cfg.get_int("data_seed"));

  struct SplitPlan {
    const char* name;
    const char* count_key;
    const std::vector<int64_t>* pool;
    uint64_t seed_offset;
  };
  const SplitPlan plans[] = {
      {"train", "train_scenes", &pool_a, 0},
      {"val", "val_scenes", &pool_a, 1000000},
      {"test", "test_scenes", &pool_a, 2000000},
      {"open_set", "open_set_scenes", &pool_b, 3000000},
  };
  for (const auto& plan : plans) {
    autr::SplitConfig split;
    split.name = plan.name;
    split.count = cfg.get_int(plan.count_key);
    split.class_pool = *plan.pool;
    split.multi_source = multi;
    split.noise_level = noise;
    split.base_seed = seed + plan.seed_offset;
    autr::generate_split(split, gen, out_dir + "/" + plan.name);
    std::cout << "wrote " << split.count << " scenes to " << out_dir << "/"
              << plan.name << "\n";
  }
  cfg.save_file(out_dir + "/config.txt");
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_ckpt, const std::string& init_ckpt) {
  autr::Config cfg = autr::Config::parse_file(config_path);
  autr::set_compute_threads(static_cast<int>(cfg.get_int("threads")));

  auto records = autr::load_split(data_dir);
  auto scenes = autr::to_train_scenes(records);

  const uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed"));
  autr::Model model =
      init_ckpt.empty()
          ? autr::Model(autr::ModelDims::from_config(cfg), seed)
          : autr::Model::load_checkpoint(init_ckpt);

  autr::AdamW::Options aopts;
  aopts.lr = cfg.get_double("lr");
  aopts.weight_decay = cfg.get_double("weight_decay");
  aopts.beta1 = cfg.get_double("adam_beta1");
  aopts.beta2 = cfg.get_double("adam_beta2");
  aopts.eps = cfg.get_double("adam_eps");
  autr::AdamW optimizer(aopts);

  autr::TrainOptions topts;
  topts.step.weights = autr::CostWeights::from_config(cfg);
  topts.step.negative_sounding = cfg.get_bool("negative_sounding");
  topts.epochs = cfg.get_int("epochs");
  topts.batch_size = cfg.get_int("batch_size");
  topts.shuffle_seed = seed;
  topts.lr_decay = cfg.get_double("lr_decay");
  topts.on_epoch = [](int64_t epoch, double cost) {
    std::cout << "epoch " << epoch << " mean_cost " << cost << std::endl;
  };

  autr::train(model, scenes, topts, optimizer);
  model.save_checkpoint(out_ckpt);
  std::cout << "saved checkpoint " << out_ckpt << "\n";
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& data_dir,
             const std::string& report_path) {
  autr::Model model = autr::Model::load_checkpoint(ckpt);
  auto scenes = autr::to_train_scenes(autr::load_split(data_dir));
  autr::EvalResult result = autr::evaluate(model, scenes);
  autr::write_report(report_path, result);
  std::cout << "m_j=" << result.m_j << " m_f=" << result.m_f << " frames="
            << result.num_frames << "\n";
  return 0;
}

int run_infer(const std::string& ckpt, const std::string& scene_path,
              const std::string& out_path) {
  autr::Model model = autr::Model::load_checkpoint(ckpt);
  autr::SceneRecord rec = autr::load_scene_file(scene_path);
  autr::InferenceOutput out =
      autr::infer_scene(model, rec.scene.video, rec.scene.audio);
  autr::write_container(
      out_path, {autr::ContainerEntry::f64("mask_prob", out.mask_prob),
                 autr::ContainerEntry::f64("sounding_prob", out.sounding_prob)});
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"audio-guided video object segmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_path, init_path,
      report_path, scene_path;

  auto* gen = app.add_subcommand("gen-data", "generate synthetic dataset");
  gen->add_option("--config", config_path, "config file")->required();
  gen->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--data", data_dir, "split directory with manifest.txt")
      ->required();
  train->add_option("--out", ckpt_path, "output checkpoint")->required();
  train->add_option("--init", init_path, "initial checkpoint to fine-tune");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "split directory with manifest.txt")
      ->required();
  eval_cmd->add_option("--report", report_path, "report file")->required();

  auto* infer = app.add_subcommand("infer", "run one scene");
  infer->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  infer->add_option("--scene", scene_path, "scene container file")->required();
  infer->add_option("--out", out_path, "output container file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits 0; any usage error exits 2
  }

  try {
    if (gen->parsed()) return run_gen_data(config_path, out_path);
    if (train->parsed())
      return run_train(config_path, data_dir, ckpt_path, init_path);
    if (eval_cmd->parsed()) return run_eval(ckpt_path, data_dir, report_path);
    if (infer->parsed()) return run_infer(ckpt_path, scene_path, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
