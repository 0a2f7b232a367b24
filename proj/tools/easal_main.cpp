#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "easal/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"easal: edge-aware saliency detection pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint;
  std::string pred_dir, gt_dir;
  std::string dataset_root_override, output_dir_override;
  long long seed_override = -1;
  int max_iter_override = -1;

  app.add_option("-c,--config", config_path, "JSON config file")->required();
  app.add_option("--dataset-root", dataset_root_override, "override dataset_root");
  app.add_option("--output-dir", output_dir_override, "override output_dir");
  app.add_option("--seed", seed_override, "override seed");
  app.add_option("--max-iter", max_iter_override, "override train.max_iter");

  auto* synth = app.add_subcommand("synth", "generate a synthetic shapes dataset");
  auto* relabel = app.add_subcommand("relabel", "convert binary masks to three-category labels");
  auto* rbd = app.add_subcommand("rbd", "compute handcrafted RBD saliency maps");
  auto* train = app.add_subcommand("train", "train the edge-aware model");
  auto* infer = app.add_subcommand("infer", "run inference with a checkpoint");
  infer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  auto* eval = app.add_subcommand("eval", "evaluate saliency maps against ground truth");
  eval->add_option("--pred", pred_dir, "predicted saliency map directory")->required();
  eval->add_option("--gt", gt_dir, "ground truth mask directory")->required();
  auto* export_pr = app.add_subcommand("export-pr", "export the dataset PR curve as CSV");
  export_pr->add_option("--pred", pred_dir, "predicted saliency map directory")->required();
  export_pr->add_option("--gt", gt_dir, "ground truth mask directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return easal::kExitUsage;
  }

  try {
    easal::RunConfig cfg = easal::load_config(config_path);
    // Flags take precedence over file values.
    if (!dataset_root_override.empty()) cfg.dataset_root = dataset_root_override;
    if (!output_dir_override.empty()) cfg.output_dir = output_dir_override;
    if (seed_override >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed_override);
      cfg.train.seed = cfg.seed;
    }
    if (max_iter_override > 0) cfg.train.max_iter = max_iter_override;

    if (synth->parsed()) return easal::cmd_synth(cfg, std::cout);
    if (relabel->parsed()) return easal::cmd_relabel(cfg, std::cout);
    if (rbd->parsed()) return easal::cmd_rbd(cfg, std::cout);
    if (train->parsed()) return easal::cmd_train(cfg, std::cout);
    if (infer->parsed()) return easal::cmd_infer(cfg, checkpoint, std::cout);
    if (eval->parsed()) return easal::cmd_eval(cfg, pred_dir, gt_dir, std::cout);
    if (export_pr->parsed()) return easal::cmd_export_pr(cfg, pred_dir, gt_dir, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return easal::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return easal::kExitInternal;
  }
  return easal::kExitUsage;
}
