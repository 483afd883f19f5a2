#include "mvae/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Multimodal VAE: training, importance-sampled evaluation and weak-supervision sweeps"};
  app.require_subcommand(1);

  std::string config, checkpoint, out_dir;
  std::vector<double> fractions;

  CLI::App* train = app.add_subcommand("train", "Train a model; writes model.ckpt, history.csv, config.resolved.json");
  train->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "Importance-sampled log-likelihoods; writes metrics.csv");
  eval->add_option("checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* sweep = app.add_subcommand("weaksweep", "Accuracy against the paired fraction; writes weaksweep.csv");
  sweep->add_option("config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--fractions", fractions, "Comma-separated paired fractions")
      ->required()
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--out", out_dir, "Output directory")->required();

  app.add_subcommand("check", "Run the fast oracle suite");

  app.footer("Set MVAE_SEED to override the seed in any configuration.");
  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return mvae::cli::cmd_train(config, out_dir, std::cout, std::cerr);
  if (eval->parsed()) return mvae::cli::cmd_eval(checkpoint, config, out_dir, std::cout, std::cerr);
  if (sweep->parsed()) return mvae::cli::cmd_weaksweep(config, fractions, out_dir, std::cout, std::cerr);
  return mvae::cli::cmd_check(std::cout, std::cerr);
}
