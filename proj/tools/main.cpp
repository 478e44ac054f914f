#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace safemarl::cli;
  CLI::App app{"Shielded multi-agent training, evaluation and reporting"};
  app.require_subcommand(1);

  TrainOptions train;
  std::string train_config, train_out;
  int runs = 0, episodes = 0;
  std::uint64_t seed = 0;
  auto* t = app.add_subcommand("train", "Train the configured runs");
  t->add_option("--config", train_config, "JSON configuration file")->check(CLI::ExistingFile);
  auto* runs_opt = t->add_option("--runs", runs, "Number of runs")->check(CLI::NonNegativeNumber);
  auto* episodes_opt = t->add_option("--episodes", episodes, "Episodes per run")->check(CLI::NonNegativeNumber);
  t->add_flag("--no-shield", train.no_shield, "Train without the safety shield");
  auto* seed_opt = t->add_option("--seed", seed, "First seed; run k uses seed + k");
  auto* out_opt = t->add_option("--out", train_out, "Output directory (else $CBF_SHIELD_OUT)");

  EvalOptions eval;
  std::string eval_config, eval_out, checkpoint;
  auto* e = app.add_subcommand("eval", "Greedy shielded rollouts of a checkpoint");
  e->add_option("--checkpoint", checkpoint, "checkpoint.bin from a training run")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--config", eval_config, "JSON configuration file")->check(CLI::ExistingFile);
  e->add_option("--episodes", eval.episodes, "Episodes to roll out")->check(CLI::NonNegativeNumber);
  e->add_option("--seed", eval.seed, "Reset seed");
  auto* eval_out_opt = e->add_option("--out", eval_out, "Output directory (else $CBF_SHIELD_OUT)");

  std::string report_dir;
  auto* r = app.add_subcommand("report", "Collision table and averaged reward curve");
  r->add_option("dir", report_dir, "Directory written by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kConfigError;
  }

  if (t->parsed()) {
    if (!train_config.empty()) train.config = train_config;
    if (runs_opt->count()) train.runs = runs;
    if (episodes_opt->count()) train.episodes = episodes;
    if (seed_opt->count()) train.seed = seed;
    if (out_opt->count()) train.out = train_out;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (e->parsed()) {
    eval.checkpoint = checkpoint;
    if (!eval_config.empty()) eval.config = eval_config;
    if (eval_out_opt->count()) eval.out = eval_out;
    return cmd_eval(eval, std::cout, std::cerr);
  }
  return cmd_report(report_dir, std::cout, std::cerr);
}
