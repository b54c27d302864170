#include <iostream>

#include <CLI11.hpp>

#include "rmf/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Riemannian MeanFlow: train, sample and evaluate one-step generators on manifolds"};
  app.require_subcommand(1);

  rmf::TrainArgs train;
  auto* t = app.add_subcommand("train", "run the training loop from a JSON config");
  t->add_option("--config", train.config, "config file")->required();
  t->add_option("--out", train.out, "output directory (overrides output_dir)");
  t->add_option("--seed", train.seed, "training seed (overrides train.seed)");
  t->add_flag("--resume", train.resume, "continue from <out>/last.ckpt");
  t->add_flag("--track-val", train.track_val, "keep best.ckpt by validation MMD");
  t->add_flag("--quiet", train.quiet, "no per-epoch progress");

  rmf::SampleArgs sample;
  auto* s = app.add_subcommand("sample", "draw samples from a checkpoint");
  s->add_option("--checkpoint", sample.checkpoint, "checkpoint file")->required();
  s->add_option("--out", sample.out, "output CSV")->required();
  s->add_option("--n", sample.n, "number of samples")->check(CLI::PositiveNumber);
  s->add_option("--steps", sample.steps, "network evaluations (K)")->check(CLI::PositiveNumber);
  s->add_option("--seed", sample.seed, "sampling seed");
  s->add_option("--omega", sample.omega, "guidance scale")->check(CLI::NonNegativeNumber);
  s->add_option("--label", sample.label, "class label");
  s->add_flag("--euler", sample.euler, "geodesic Euler on u(x, t, t) (flow-matching baseline)");

  rmf::EvalArgs eval;
  auto* e = app.add_subcommand("eval", "MMD of generated samples against the test split");
  e->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  e->add_option("--config", eval.config, "config describing the dataset")->required();
  e->add_option("--out", eval.out, "report CSV")->required();
  e->add_option("--n", eval.n, "samples per seed");
  e->add_option("--steps", eval.steps, "network evaluations (K)");
  e->add_option("--seed", eval.seed, "single seed instead of the configured list");
  e->add_option("--label", eval.label, "condition on a label and compare with that class");
  e->add_option("--omega", eval.omega, "guidance scale")->check(CLI::NonNegativeNumber);

  rmf::DiagArgs diag;
  auto* d = app.add_subcommand("diag", "gradient-conflict statistics from a training log");
  d->add_option("--log", diag.log, "train_log.csv")->required();
  d->add_option("--out", diag.out, "output CSV")->required();

  rmf::GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "write the dataset splits as CSV");
  g->add_option("--config", gen.config, "config describing the dataset")->required();
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--seed", gen.seed, "dataset seed (overrides dataset.seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : rmf::kExitConfig;
  }

  if (*t) return rmf::cmd_train(train, std::cout, std::cerr);
  if (*s) return rmf::cmd_sample(sample, std::cout, std::cerr);
  if (*e) return rmf::cmd_eval(eval, std::cout, std::cerr);
  if (*d) return rmf::cmd_diag(diag, std::cout, std::cerr);
  if (*g) return rmf::cmd_gen_data(gen, std::cout, std::cerr);
  return rmf::kExitConfig;
}
