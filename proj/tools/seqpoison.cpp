#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "seqpoison/error.hpp"
#include "seqpoison/experiment.hpp"
#include "seqpoison/parallel.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string axis;
  std::string values;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", opt.seed, "Override the master seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence-guided data poisoning for sequential recommenders"};
  app.require_subcommand(1);
  Options opt;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus (data.txt)");
  auto* train = app.add_subcommand("train", "Train the recommender (model.bin, train_log.csv)");
  auto* attack = app.add_subcommand("attack", "Poison the corpus against model.bin (polluted.txt, injection_log.csv)");
  auto* evaluate = app.add_subcommand("evaluate", "Retrain on polluted.txt and compare with the clean model");
  auto* sweep = app.add_subcommand("sweep", "Attack/retrain/evaluate over a grid of K or lambda (sweep.csv)");
  for (auto* cmd : {gen, train, attack, evaluate, sweep}) add_common(cmd, opt);
  sweep->add_option("--axis", opt.axis, "K or lambda")->required();
  sweep->add_option("--values", opt.values, "Comma-separated values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    seqpoison::ThreadLimit limit(seqpoison::env_thread_cap());
    auto config = seqpoison::load_config(opt.config);
    if (opt.seed) config.seed = *opt.seed;
    std::string summary;
    if (gen->parsed()) {
      summary = seqpoison::cmd_gen_data(config, opt.out);
    } else if (train->parsed()) {
      summary = seqpoison::cmd_train(config, opt.out);
    } else if (attack->parsed()) {
      summary = seqpoison::cmd_attack(config, opt.out);
    } else if (evaluate->parsed()) {
      summary = seqpoison::cmd_evaluate(config, opt.out);
    } else {
      summary = seqpoison::cmd_sweep(config, opt.out, seqpoison::parse_axis(opt.axis),
                                     seqpoison::parse_values(opt.values));
    }
    fmt::print("{}\n", summary);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
