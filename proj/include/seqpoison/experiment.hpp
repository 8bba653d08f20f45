#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqpoison/attack.hpp"
#include "seqpoison/dataset.hpp"
#include "seqpoison/eval.hpp"
#include "seqpoison/model.hpp"
#include "seqpoison/trainer.hpp"

namespace seqpoison {

// Everything a pipeline run depends on. Read from a flat `key = value` file.
struct ExperimentConfig {
  std::string data_path;  // empty: generate the synthetic corpus
  SyntheticConfig synthetic;

  int dim = 16;
  double decay = 0.8;
  double init_scale = 0.1;

  TrainConfig train;  // seed is derived, not read

  std::vector<std::string> methods{"infattack"};
  std::optional<int> K;  // unset: 2 for corpora with mean length > 100, else 1
  double lambda = 0.01;
  std::optional<ItemId> target;  // unset: sample targets_count targets
  int targets_count = 1;
  std::optional<Bucket> target_bucket;  // unset: whole catalog
  Selection selection = Selection::SignedPromotion;
  double target_prob = 0.5;

  int lissa_depth = 1000;  // 0 selects the direct dense solve
  int lissa_repeats = 8;
  std::optional<double> lissa_scale = 0.1;  // unset: 1 / largest per-user curvature

  std::vector<int> cutoffs{10, 20};
  bool exclude_interacted = true;

  std::uint64_t seed = 0;

  void validate() const;
};

// Parses the config text. Unknown or repeated keys and bad values throw
// ParseError carrying the line number.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

// Per-stage seeds derived from the master seed.
enum class Stage : std::uint64_t { Data = 1, Init = 2, Train = 3, Targets = 4, Attack = 5, Lissa = 6 };
std::uint64_t stage_seed(const ExperimentConfig& config, Stage stage);

inline constexpr std::string_view kMethods[] = {"infattack", "random", "simalter", "replace", "ninf"};
void check_method(std::string_view method);

Corpus load_corpus(const ExperimentConfig& config);
int resolve_K(const ExperimentConfig& config, const Corpus& corpus);
ModelParams fresh_model(const ExperimentConfig& config, int item_count);
TrainConfig train_config(const ExperimentConfig& config);
std::vector<ItemId> resolve_targets(const ExperimentConfig& config, const SplitDataset& dataset);
// theta_hat and dataset are needed only to size an automatic LiSSA scale.
AttackConfig attack_config(const ExperimentConfig& config, ItemId target, int K, const ModelParams& theta_hat,
                           const SplitDataset& dataset);

// Dispatches on the method name. The influence dump is filled only by infattack.
PollutedDataset run_attack(std::string_view method, const ModelParams& theta_hat, const SplitDataset& dataset,
                           const AttackConfig& attack, double target_prob,
                           std::vector<InfluenceRecord>* dump = nullptr);

// Target recall/NDCG plus HR of the held-out test item, in one report.
MetricsReport full_report(const ModelParams& params, const SplitDataset& dataset, ItemId target,
                          const ExperimentConfig& config, std::string method);

// The commands below write into `out` through temporary files and return a
// short human-readable summary.
std::string cmd_gen_data(const ExperimentConfig& config, const std::filesystem::path& out);
std::string cmd_train(const ExperimentConfig& config, const std::filesystem::path& out);
std::string cmd_attack(const ExperimentConfig& config, const std::filesystem::path& out);
std::string cmd_evaluate(const ExperimentConfig& config, const std::filesystem::path& out);

enum class SweepAxis { K, Lambda };
SweepAxis parse_axis(std::string_view name);
std::vector<double> parse_values(std::string_view list);
std::string cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& out, SweepAxis axis,
                      const std::vector<double>& values);

}  // namespace seqpoison
