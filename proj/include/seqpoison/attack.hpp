#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqpoison/dataset.hpp"
#include "seqpoison/influence.hpp"
#include "seqpoison/model.hpp"

namespace seqpoison {

enum class Selection {
  SignedPromotion,  // argmax of -I; stop when no candidate has positive promotion
  PaperAbs,         // argmax of |I|; stop when max I < 0
};

enum class InverseMethod { Direct, Lissa };

std::string_view selection_name(Selection s);
Selection parse_selection(std::string_view name);

struct AttackConfig {
  int K = 1;
  double damping = 0.01;
  // The L2 coefficient the model was trained with. Its curvature is part of
  // the training objective's Hessian, so the inverse uses H + (damping + weight_decay) I.
  double weight_decay = 0.0;
  InverseMethod inverse = InverseMethod::Lissa;
  LissaConfig lissa;  // its damping is overridden by damping + weight_decay
  Selection selection = Selection::SignedPromotion;
  ItemId target = 0;
  std::uint64_t seed = 0;
  std::vector<ItemId> candidate_pool;  // empty means the whole catalog

  void validate(int item_count) const;
  double shift() const { return damping + weight_decay; }
  std::vector<ItemId> pool(int item_count) const;
};

struct Injection {
  int round = 0;
  ItemId item = 0;
  std::optional<double> influence;
};

struct PollutedDataset {
  std::string method;
  std::vector<Sequence> sequences;              // polluted training prefixes
  std::vector<std::vector<Injection>> injections;  // per user, in round order
};

std::vector<Sequence> candidate_sequences(const Sequence& x_u, const std::vector<ItemId>& pool);

// Influence-guided injection. Every round of every user screens against
// theta_hat; stilde = (H + damping I)^{-1} grad L_atk is computed once and
// reused, since neither factor changes between rounds. When `dump` is given
// it receives every scored candidate, ordered by user, round, pool position.
PollutedDataset infattack(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg,
                          std::vector<InfluenceRecord>* dump = nullptr);

// Same, with a precomputed stilde.
PollutedDataset infattack_with(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg,
                               const ParamVector& stilde, std::vector<InfluenceRecord>* dump = nullptr);

// (H + damping I)^{-1} grad L_atk via the configured inverse.
ParamVector attack_stilde(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg);

PollutedDataset random_alter(const SplitDataset& dataset, const AttackConfig& cfg, double target_prob = 0.5);
PollutedDataset sim_alter(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg);
PollutedDataset replace_attack(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg);
PollutedDataset ninf_variant(const SplitDataset& dataset, const AttackConfig& cfg);

// Items by descending cosine similarity to `item` over out_embed rows,
// excluding the item itself; ties by ascending id.
std::vector<ItemId> nearest_neighbors(const ModelParams& params, ItemId item);

// Training split with the polluted prefixes swapped in; held-out items kept.
SplitDataset apply_pollution(const SplitDataset& dataset, const PollutedDataset& polluted);

// Polluted prefixes followed by each user's original valid and test items,
// so the result can be split and trained on directly.
Corpus polluted_corpus(const SplitDataset& dataset, const PollutedDataset& polluted,
                       const std::vector<std::string>& user_labels = {});

// CSV `user,round,method,injected_item,influence`.
std::string format_injection_log(const PollutedDataset& polluted);

}  // namespace seqpoison
