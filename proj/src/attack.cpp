#include "seqpoison/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "seqpoison/error.hpp"
#include "seqpoison/parallel.hpp"
#include "seqpoison/random.hpp"

namespace seqpoison {

std::string_view selection_name(Selection s) {
  return s == Selection::SignedPromotion ? "signed-promotion" : "paper-abs";
}

Selection parse_selection(std::string_view name) {
  if (name == "signed-promotion") return Selection::SignedPromotion;
  if (name == "paper-abs") return Selection::PaperAbs;
  throw ArgumentError("unknown selection rule '" + std::string(name) + "'");
}

void AttackConfig::validate(int item_count) const {
  if (K < 0) throw ArgumentError("K must be nonnegative");
  if (!(damping >= 0.0)) throw ArgumentError("damping must be nonnegative");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight decay must be nonnegative");
  if (target < 0 || target >= item_count) throw ArgumentError("target item outside catalog");
  for (ItemId v : candidate_pool) {
    if (v < 0 || v >= item_count) throw ArgumentError("candidate pool item outside catalog");
  }
}

std::vector<ItemId> AttackConfig::pool(int item_count) const {
  if (!candidate_pool.empty()) return candidate_pool;
  std::vector<ItemId> all(static_cast<std::size_t>(item_count));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

std::vector<Sequence> candidate_sequences(const Sequence& x_u, const std::vector<ItemId>& pool) {
  std::vector<Sequence> out;
  out.reserve(pool.size());
  for (ItemId v : pool) {
    Sequence s = x_u;
    s.push_back(v);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

PollutedDataset unchanged(const SplitDataset& dataset, std::string method) {
  PollutedDataset out;
  out.method = std::move(method);
  out.sequences = dataset.train;
  out.injections.resize(dataset.train.size());
  return out;
}

// Index of the best score; ties go to the smallest item id.
std::size_t argmax_by_item(const std::vector<double>& score, const std::vector<ItemId>& pool) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < score.size(); ++i) {
    if (score[i] > score[best] || (score[i] == score[best] && pool[i] < pool[best])) best = i;
  }
  return best;
}

}  // namespace

ParamVector attack_stilde(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg) {
  const ParamVector grad_atk = attack_loss_grad(theta_hat, dataset, cfg.target);
  if (cfg.inverse == InverseMethod::Direct) {
    return direct_inverse_hvp(theta_hat, dataset.train, grad_atk, cfg.shift());
  }
  LissaConfig lissa = cfg.lissa;
  lissa.damping = cfg.shift();
  return lissa_inverse_hvp(theta_hat, dataset.train, grad_atk, lissa);
}

PollutedDataset infattack(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg,
                          std::vector<InfluenceRecord>* dump) {
  cfg.validate(dataset.item_count());
  if (cfg.K == 0) return unchanged(dataset, "infattack");
  return infattack_with(theta_hat, dataset, cfg, attack_stilde(theta_hat, dataset, cfg), dump);
}

PollutedDataset infattack_with(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg,
                               const ParamVector& stilde, std::vector<InfluenceRecord>* dump) {
  cfg.validate(dataset.item_count());
  if (stilde.size() != theta_hat.size()) throw ArgumentError("stilde has wrong length");
  const auto pool = cfg.pool(dataset.item_count());
  PollutedDataset out = unchanged(dataset, "infattack");
  if (cfg.K == 0) return out;

  std::vector<std::vector<InfluenceRecord>> records(dataset.train.size());
  parallel_for(dataset.train.size(), [&](std::size_t u) {
    Sequence& base = out.sequences[u];
    for (int round = 1; round <= cfg.K; ++round) {
      const ParamVector g_base = training_gradient(theta_hat, base);
      std::vector<double> influence(pool.size());
      Sequence cand = base;
      cand.push_back(0);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        cand.back() = pool[i];
        influence[i] = influence_score(training_gradient(theta_hat, cand) - g_base, stilde);
        if (dump != nullptr) records[u].push_back(make_record(static_cast<UserId>(u), pool[i], influence[i]));
      }

      std::size_t pick = 0;
      if (cfg.selection == Selection::SignedPromotion) {
        std::vector<double> promotion(influence.size());
        std::transform(influence.begin(), influence.end(), promotion.begin(), [](double x) { return -x; });
        pick = argmax_by_item(promotion, pool);
        if (!(promotion[pick] > 0.0)) break;
      } else {
        if (*std::max_element(influence.begin(), influence.end()) < 0.0) break;
        std::vector<double> magnitude(influence.size());
        std::transform(influence.begin(), influence.end(), magnitude.begin(), [](double x) { return std::abs(x); });
        pick = argmax_by_item(magnitude, pool);
      }
      base.push_back(pool[pick]);
      out.injections[u].push_back({round, pool[pick], influence[pick]});
    }
  });

  if (dump != nullptr) {
    for (auto& r : records) dump->insert(dump->end(), r.begin(), r.end());
  }
  return out;
}

PollutedDataset random_alter(const SplitDataset& dataset, const AttackConfig& cfg, double target_prob) {
  cfg.validate(dataset.item_count());
  if (!(target_prob >= 0.0 && target_prob <= 1.0)) throw ArgumentError("target_prob must lie in [0, 1]");
  PollutedDataset out = unchanged(dataset, "random");
  const auto m = static_cast<std::uint64_t>(dataset.item_count());
  for (std::size_t u = 0; u < out.sequences.size(); ++u) {
    Rng rng(derive_seed(cfg.seed, u));
    for (int round = 1; round <= cfg.K; ++round) {
      const bool forced = rng.bernoulli(target_prob);
      const auto item = forced ? cfg.target : static_cast<ItemId>(rng.below(m));
      out.sequences[u].push_back(item);
      out.injections[u].push_back({round, item, std::nullopt});
    }
  }
  return out;
}

std::vector<ItemId> nearest_neighbors(const ModelParams& params, ItemId item) {
  const auto O = params.out_embed();
  const double ref_norm = O.row(item).norm();
  std::vector<std::pair<double, ItemId>> sims;
  for (ItemId v = 0; v < params.item_count(); ++v) {
    if (v == item) continue;
    const double denom = ref_norm * O.row(v).norm();
    const double cos = denom > 0.0 ? O.row(v).dot(O.row(item)) / denom : 0.0;
    sims.emplace_back(cos, v);
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<ItemId> out;
  out.reserve(sims.size());
  for (const auto& s : sims) out.push_back(s.second);
  return out;
}

PollutedDataset sim_alter(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg) {
  cfg.validate(dataset.item_count());
  PollutedDataset out = unchanged(dataset, "simalter");
  if (cfg.K == 0) return out;
  std::vector<ItemId> slots{cfg.target};
  const auto neighbors = nearest_neighbors(theta_hat, cfg.target);
  for (std::size_t i = 0; i < neighbors.size() && slots.size() < static_cast<std::size_t>(cfg.K); ++i) {
    slots.push_back(neighbors[i]);
  }
  for (std::size_t u = 0; u < out.sequences.size(); ++u) {
    for (std::size_t k = 0; k < slots.size(); ++k) {
      out.sequences[u].push_back(slots[k]);
      out.injections[u].push_back({static_cast<int>(k + 1), slots[k], std::nullopt});
    }
  }
  return out;
}

PollutedDataset replace_attack(const ModelParams& theta_hat, const SplitDataset& dataset, const AttackConfig& cfg) {
  cfg.validate(dataset.item_count());
  const auto pool = cfg.pool(dataset.item_count());
  PollutedDataset out = unchanged(dataset, "replace");
  const auto E = theta_hat.in_embed();
  const auto O = theta_hat.out_embed();
  const double decay = theta_hat.decay();

  parallel_for(out.sequences.size(), [&](std::size_t u) {
    Sequence& base = out.sequences[u];
    for (int round = 1; round <= cfg.K; ++round) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(theta_hat.dim());
      double norm = 0.0;
      for (ItemId v : base) {
        sum = decay * sum + E.row(v).transpose();
        norm = decay * norm + 1.0;
      }
      // Virtual slot e appended after base: h' = (decay*S + e) / (decay*Z + 1).
      // Evaluated at e = h, where the context is unchanged, so
      // dCE/de = O^T (p - onehot(target)) / (decay*Z + 1).
      const Eigen::VectorXd h = sum / norm;
      Eigen::VectorXd r = softmax(O * h);
      r[cfg.target] -= 1.0;
      const Eigen::VectorXd g = O.transpose() * r / (decay * norm + 1.0);

      std::vector<double> score(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) score[i] = -E.row(pool[i]).dot(g);
      const auto pick = argmax_by_item(score, pool);
      base.push_back(pool[pick]);
      out.injections[u].push_back({round, pool[pick], std::nullopt});
    }
  });
  return out;
}

PollutedDataset ninf_variant(const SplitDataset& dataset, const AttackConfig& cfg) {
  cfg.validate(dataset.item_count());
  const auto pool = cfg.pool(dataset.item_count());
  PollutedDataset out = unchanged(dataset, "ninf");
  for (std::size_t u = 0; u < out.sequences.size(); ++u) {
    Rng rng(derive_seed(cfg.seed, u));
    for (int round = 1; round <= cfg.K; ++round) {
      const ItemId item = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      out.sequences[u].push_back(item);
      out.injections[u].push_back({round, item, std::nullopt});
    }
  }
  return out;
}

SplitDataset apply_pollution(const SplitDataset& dataset, const PollutedDataset& polluted) {
  if (polluted.sequences.size() != dataset.train.size()) throw ArgumentError("polluted dataset has wrong user count");
  SplitDataset out = dataset;
  out.train = polluted.sequences;
  out.catalog = count_popularity(out.train, dataset.item_count());
  return out;
}

Corpus polluted_corpus(const SplitDataset& dataset, const PollutedDataset& polluted,
                       const std::vector<std::string>& user_labels) {
  const SplitDataset ds = apply_pollution(dataset, polluted);
  Corpus corpus;
  corpus.item_count = ds.item_count();
  for (int u = 0; u < ds.user_count(); ++u) {
    corpus.sequences.push_back({u, ds.full_sequence(u)});
    corpus.user_labels.push_back(static_cast<std::size_t>(u) < user_labels.size() ? user_labels[static_cast<std::size_t>(u)]
                                                                                   : std::to_string(u));
  }
  return corpus;
}

std::string format_injection_log(const PollutedDataset& polluted) {
  std::string out = "user,round,method,injected_item,influence\n";
  for (std::size_t u = 0; u < polluted.injections.size(); ++u) {
    for (const auto& inj : polluted.injections[u]) {
      out += fmt::format("{},{},{},{},", u, inj.round, polluted.method, inj.item);
      if (inj.influence) out += fmt::format("{:.17g}", *inj.influence);
      out += '\n';
    }
  }
  return out;
}

}  // namespace seqpoison
