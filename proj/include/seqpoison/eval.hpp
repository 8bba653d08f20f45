#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "seqpoison/dataset.hpp"
#include "seqpoison/model.hpp"

namespace seqpoison {

struct MetricsReport {
  std::string method;
  std::optional<ItemId> target;
  std::optional<std::string> bucket;
  std::map<int, double> recall;
  std::map<int, double> ndcg;
  std::map<int, double> hr;
  int n_users = 0;
};

enum class HeldOut { Valid, Test };

// 1 + #items scoring strictly higher + #smaller-id items scoring equal.
int rank_in_scores(const Eigen::VectorXd& scores, ItemId item);
int rank_of_item(const ModelParams& params, std::span<const ItemId> prefix, ItemId item);

// Recall@N and NDCG@N (1/log2(1+rank) for hits) over a list of ranks.
void fill_rank_metrics(const std::vector<int>& ranks, const std::vector<int>& cutoffs, MetricsReport& report);

// Target exposure measured on each user's clean evaluation prefix
// (training prefix followed by the validation item). With
// exclude_interacted, users whose training prefix already holds the target
// are skipped.
MetricsReport target_metrics(const ModelParams& params, const SplitDataset& dataset, ItemId target,
                             const std::vector<int>& cutoffs, bool exclude_interacted = true);

// HR@N of the held-out item. Valid: prefix = train. Test: prefix = train ++ [valid].
MetricsReport rec_metrics(const ModelParams& params, const SplitDataset& dataset, const std::vector<int>& cutoffs,
                          HeldOut split = HeldOut::Test);

// Averages target_metrics over the targets that fall in each bucket.
std::map<Bucket, MetricsReport> bucket_report(const ModelParams& params, const SplitDataset& dataset,
                                              const std::vector<ItemId>& targets, const PopularityBuckets& buckets,
                                              const std::vector<int>& cutoffs, bool exclude_interacted = true);

// Arithmetic mean of reports with identical cutoffs.
MetricsReport average_reports(const std::vector<MetricsReport>& reports);

// attacked - clean, element-wise.
MetricsReport delta_vs_clean(const MetricsReport& attacked, const MetricsReport& clean);

nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace seqpoison
