#include "seqpoison/eval.hpp"

#include <algorithm>
#include <cmath>

#include "seqpoison/error.hpp"
#include "seqpoison/parallel.hpp"

namespace seqpoison {

namespace {

void check_cutoffs(const std::vector<int>& cutoffs) {
  if (cutoffs.empty()) throw ArgumentError("at least one cutoff is required");
  for (int n : cutoffs) {
    if (n < 1) throw ArgumentError("cutoffs must be positive");
  }
}

Eigen::VectorXd final_logits(const ModelParams& params, std::span<const ItemId> prefix) {
  return logits(params, prefix, prefix.size());
}

std::map<int, double> mean_map(const std::vector<const std::map<int, double>*>& maps) {
  std::map<int, double> out;
  if (maps.empty()) return out;
  for (const auto& [k, _] : *maps.front()) {
    double total = 0.0;
    for (const auto* m : maps) {
      auto it = m->find(k);
      if (it == m->end()) throw ArgumentError("reports have different cutoffs");
      total += it->second;
    }
    out[k] = total / static_cast<double>(maps.size());
  }
  return out;
}

std::map<int, double> diff_map(const std::map<int, double>& a, const std::map<int, double>& b) {
  if (a.size() != b.size()) throw ArgumentError("cutoff mismatch between reports");
  std::map<int, double> out;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end()) throw ArgumentError("cutoff mismatch between reports");
    out[k] = v - it->second;
  }
  return out;
}

nlohmann::json map_json(const std::map<int, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

int rank_in_scores(const Eigen::VectorXd& scores, ItemId item) {
  if (item < 0 || item >= scores.size()) throw ArgumentError("item outside catalog");
  const double s = scores[item];
  int rank = 1;
  for (Eigen::Index v = 0; v < scores.size(); ++v) {
    if (scores[v] > s || (scores[v] == s && v < item)) ++rank;
  }
  return rank;
}

int rank_of_item(const ModelParams& params, std::span<const ItemId> prefix, ItemId item) {
  if (prefix.empty()) throw ArgumentError("prefix must be nonempty");
  if (item < 0 || item >= params.item_count()) throw ArgumentError("item outside catalog");
  return rank_in_scores(final_logits(params, prefix), item);
}

void fill_rank_metrics(const std::vector<int>& ranks, const std::vector<int>& cutoffs, MetricsReport& report) {
  check_cutoffs(cutoffs);
  report.n_users = static_cast<int>(ranks.size());
  const double n = static_cast<double>(ranks.size());
  for (int cut : cutoffs) {
    double hits = 0.0;
    double gain = 0.0;
    for (int r : ranks) {
      if (r <= cut) {
        hits += 1.0;
        gain += 1.0 / std::log2(1.0 + r);
      }
    }
    report.recall[cut] = n > 0 ? hits / n : 0.0;
    report.ndcg[cut] = n > 0 ? gain / n : 0.0;
  }
}

MetricsReport target_metrics(const ModelParams& params, const SplitDataset& dataset, ItemId target,
                             const std::vector<int>& cutoffs, bool exclude_interacted) {
  check_cutoffs(cutoffs);
  if (target < 0 || target >= dataset.item_count()) throw ArgumentError("target outside catalog");
  std::vector<int> users;
  for (int u = 0; u < dataset.user_count(); ++u) {
    const auto& tr = dataset.train[static_cast<std::size_t>(u)];
    if (exclude_interacted && std::find(tr.begin(), tr.end(), target) != tr.end()) continue;
    users.push_back(u);
  }
  if (users.empty()) throw EmptyReportError("no users left to evaluate target " + std::to_string(target));
  auto ranks = parallel_map<int>(users.size(), [&](std::size_t i) {
    return rank_of_item(params, dataset.eval_prefix(users[i]), target);
  });
  MetricsReport report;
  report.target = target;
  fill_rank_metrics(ranks, cutoffs, report);
  return report;
}

MetricsReport rec_metrics(const ModelParams& params, const SplitDataset& dataset, const std::vector<int>& cutoffs,
                          HeldOut split) {
  check_cutoffs(cutoffs);
  if (dataset.user_count() == 0) throw EmptyReportError("no users to evaluate");
  auto ranks = parallel_map<int>(static_cast<std::size_t>(dataset.user_count()), [&](std::size_t u) {
    const auto user = static_cast<UserId>(u);
    if (split == HeldOut::Valid) return rank_of_item(params, dataset.train[u], dataset.valid_item[u]);
    return rank_of_item(params, dataset.eval_prefix(user), dataset.test_item[u]);
  });
  MetricsReport tmp;
  fill_rank_metrics(ranks, cutoffs, tmp);
  MetricsReport report;
  report.hr = tmp.recall;
  report.n_users = tmp.n_users;
  return report;
}

std::map<Bucket, MetricsReport> bucket_report(const ModelParams& params, const SplitDataset& dataset,
                                              const std::vector<ItemId>& targets, const PopularityBuckets& buckets,
                                              const std::vector<int>& cutoffs, bool exclude_interacted) {
  std::map<Bucket, std::vector<MetricsReport>> grouped;
  for (ItemId t : targets) {
    const auto b = buckets.bucket_of(t);
    if (!b) throw InvariantError("target " + std::to_string(t) + " belongs to no popularity bucket");
    grouped[*b].push_back(target_metrics(params, dataset, t, cutoffs, exclude_interacted));
  }
  std::map<Bucket, MetricsReport> out;
  for (auto& [b, reports] : grouped) {
    MetricsReport avg = average_reports(reports);
    avg.bucket = std::string(bucket_name(b));
    if (reports.size() > 1) avg.target.reset();
    out[b] = std::move(avg);
  }
  return out;
}

MetricsReport average_reports(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ArgumentError("nothing to average");
  std::vector<const std::map<int, double>*> rec, nd, hr;
  int users = 0;
  for (const auto& r : reports) {
    rec.push_back(&r.recall);
    nd.push_back(&r.ndcg);
    hr.push_back(&r.hr);
    users = std::max(users, r.n_users);
  }
  MetricsReport out = reports.front();
  out.recall = mean_map(rec);
  out.ndcg = mean_map(nd);
  out.hr = mean_map(hr);
  out.n_users = users;
  return out;
}

MetricsReport delta_vs_clean(const MetricsReport& attacked, const MetricsReport& clean) {
  MetricsReport out = attacked;
  out.method = attacked.method + "-" + (clean.method.empty() ? std::string("clean") : clean.method);
  out.recall = diff_map(attacked.recall, clean.recall);
  out.ndcg = diff_map(attacked.ndcg, clean.ndcg);
  out.hr = diff_map(attacked.hr, clean.hr);
  return out;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["target"] = report.target ? nlohmann::json(*report.target) : nlohmann::json(nullptr);
  j["bucket"] = report.bucket ? nlohmann::json(*report.bucket) : nlohmann::json(nullptr);
  j["recall"] = map_json(report.recall);
  j["ndcg"] = map_json(report.ndcg);
  j["hr"] = map_json(report.hr);
  j["n_users"] = report.n_users;
  return j;
}

}  // namespace seqpoison
