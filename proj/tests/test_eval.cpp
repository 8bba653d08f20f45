#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "seqpoison/error.hpp"
#include "seqpoison/eval.hpp"
#include "support.hpp"

using namespace seqpoison;

namespace {

// d = 1, every in_embed entry 1, so each logit equals its out_embed entry.
ModelParams fixed_logits(const std::vector<double>& z) {
  const int m = static_cast<int>(z.size());
  ParamVector v(2 * m);
  for (int i = 0; i < m; ++i) {
    v[i] = 1.0;
    v[m + i] = z[static_cast<std::size_t>(i)];
  }
  return ModelParams(m, 1, 0.8, v);
}

MetricsReport from_ranks(const std::vector<int>& ranks, const std::vector<int>& cutoffs) {
  MetricsReport r;
  fill_rank_metrics(ranks, cutoffs, r);
  return r;
}

}  // namespace

TEST(Rank, TieRule) {
  Eigen::VectorXd s(4);
  s << 0.3, 0.1, 0.9, 0.2;
  EXPECT_EQ(rank_in_scores(s, 0), 2);
  EXPECT_EQ(rank_in_scores(s, 2), 1);
  EXPECT_EQ(rank_in_scores(s, 1), 4);
  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(7, 0.5);
  EXPECT_EQ(rank_in_scores(flat, 0), 1);
  EXPECT_EQ(rank_in_scores(flat, 6), 7);
  EXPECT_THROW(rank_in_scores(flat, 7), ArgumentError);

  const auto p = fixed_logits({0.3, 0.1, 0.9, 0.2});
  const Sequence prefix{1, 3};
  EXPECT_EQ(rank_of_item(p, prefix, 0), 2);
  EXPECT_THROW(rank_of_item(p, Sequence{}, 0), ArgumentError);
}

TEST(RankMetrics, HandCases) {
  const auto all_first = from_ranks({1, 1, 1}, {10});
  EXPECT_EQ(all_first.recall.at(10), 1.0);
  EXPECT_EQ(all_first.ndcg.at(10), 1.0);

  const auto mixed = from_ranks({3, 12}, {10});
  EXPECT_EQ(mixed.ndcg.at(10), 0.25);
  EXPECT_EQ(mixed.recall.at(10), 0.5);
  EXPECT_EQ(mixed.n_users, 2);
}

TEST(TargetMetrics, AlwaysFirst) {
  const auto p = fixed_logits({0, 0, 5, 0, 0});
  std::mt19937_64 gen(1);
  const auto ds = testing_support::random_dataset(gen, 12, 5);
  const auto r = target_metrics(p, ds, 2, {10}, false);
  EXPECT_EQ(r.recall.at(10), 1.0);
  EXPECT_EQ(r.ndcg.at(10), 1.0);
  EXPECT_EQ(r.n_users, 12);
  EXPECT_EQ(r.target, 2);
}

TEST(TargetMetrics, ZeroModelFollowsIdOrder) {
  const ModelParams zero(100, 4, 0.8, ParamVector::Zero(800));
  std::mt19937_64 gen(2);
  const auto ds = testing_support::random_dataset(gen, 20, 100);
  for (ItemId t : {0, 9, 10, 55, 99}) {
    const auto r = target_metrics(zero, ds, t, {10}, false);
    EXPECT_EQ(r.recall.at(10), t < 10 ? 1.0 : 0.0) << t;
  }
}

TEST(TargetMetrics, ExcludesInteractedUsers) {
  const auto p = fixed_logits({0, 1, 2, 3});
  const auto ds = split_leave_two(std::vector<InteractionSequence>{{0, {0, 1, 2, 3}}, {1, {0, 2, 0, 1}}}, 4);
  // Item 1 is in user 0's training prefix only.
  EXPECT_EQ(target_metrics(p, ds, 1, {1, 5}).n_users, 1);
  EXPECT_EQ(target_metrics(p, ds, 1, {1, 5}, false).n_users, 2);
  // Both training prefixes hold item 0.
  EXPECT_THROW(target_metrics(p, ds, 0, {10}), EmptyReportError);
  EXPECT_THROW(target_metrics(p, ds, 3, {}), ArgumentError);
}

TEST(TargetMetrics, SingleUserFormula) {
  const auto p = fixed_logits({0.4, 0.8, 0.1, 0.6, 0.2});
  const auto ds = split_leave_two(std::vector<InteractionSequence>{{0, {1, 1, 3, 3}}}, 5);
  // Item 4 has rank 4: items 1, 3 and 0 score higher.
  const auto r = target_metrics(p, ds, 4, {3, 4, 10});
  EXPECT_EQ(r.recall.at(3), 0.0);
  EXPECT_EQ(r.recall.at(4), 1.0);
  EXPECT_EQ(r.ndcg.at(10), 1.0 / std::log2(5.0));
}

TEST(RecMetrics, HeldOutRank) {
  const auto top = fixed_logits({3, 0, 0, 0});
  const auto ds = split_leave_two(std::vector<InteractionSequence>{{0, {1, 2, 0, 0}}, {1, {3, 0, 0}}}, 4);
  EXPECT_EQ(rec_metrics(top, ds, {10}).hr.at(10), 1.0);
  EXPECT_EQ(rec_metrics(top, ds, {10}, HeldOut::Valid).hr.at(10), 1.0);

  std::vector<double> z(12);
  for (int v = 0; v < 12; ++v) z[static_cast<std::size_t>(v)] = 12 - v;
  const auto falling = fixed_logits(z);
  const auto one = split_leave_two(std::vector<InteractionSequence>{{0, {0, 0, 0, 10, 10}}}, 12);
  EXPECT_EQ(rank_of_item(falling, one.eval_prefix(0), 10), 11);
  EXPECT_EQ(rec_metrics(falling, one, {10}).hr.at(10), 0.0);
  EXPECT_EQ(rec_metrics(falling, one, {11}).hr.at(11), 1.0);
}

TEST(Buckets, Averages) {
  MetricsReport a = from_ranks({1}, {10});
  MetricsReport b = from_ranks({1}, {10});
  a.ndcg[10] = 0.2;
  b.ndcg[10] = 0.4;
  EXPECT_NEAR(average_reports({a, b}).ndcg.at(10), 0.3, 1e-15);
  MetricsReport c = from_ranks({1}, {5});
  EXPECT_THROW(average_reports({a, c}), ArgumentError);
  EXPECT_THROW(average_reports({}), ArgumentError);
}

TEST(Buckets, SingleHeadTarget) {
  std::mt19937_64 gen(3);
  const auto ds = testing_support::random_dataset(gen, 30, 10);
  const auto p = testing_support::random_params(gen, 10, 3);
  const auto buckets = popularity_buckets(ds);
  const ItemId head = buckets.head.front();
  const auto per = bucket_report(p, ds, {head}, buckets, {5, 10}, false);
  ASSERT_EQ(per.size(), 1u);
  const auto& r = per.at(Bucket::Head);
  const auto direct = target_metrics(p, ds, head, {5, 10}, false);
  EXPECT_EQ(r.recall, direct.recall);
  EXPECT_EQ(r.ndcg, direct.ndcg);
  EXPECT_EQ(r.bucket, "head");
}

TEST(Delta, Examples) {
  MetricsReport attacked, clean;
  attacked.ndcg[10] = 0.274;
  clean.ndcg[10] = 0.064;
  attacked.recall[10] = 0.5;
  clean.recall[10] = 0.25;
  const auto d = delta_vs_clean(attacked, clean);
  EXPECT_NEAR(d.ndcg.at(10), 0.210, 1e-15);
  const auto back = delta_vs_clean(clean, attacked);
  EXPECT_EQ(back.ndcg.at(10), -d.ndcg.at(10));
  EXPECT_EQ(back.recall.at(10), -d.recall.at(10));
  const auto zero = delta_vs_clean(attacked, attacked);
  EXPECT_EQ(zero.ndcg.at(10), 0.0);
  MetricsReport other;
  other.ndcg[20] = 0.1;
  EXPECT_THROW(delta_vs_clean(attacked, other), ArgumentError);
}

TEST(ReportJson, Schema) {
  auto r = from_ranks({1, 4, 30}, {10, 20});
  r.method = "infattack";
  r.target = 7;
  const auto j = report_to_json(r);
  for (const char* key : {"method", "target", "bucket", "recall", "ndcg", "hr", "n_users"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["method"], "infattack");
  EXPECT_EQ(j["target"], 7);
  EXPECT_TRUE(j["bucket"].is_null());
  EXPECT_TRUE(j["recall"].contains("10"));
  EXPECT_TRUE(j["ndcg"].contains("20"));
  EXPECT_EQ(j["n_users"], 3);
  EXPECT_EQ(j["recall"]["10"].get<double>(), 2.0 / 3.0);
}

TEST(RankMetrics, MonotoneAndBounded) {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> rank(1, 60);
  const std::vector<int> cutoffs{1, 5, 10, 20, 50};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ranks(1 + trial % 17);
    for (auto& r : ranks) r = rank(gen);
    const auto rep = from_ranks(ranks, cutoffs);
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
      const int n = cutoffs[i];
      EXPECT_LE(rep.ndcg.at(n), rep.recall.at(n) + 1e-15);
      EXPECT_GE(rep.ndcg.at(n), rep.recall.at(n) / std::log2(1.0 + n) - 1e-15);
      if (i > 0) {
        EXPECT_GE(rep.recall.at(n), rep.recall.at(cutoffs[i - 1]));
        EXPECT_GE(rep.ndcg.at(n), rep.ndcg.at(cutoffs[i - 1]));
      }
    }
    std::shuffle(ranks.begin(), ranks.end(), gen);
    const auto again = from_ranks(ranks, cutoffs);
    for (int n : cutoffs) EXPECT_NEAR(again.ndcg.at(n), rep.ndcg.at(n), 1e-15);
  }
}
