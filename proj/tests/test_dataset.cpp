#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "seqpoison/dataset.hpp"
#include "seqpoison/error.hpp"
#include "support.hpp"

using namespace seqpoison;

TEST(Parse, TwoLines) {
  const Corpus c = parse_sequences("0\t3 1 2 5\n1\t4 4 0");
  ASSERT_EQ(c.sequences.size(), 2u);
  EXPECT_EQ(c.sequences[0].items, (Sequence{3, 1, 2, 5}));
  EXPECT_EQ(c.sequences[1].items, (Sequence{4, 4, 0}));
  EXPECT_EQ(c.item_count, 6);
  EXPECT_EQ(c.sequences[1].user, 1);
}

TEST(Parse, BadTokenNamesLine) {
  try {
    parse_sequences("0\t1 2 3\n1\t4 5 6\n2\t7 a 1\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Parse, TooShort) { EXPECT_THROW(parse_sequences("0\t1 2"), ParseError); }

TEST(Parse, HeaderDeclaresCatalog) {
  const Corpus c = parse_sequences("#items=10\n7\t1 2 3\n");
  EXPECT_EQ(c.item_count, 10);
  EXPECT_EQ(c.user_labels.front(), "7");
  EXPECT_EQ(c.sequences.front().user, 0);
  EXPECT_THROW(parse_sequences("#items=3\n0\t1 2 3\n"), RangeError);
  EXPECT_THROW(parse_sequences("0\t1 -2 3\n"), RangeError);
  EXPECT_THROW(parse_sequences("0\t1 2 3\n#items=5\n"), ParseError);
}

TEST(Parse, RoundTrip) {
  const std::string text = "#items=9\n0\t3 1 2 5\n1\t4 4 0 8\n";
  EXPECT_EQ(format_sequences(parse_sequences(text)), text);
  // Extra whitespace is normalized away.
  EXPECT_EQ(format_sequences(parse_sequences("#items=9\n0\t3  1 2 5 \n1\t4 4 0 8\n\n")), text);
}

TEST(Parse, FileRoundTrip) {
  const auto dir = testing_support::temp_dir("dataset_io");
  const Corpus c = parse_sequences("#items=6\n0\t3 1 2 5\n1\t4 4 0\n");
  write_sequences(dir / "seq.txt", c);
  EXPECT_EQ(format_sequences(load_sequences(dir / "seq.txt")), format_sequences(c));
  EXPECT_THROW(load_sequences(dir / "missing.txt"), IoError);
}

TEST(Split, LeaveTwo) {
  const auto ds = split_leave_two(parse_sequences("0\t3 1 2 5\n1\t7 7 7\n"));
  EXPECT_EQ(ds.train[0], (Sequence{3, 1}));
  EXPECT_EQ(ds.valid_item[0], 2);
  EXPECT_EQ(ds.test_item[0], 5);
  EXPECT_EQ(ds.train[1], (Sequence{7}));
  EXPECT_EQ(ds.valid_item[1], 7);
  EXPECT_EQ(ds.test_item[1], 7);
  EXPECT_EQ(ds.full_sequence(0), (Sequence{3, 1, 2, 5}));
  EXPECT_EQ(ds.eval_prefix(0), (Sequence{3, 1, 2}));
}

TEST(Split, PopularityFromTrainOnly) {
  const auto ds = split_leave_two(parse_sequences("0\t1 2 2 3 4\n1\t2 2 4\n"));
  EXPECT_EQ(ds.catalog.popularity[2], 3);
  EXPECT_EQ(ds.catalog.popularity[3], 0);
  EXPECT_EQ(ds.catalog.popularity[4], 0);
}

TEST(Split, RejectsShort) {
  std::vector<InteractionSequence> seqs{{0, {1, 2}}};
  EXPECT_THROW(split_leave_two(seqs, 3), InvariantError);
}

TEST(Split, ReconstructsAndCountsRandom) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<InteractionSequence> seqs;
    for (int u = 0; u < 15; ++u) seqs.push_back({u, testing_support::random_sequence(gen, 9, 3 + u % 6)});
    const auto ds = split_leave_two(seqs, 9);
    std::int64_t train_total = 0;
    for (int u = 0; u < 15; ++u) {
      EXPECT_EQ(ds.full_sequence(u), seqs[static_cast<std::size_t>(u)].items);
      train_total += static_cast<std::int64_t>(ds.train[static_cast<std::size_t>(u)].size());
    }
    std::int64_t pop_total = 0;
    for (auto c : ds.catalog.popularity) pop_total += c;
    EXPECT_EQ(pop_total, train_total);
  }
}

namespace {

SplitDataset with_counts(const std::vector<int>& counts) {
  SplitDataset ds;
  ds.catalog.item_count = static_cast<int>(counts.size());
  ds.catalog.popularity.assign(counts.begin(), counts.end());
  return ds;
}

}  // namespace

TEST(Buckets, SortedCounts) {
  const auto b = popularity_buckets(with_counts({9, 8, 7, 6, 5, 4, 3, 2, 1, 0}), 0.2, 0.2);
  EXPECT_EQ(b.head, (std::vector<ItemId>{0, 1}));
  EXPECT_EQ(b.tail, (std::vector<ItemId>{8, 9}));
  EXPECT_EQ(b.middle.size(), 6u);
  EXPECT_EQ(b.bucket_of(0), Bucket::Head);
  EXPECT_EQ(b.bucket_of(5), Bucket::Middle);
  EXPECT_EQ(b.bucket_of(9), Bucket::Tail);
}

TEST(Buckets, TieBreakById) {
  const auto b = popularity_buckets(with_counts({3, 3, 3, 3, 3}), 0.2, 0.2);
  EXPECT_EQ(b.head, (std::vector<ItemId>{0}));
  EXPECT_EQ(b.tail, (std::vector<ItemId>{4}));
}

TEST(Buckets, CeilingSizes) {
  const auto b = popularity_buckets(with_counts({1, 2, 3, 4, 5, 6, 7}), 0.2, 0.2);
  EXPECT_EQ(b.head.size(), 2u);
  EXPECT_EQ(b.tail.size(), 2u);
  EXPECT_EQ(b.head, (std::vector<ItemId>{5, 6}));
}

TEST(Buckets, PartitionForManyFractions) {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> cnt(0, 5);
  for (double hf : {0.05, 0.2, 0.33, 0.5}) {
    for (double tf : {0.05, 0.2, 0.4}) {
      if (hf + tf >= 1.0) continue;
      std::vector<int> counts(23);
      for (auto& c : counts) c = cnt(gen);
      const auto b = popularity_buckets(with_counts(counts), hf, tf);
      std::set<ItemId> all;
      for (const auto* part : {&b.head, &b.middle, &b.tail}) all.insert(part->begin(), part->end());
      EXPECT_EQ(all.size(), 23u);
      EXPECT_EQ(b.head.size() + b.middle.size() + b.tail.size(), 23u);
    }
  }
  EXPECT_THROW(popularity_buckets(with_counts({1, 2}), 0.6, 0.5), ArgumentError);
  EXPECT_THROW(popularity_buckets(with_counts({1, 2}), 0.0, 0.5), ArgumentError);
}

TEST(Buckets, Names) {
  for (Bucket b : {Bucket::Head, Bucket::Middle, Bucket::Tail}) EXPECT_EQ(parse_bucket(bucket_name(b)), b);
  EXPECT_THROW(parse_bucket("top"), ArgumentError);
}

TEST(Synthetic, SingleClusterCoversCatalog) {
  SyntheticConfig c;
  c.n_users = 300;
  c.n_items = 12;
  c.n_clusters = 1;
  c.in_cluster_prob = 1.0;
  c.seed = 4;
  const Corpus corpus = generate_synthetic(c);
  std::vector<int> seen(12, 0);
  std::size_t total = 0;
  for (const auto& s : corpus.sequences) {
    for (ItemId v : s.items) {
      ++seen[static_cast<std::size_t>(v)];
      ++total;
    }
  }
  for (int v = 0; v < 12; ++v) {
    EXPECT_NEAR(seen[static_cast<std::size_t>(v)] / static_cast<double>(total), 1.0 / 12, 0.02) << "item " << v;
  }
}

TEST(Synthetic, Deterministic) {
  SyntheticConfig c;
  c.seed = 99;
  EXPECT_EQ(format_sequences(generate_synthetic(c)), format_sequences(generate_synthetic(c)));
  SyntheticConfig other = c;
  other.seed = 100;
  EXPECT_NE(format_sequences(generate_synthetic(c)), format_sequences(generate_synthetic(other)));
}

TEST(Synthetic, InClusterFraction) {
  SyntheticConfig c;  // n=200, m=100, 10 clusters, p=0.8
  c.seed = 2024;
  const Corpus corpus = generate_synthetic(c);
  ASSERT_EQ(corpus.sequences.size(), 200u);
  EXPECT_EQ(corpus.item_count, 100);
  // The home cluster is not stored, so take the cluster holding most of a
  // user's items, which is the home cluster for all but very short sequences.
  std::size_t in = 0, total = 0;
  for (const auto& s : corpus.sequences) {
    std::vector<int> per(10, 0);
    for (ItemId v : s.items) ++per[static_cast<std::size_t>(v / 10)];
    in += static_cast<std::size_t>(*std::max_element(per.begin(), per.end()));
    total += s.items.size();
  }
  EXPECT_NEAR(static_cast<double>(in) / static_cast<double>(total), 0.8 + 0.2 / 10, 0.05);
}

TEST(Synthetic, LengthBounds) {
  SyntheticConfig c;
  c.seq_len_mean = 5.0;
  c.seed = 8;
  for (const auto& s : generate_synthetic(c).sequences) {
    EXPECT_GE(s.items.size(), 3u);
    EXPECT_LE(s.items.size(), 20u);
  }
}

TEST(Synthetic, ConfigValidation) {
  SyntheticConfig c;
  c.n_clusters = 101;
  EXPECT_THROW(generate_synthetic(c), ArgumentError);
  c = SyntheticConfig{};
  c.in_cluster_prob = 0.0;
  EXPECT_THROW(generate_synthetic(c), ArgumentError);
  c = SyntheticConfig{};
  c.n_users = 0;
  EXPECT_THROW(generate_synthetic(c), ArgumentError);
}

TEST(Targets, Sampling) {
  SyntheticConfig c;
  c.seed = 1;
  const auto ds = split_leave_two(generate_synthetic(c));
  const auto t15 = sample_targets(ds, 15, std::nullopt, 3);
  EXPECT_EQ(std::set<ItemId>(t15.begin(), t15.end()).size(), 15u);

  const auto buckets = popularity_buckets(ds);
  const auto tail = sample_targets(ds, 5, Bucket::Tail, 3);
  EXPECT_EQ(std::set<ItemId>(tail.begin(), tail.end()).size(), 5u);
  for (ItemId t : tail) EXPECT_EQ(buckets.bucket_of(t), Bucket::Tail);

  auto all = sample_targets(ds, 100, std::nullopt, 3);
  std::sort(all.begin(), all.end());
  for (int v = 0; v < 100; ++v) EXPECT_EQ(all[static_cast<std::size_t>(v)], v);

  EXPECT_EQ(sample_targets(ds, 15, std::nullopt, 3), t15);
  EXPECT_THROW(sample_targets(ds, 101, std::nullopt, 3), ArgumentError);
  EXPECT_THROW(sample_targets(ds, 21, Bucket::Head, 3), ArgumentError);
}
