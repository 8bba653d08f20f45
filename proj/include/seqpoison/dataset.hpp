#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqpoison {

using ItemId = std::int32_t;
using UserId = std::int32_t;
using Sequence = std::vector<ItemId>;

inline constexpr std::size_t kMinSequenceLength = 3;

struct InteractionSequence {
  UserId user = 0;
  Sequence items;
};

// Result of reading a sequence file. Users are re-indexed densely in file
// order; the labels found in the file are kept in user_labels for reporting.
struct Corpus {
  std::vector<InteractionSequence> sequences;
  int item_count = 0;
  std::vector<std::string> user_labels;
};

struct ItemCatalog {
  int item_count = 0;
  std::vector<std::int64_t> popularity;  // training-split interaction counts
};

// Leave-last-two split. train[u] is the training prefix of user u.
struct SplitDataset {
  std::vector<Sequence> train;
  std::vector<ItemId> valid_item;
  std::vector<ItemId> test_item;
  ItemCatalog catalog;

  int user_count() const { return static_cast<int>(train.size()); }
  int item_count() const { return catalog.item_count; }

  // train ++ [valid]; what the model sees when predicting the test item.
  Sequence eval_prefix(UserId u) const;
  // train ++ [valid, test]; the original sequence.
  Sequence full_sequence(UserId u) const;
};

enum class Bucket { Head, Middle, Tail };

std::string_view bucket_name(Bucket b);
Bucket parse_bucket(std::string_view name);

struct PopularityBuckets {
  std::vector<ItemId> head;
  std::vector<ItemId> middle;
  std::vector<ItemId> tail;

  const std::vector<ItemId>& items(Bucket b) const;
  std::optional<Bucket> bucket_of(ItemId item) const;
};

struct SyntheticConfig {
  int n_users = 200;
  int n_items = 100;
  int n_clusters = 10;
  double seq_len_mean = 10.0;
  double in_cluster_prob = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Parses the tab-separated sequence format; see README for the grammar.
Corpus parse_sequences(std::string_view text);
Corpus load_sequences(const std::filesystem::path& path);

std::string format_sequences(const Corpus& corpus);
// Writes through a temporary file and renames on success.
void write_sequences(const std::filesystem::path& path, const Corpus& corpus);

SplitDataset split_leave_two(const std::vector<InteractionSequence>& sequences, int item_count);
SplitDataset split_leave_two(const Corpus& corpus);

// Rebuilds catalog popularity from the current training prefixes.
ItemCatalog count_popularity(const std::vector<Sequence>& train, int item_count);

PopularityBuckets popularity_buckets(const SplitDataset& dataset, double head_frac = 0.2, double tail_frac = 0.2);

Corpus generate_synthetic(const SyntheticConfig& config);

std::vector<ItemId> sample_targets(const SplitDataset& dataset, int count, std::optional<Bucket> bucket,
                                   std::uint64_t seed, const PopularityBuckets* buckets = nullptr);

}  // namespace seqpoison
