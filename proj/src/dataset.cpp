#include "seqpoison/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "seqpoison/error.hpp"
#include "seqpoison/io.hpp"
#include "seqpoison/random.hpp"

namespace seqpoison {

namespace {

bool parse_int(std::string_view token, long long& value) {
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc{} && ptr == token.data() + token.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Sequence SplitDataset::eval_prefix(UserId u) const {
  Sequence s = train.at(static_cast<std::size_t>(u));
  s.push_back(valid_item[static_cast<std::size_t>(u)]);
  return s;
}

Sequence SplitDataset::full_sequence(UserId u) const {
  Sequence s = eval_prefix(u);
  s.push_back(test_item[static_cast<std::size_t>(u)]);
  return s;
}

std::string_view bucket_name(Bucket b) {
  switch (b) {
    case Bucket::Head: return "head";
    case Bucket::Middle: return "middle";
    case Bucket::Tail: return "tail";
  }
  return "unknown";
}

Bucket parse_bucket(std::string_view name) {
  if (name == "head") return Bucket::Head;
  if (name == "middle") return Bucket::Middle;
  if (name == "tail") return Bucket::Tail;
  throw ArgumentError("unknown bucket '" + std::string(name) + "'");
}

const std::vector<ItemId>& PopularityBuckets::items(Bucket b) const {
  switch (b) {
    case Bucket::Head: return head;
    case Bucket::Middle: return middle;
    case Bucket::Tail: return tail;
  }
  return middle;
}

std::optional<Bucket> PopularityBuckets::bucket_of(ItemId item) const {
  for (Bucket b : {Bucket::Head, Bucket::Middle, Bucket::Tail}) {
    const auto& v = items(b);
    if (std::find(v.begin(), v.end(), item) != v.end()) return b;
  }
  return std::nullopt;
}

void SyntheticConfig::validate() const {
  if (n_users < 1 || n_items < 1 || n_clusters < 1) throw ArgumentError("synthetic sizes must be positive");
  if (n_clusters > n_items) throw ArgumentError("n_clusters must not exceed n_items");
  if (!(seq_len_mean > 0.0) || !std::isfinite(seq_len_mean)) throw ArgumentError("seq_len_mean must be positive");
  // 1.0 is admitted: with a single cluster it degenerates to uniform sampling.
  if (!(in_cluster_prob > 0.0 && in_cluster_prob <= 1.0)) throw ArgumentError("in_cluster_prob must lie in (0, 1]");
}

Corpus parse_sequences(std::string_view text) {
  Corpus corpus;
  std::optional<long long> declared;
  long long max_seen = -1;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (trim(line).empty()) {
      if (nl == std::string_view::npos) break;
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kHeader = "#items=";
      if (!corpus.sequences.empty() || declared || line.substr(0, kHeader.size()) != kHeader) {
        throw ParseError(line_no, "unexpected comment or header line");
      }
      long long m = 0;
      if (!parse_int(trim(line.substr(kHeader.size())), m) || m < 1) {
        throw ParseError(line_no, "bad #items header");
      }
      declared = m;
      if (nl == std::string_view::npos) break;
      continue;
    }

    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(line_no, "missing tab after user id");
    const std::string_view user_tok = trim(line.substr(0, tab));
    long long user_value = 0;
    if (!parse_int(user_tok, user_value)) throw ParseError(line_no, "non-integer user id '" + std::string(user_tok) + "'");

    InteractionSequence seq;
    seq.user = static_cast<UserId>(corpus.sequences.size());
    std::string_view rest = line.substr(tab + 1);
    std::size_t p = 0;
    while (p < rest.size()) {
      while (p < rest.size() && (rest[p] == ' ' || rest[p] == '\t')) ++p;
      if (p >= rest.size()) break;
      std::size_t q = p;
      while (q < rest.size() && rest[q] != ' ' && rest[q] != '\t') ++q;
      const std::string_view tok = rest.substr(p, q - p);
      long long item = 0;
      if (!parse_int(tok, item)) throw ParseError(line_no, "non-integer item id '" + std::string(tok) + "'");
      if (item < 0) throw RangeError("line " + std::to_string(line_no) + ": negative item id " + std::to_string(item));
      if (declared && item >= *declared) {
        throw RangeError("line " + std::to_string(line_no) + ": item id " + std::to_string(item) +
                         " outside declared catalog of " + std::to_string(*declared));
      }
      if (item > std::numeric_limits<ItemId>::max()) throw RangeError("item id too large");
      max_seen = std::max(max_seen, item);
      seq.items.push_back(static_cast<ItemId>(item));
      p = q;
    }
    if (seq.items.size() < kMinSequenceLength) {
      throw ParseError(line_no, "sequence has " + std::to_string(seq.items.size()) + " items, need at least " +
                                    std::to_string(kMinSequenceLength));
    }
    corpus.user_labels.emplace_back(user_tok);
    corpus.sequences.push_back(std::move(seq));
    if (nl == std::string_view::npos) break;
  }
  corpus.item_count = declared ? static_cast<int>(*declared) : static_cast<int>(max_seen + 1);
  return corpus;
}

Corpus load_sequences(const std::filesystem::path& path) { return parse_sequences(read_file(path)); }

std::string format_sequences(const Corpus& corpus) {
  std::string out = "#items=" + std::to_string(corpus.item_count) + "\n";
  for (std::size_t u = 0; u < corpus.sequences.size(); ++u) {
    out += u < corpus.user_labels.size() ? corpus.user_labels[u] : std::to_string(u);
    out += '\t';
    const auto& items = corpus.sequences[u].items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) out += ' ';
      out += std::to_string(items[i]);
    }
    out += '\n';
  }
  return out;
}

void write_sequences(const std::filesystem::path& path, const Corpus& corpus) {
  write_file_atomic(path, format_sequences(corpus));
}

ItemCatalog count_popularity(const std::vector<Sequence>& train, int item_count) {
  ItemCatalog catalog;
  catalog.item_count = item_count;
  catalog.popularity.assign(static_cast<std::size_t>(item_count), 0);
  for (const auto& seq : train) {
    for (ItemId v : seq) {
      if (v < 0 || v >= item_count) throw RangeError("item id " + std::to_string(v) + " outside catalog");
      ++catalog.popularity[static_cast<std::size_t>(v)];
    }
  }
  return catalog;
}

SplitDataset split_leave_two(const std::vector<InteractionSequence>& sequences, int item_count) {
  if (item_count < 1) throw ArgumentError("item_count must be positive");
  SplitDataset ds;
  ds.train.reserve(sequences.size());
  for (const auto& s : sequences) {
    if (s.items.size() < kMinSequenceLength) {
      throw InvariantError("user " + std::to_string(s.user) + " has fewer than 3 interactions");
    }
    const std::size_t n = s.items.size();
    ds.train.emplace_back(s.items.begin(), s.items.end() - 2);
    ds.valid_item.push_back(s.items[n - 2]);
    ds.test_item.push_back(s.items[n - 1]);
  }
  ds.catalog = count_popularity(ds.train, item_count);
  return ds;
}

SplitDataset split_leave_two(const Corpus& corpus) { return split_leave_two(corpus.sequences, corpus.item_count); }

PopularityBuckets popularity_buckets(const SplitDataset& dataset, double head_frac, double tail_frac) {
  if (!(head_frac > 0.0) || !(tail_frac > 0.0) || !(head_frac + tail_frac < 1.0)) {
    throw ArgumentError("bucket fractions must be positive and sum to less than 1");
  }
  const auto& pop = dataset.catalog.popularity;
  const int m = dataset.catalog.item_count;
  std::vector<ItemId> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
    const auto pa = pop[static_cast<std::size_t>(a)];
    const auto pb = pop[static_cast<std::size_t>(b)];
    return pa != pb ? pa > pb : a < b;
  });
  auto head_n = static_cast<std::size_t>(std::ceil(head_frac * m - 1e-9));
  auto tail_n = static_cast<std::size_t>(std::ceil(tail_frac * m - 1e-9));
  head_n = std::min(head_n, order.size());
  tail_n = std::min(tail_n, order.size() - head_n);

  PopularityBuckets b;
  b.head.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(head_n));
  b.middle.assign(order.begin() + static_cast<std::ptrdiff_t>(head_n),
                  order.end() - static_cast<std::ptrdiff_t>(tail_n));
  b.tail.assign(order.end() - static_cast<std::ptrdiff_t>(tail_n), order.end());
  for (auto* v : {&b.head, &b.middle, &b.tail}) std::sort(v->begin(), v->end());
  return b;
}

Corpus generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int m = config.n_items;
  const int k = config.n_clusters;
  auto cluster_begin = [&](int c) { return static_cast<ItemId>(static_cast<long long>(c) * m / k); };

  const double p_stop = std::min(1.0, 1.0 / config.seq_len_mean);
  const auto max_len = std::max<long long>(kMinSequenceLength, static_cast<long long>(std::floor(4.0 * config.seq_len_mean)));

  Corpus corpus;
  corpus.item_count = m;
  corpus.sequences.reserve(static_cast<std::size_t>(config.n_users));
  for (int u = 0; u < config.n_users; ++u) {
    const int home = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    const ItemId lo = cluster_begin(home);
    const ItemId hi = cluster_begin(home + 1);

    // Geometric length on {1, 2, ...} with mean seq_len_mean, by inversion.
    long long len = 1;
    if (p_stop < 1.0) {
      const double uni = 1.0 - rng.uniform01();  // (0, 1]
      len += static_cast<long long>(std::floor(std::log(uni) / std::log1p(-p_stop)));
    }
    len = std::clamp<long long>(len, kMinSequenceLength, max_len);

    InteractionSequence seq;
    seq.user = u;
    seq.items.reserve(static_cast<std::size_t>(len));
    for (long long t = 0; t < len; ++t) {
      if (rng.bernoulli(config.in_cluster_prob)) {
        seq.items.push_back(lo + static_cast<ItemId>(rng.below(static_cast<std::uint64_t>(hi - lo))));
      } else {
        seq.items.push_back(static_cast<ItemId>(rng.below(static_cast<std::uint64_t>(m))));
      }
    }
    corpus.user_labels.push_back(std::to_string(u));
    corpus.sequences.push_back(std::move(seq));
  }
  return corpus;
}

std::vector<ItemId> sample_targets(const SplitDataset& dataset, int count, std::optional<Bucket> bucket,
                                   std::uint64_t seed, const PopularityBuckets* buckets) {
  std::vector<ItemId> pool;
  if (bucket) {
    if (buckets != nullptr) {
      pool = buckets->items(*bucket);
    } else {
      pool = popularity_buckets(dataset).items(*bucket);
    }
  } else {
    pool.resize(static_cast<std::size_t>(dataset.item_count()));
    std::iota(pool.begin(), pool.end(), 0);
  }
  if (count < 0 || static_cast<std::size_t>(count) > pool.size()) {
    throw ArgumentError("cannot sample " + std::to_string(count) + " targets from a pool of " +
                        std::to_string(pool.size()));
  }
  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace seqpoison
