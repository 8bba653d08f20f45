#include "seqpoison/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "seqpoison/error.hpp"
#include "seqpoison/io.hpp"
#include "seqpoison/random.hpp"

namespace seqpoison {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ArgumentError(fmt::format("{}: cannot parse '{}' as a number", key, text));
  }
  return value;
}

int parse_int(std::string_view key, std::string_view text) { return parse_number<int>(key, text); }

double parse_real(std::string_view key, std::string_view text) {
  const double v = parse_number<double>(key, text);
  if (!std::isfinite(v)) throw ArgumentError(fmt::format("{}: value must be finite", key));
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ArgumentError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ArgumentError(message);
}

std::string format_real(double v) { return fmt::format("{:g}", v); }

double mean_length(const Corpus& corpus) {
  if (corpus.sequences.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : corpus.sequences) total += static_cast<double>(s.items.size());
  return total / static_cast<double>(corpus.sequences.size());
}

fs::path require_artifact(const fs::path& out, const char* name) {
  fs::path p = out / name;
  if (!fs::exists(p)) throw IoError("missing artifact " + p.string());
  return p;
}

void ensure_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());
}

const std::string& single_method(const ExperimentConfig& config) {
  if (config.methods.size() != 1) throw ArgumentError("attack.method must name exactly one method for this command");
  return config.methods.front();
}

}  // namespace

void ExperimentConfig::validate() const {
  synthetic.validate();
  train.validate();
  require(dim >= 1, "model.dim must be positive");
  require(decay > 0.0 && decay <= 1.0, "model.decay must lie in (0, 1]");
  require(init_scale >= 0.0, "model.init_scale must be >= 0");
  require(!methods.empty(), "attack.method is empty");
  for (const auto& m : methods) check_method(m);
  require(!K || *K >= 0, "attack.K must be >= 0");
  require(lambda >= 0.0, "attack.lambda must be >= 0");
  require(!target || *target >= 0, "attack.target must be >= 0");
  require(targets_count >= 1, "attack.targets_count must be positive");
  require(target_prob >= 0.0 && target_prob <= 1.0, "attack.target_prob must lie in [0, 1]");
  require(lissa_depth >= 0, "lissa.depth must be >= 0");
  require(lissa_repeats >= 1, "lissa.repeats must be positive");
  require(!lissa_scale || *lissa_scale > 0.0, "lissa.scale must be positive");
  require(!cutoffs.empty(), "eval.cutoffs is empty");
  for (int c : cutoffs) require(c >= 1, "eval.cutoffs must be positive");
}

void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
  if (key == "data.path") {
    c.data_path = std::string(value);
  } else if (key == "data.synthetic.n_users") {
    c.synthetic.n_users = parse_int(key, value);
  } else if (key == "data.synthetic.n_items") {
    c.synthetic.n_items = parse_int(key, value);
  } else if (key == "data.synthetic.n_clusters") {
    c.synthetic.n_clusters = parse_int(key, value);
  } else if (key == "data.synthetic.seq_len_mean") {
    c.synthetic.seq_len_mean = parse_real(key, value);
  } else if (key == "data.synthetic.in_cluster_prob") {
    c.synthetic.in_cluster_prob = parse_real(key, value);
  } else if (key == "model.dim") {
    c.dim = parse_int(key, value);
  } else if (key == "model.decay") {
    c.decay = parse_real(key, value);
  } else if (key == "model.init_scale") {
    c.init_scale = parse_real(key, value);
  } else if (key == "train.epochs") {
    c.train.epochs = parse_int(key, value);
  } else if (key == "train.lr") {
    c.train.learning_rate = parse_real(key, value);
  } else if (key == "train.momentum") {
    c.train.momentum = parse_real(key, value);
  } else if (key == "train.batch") {
    c.train.batch_size = parse_int(key, value);
  } else if (key == "train.tolerance") {
    c.train.tolerance = parse_real(key, value);
  } else if (key == "train.weight_decay") {
    c.train.weight_decay = parse_real(key, value);
  } else if (key == "attack.method") {
    c.methods.clear();
    for (auto m : split_list(value)) {
      check_method(m);
      c.methods.emplace_back(m);
    }
  } else if (key == "attack.K") {
    if (value == "auto") {
      c.K.reset();
    } else {
      c.K = parse_int(key, value);
    }
  } else if (key == "attack.lambda") {
    c.lambda = parse_real(key, value);
  } else if (key == "attack.target") {
    if (value == "none") {
      c.target.reset();
    } else {
      c.target = parse_int(key, value);
    }
  } else if (key == "attack.targets_count") {
    c.targets_count = parse_int(key, value);
  } else if (key == "attack.target_bucket") {
    if (value == "all") {
      c.target_bucket.reset();
    } else {
      c.target_bucket = parse_bucket(value);
    }
  } else if (key == "attack.selection") {
    c.selection = parse_selection(value);
  } else if (key == "attack.target_prob") {
    c.target_prob = parse_real(key, value);
  } else if (key == "lissa.depth") {
    c.lissa_depth = parse_int(key, value);
  } else if (key == "lissa.repeats") {
    c.lissa_repeats = parse_int(key, value);
  } else if (key == "lissa.scale") {
    if (value == "auto") {
      c.lissa_scale.reset();
    } else {
      c.lissa_scale = parse_real(key, value);
    }
  } else if (key == "eval.cutoffs") {
    c.cutoffs.clear();
    for (auto v : split_list(value)) c.cutoffs.push_back(parse_int(key, v));
  } else if (key == "eval.exclude_interacted") {
    c.exclude_interacted = parse_bool(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw ArgumentError(fmt::format("unknown config key '{}'", key));
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key");
    if (!seen.insert(std::string(key)).second) throw ParseError(line_no, fmt::format("key '{}' given twice", key));
    try {
      set_config_value(config, key, value);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const fs::path& path) { return parse_config(read_file(path)); }

std::uint64_t stage_seed(const ExperimentConfig& config, Stage stage) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stage));
}

void check_method(std::string_view method) {
  if (std::find(std::begin(kMethods), std::end(kMethods), method) == std::end(kMethods)) {
    throw ArgumentError(fmt::format("unknown attack method '{}'", method));
  }
}

Corpus load_corpus(const ExperimentConfig& config) {
  if (!config.data_path.empty()) return load_sequences(config.data_path);
  SyntheticConfig sc = config.synthetic;
  sc.seed = stage_seed(config, Stage::Data);
  return generate_synthetic(sc);
}

int resolve_K(const ExperimentConfig& config, const Corpus& corpus) {
  if (config.K) return *config.K;
  return mean_length(corpus) > 100.0 ? 2 : 1;
}

ModelParams fresh_model(const ExperimentConfig& config, int item_count) {
  return init_params(item_count, config.dim, config.init_scale, config.decay, stage_seed(config, Stage::Init));
}

TrainConfig train_config(const ExperimentConfig& config) {
  TrainConfig tc = config.train;
  tc.seed = stage_seed(config, Stage::Train);
  return tc;
}

std::vector<ItemId> resolve_targets(const ExperimentConfig& config, const SplitDataset& dataset) {
  if (config.target) {
    if (*config.target >= dataset.item_count()) {
      throw ArgumentError(fmt::format("attack.target {} outside catalog of {}", *config.target, dataset.item_count()));
    }
    return {*config.target};
  }
  return sample_targets(dataset, config.targets_count, config.target_bucket, stage_seed(config, Stage::Targets));
}

AttackConfig attack_config(const ExperimentConfig& config, ItemId target, int K, const ModelParams& theta_hat,
                           const SplitDataset& dataset) {
  AttackConfig a;
  a.K = K;
  a.damping = config.lambda;
  a.weight_decay = config.train.weight_decay;
  a.inverse = config.lissa_depth == 0 ? InverseMethod::Direct : InverseMethod::Lissa;
  a.lissa.depth = std::max(config.lissa_depth, 1);
  a.lissa.repeats = config.lissa_repeats;
  if (config.lissa_scale) {
    a.lissa.scale = *config.lissa_scale;
  } else if (a.inverse == InverseMethod::Lissa && K > 0) {
    a.lissa.scale = suggest_lissa_scale(theta_hat, dataset.train, a.shift());
  }
  a.lissa.seed = derive_seed(stage_seed(config, Stage::Lissa), static_cast<std::uint64_t>(target));
  a.selection = config.selection;
  a.target = target;
  a.seed = derive_seed(stage_seed(config, Stage::Attack), static_cast<std::uint64_t>(target));
  return a;
}

PollutedDataset run_attack(std::string_view method, const ModelParams& theta_hat, const SplitDataset& dataset,
                           const AttackConfig& attack, double target_prob, std::vector<InfluenceRecord>* dump) {
  check_method(method);
  if (method == "infattack") return infattack(theta_hat, dataset, attack, dump);
  if (method == "random") return random_alter(dataset, attack, target_prob);
  if (method == "simalter") return sim_alter(theta_hat, dataset, attack);
  if (method == "replace") return replace_attack(theta_hat, dataset, attack);
  return ninf_variant(dataset, attack);
}

MetricsReport full_report(const ModelParams& params, const SplitDataset& dataset, ItemId target,
                          const ExperimentConfig& config, std::string method) {
  MetricsReport report = target_metrics(params, dataset, target, config.cutoffs, config.exclude_interacted);
  report.hr = rec_metrics(params, dataset, config.cutoffs, HeldOut::Test).hr;
  report.method = std::move(method);
  return report;
}

std::string cmd_gen_data(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  SyntheticConfig sc = config.synthetic;
  sc.seed = stage_seed(config, Stage::Data);
  const Corpus corpus = generate_synthetic(sc);
  ensure_dir(out);
  write_sequences(out / "data.txt", corpus);
  return fmt::format("users {} items {} mean_length {:.4f}", corpus.sequences.size(), corpus.item_count,
                     mean_length(corpus));
}

std::string cmd_train(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  const Corpus corpus = load_corpus(config);
  const SplitDataset dataset = split_leave_two(corpus);
  const TrainResult result = train(dataset, fresh_model(config, dataset.item_count()), train_config(config));
  ensure_dir(out);
  save_checkpoint(out / "model.bin", result.params);
  write_file_atomic(out / "train_log.csv", format_train_log(result.log));
  const auto& last = result.log.back();
  return fmt::format("epochs {} mean_train_loss {:.6f} grad_norm {:.3e}", last.epoch, last.mean_train_loss,
                     last.grad_norm);
}

std::string cmd_attack(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  const std::string& method = single_method(config);
  const Corpus corpus = load_corpus(config);
  const SplitDataset dataset = split_leave_two(corpus);
  const ModelParams theta_hat = load_checkpoint(require_artifact(out, "model.bin"));
  if (theta_hat.item_count() != dataset.item_count()) throw ArgumentError("checkpoint does not match the corpus");
  const ItemId target = resolve_targets(config, dataset).front();
  const int K = resolve_K(config, corpus);
  const AttackConfig attack = attack_config(config, target, K, theta_hat, dataset);

  std::vector<InfluenceRecord> dump;
  const PollutedDataset polluted = run_attack(method, theta_hat, dataset, attack, config.target_prob, &dump);
  write_sequences(out / "polluted.txt", polluted_corpus(dataset, polluted, corpus.user_labels));
  write_file_atomic(out / "injection_log.csv", format_injection_log(polluted));
  if (method == "infattack") write_file_atomic(out / "influence.csv", format_influence_csv(dump));
  const nlohmann::json meta = {{"method", method},
                               {"target", target},
                               {"K", K},
                               {"lambda", config.lambda},
                               {"selection", std::string(selection_name(config.selection))}};
  write_file_atomic(out / "attack_meta.json", meta.dump(2) + "\n");
  std::size_t injected = 0;
  for (const auto& u : polluted.injections) injected += u.size();
  return fmt::format("method {} target {} K {} injected {}", method, target, K, injected);
}

std::string cmd_evaluate(const ExperimentConfig& config, const fs::path& out) {
  config.validate();
  const Corpus corpus = load_corpus(config);
  const SplitDataset dataset = split_leave_two(corpus);
  const ModelParams clean_model = load_checkpoint(require_artifact(out, "model.bin"));
  const Corpus polluted = load_sequences(require_artifact(out, "polluted.txt"));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(require_artifact(out, "attack_meta.json")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("attack_meta.json: ") + e.what());
  }
  if (!meta.contains("target") || !meta["target"].is_number_integer() || !meta.contains("method") ||
      !meta["method"].is_string()) {
    throw FormatError("attack_meta.json lacks method or target");
  }
  const auto target = meta["target"].get<ItemId>();
  const auto method = meta["method"].get<std::string>();

  const SplitDataset polluted_split = split_leave_two(polluted);
  if (polluted_split.user_count() != dataset.user_count() || polluted_split.item_count() != dataset.item_count()) {
    throw ArgumentError("polluted corpus does not match the clean corpus");
  }
  const TrainResult retrained =
      train(polluted_split, fresh_model(config, polluted_split.item_count()), train_config(config));

  const MetricsReport clean = full_report(clean_model, dataset, target, config, "clean");
  const MetricsReport attacked = full_report(retrained.params, dataset, target, config, method);
  const MetricsReport delta = delta_vs_clean(attacked, clean);

  write_file_atomic(out / "report.json",
                    nlohmann::json::array({report_to_json(clean), report_to_json(attacked)}).dump(2) + "\n");
  write_file_atomic(out / "delta.json", report_to_json(delta).dump(2) + "\n");
  const int c = config.cutoffs.front();
  return fmt::format("target {} NDCG@{} clean {:.4f} {} {:.4f} HR@{} clean {:.4f} {} {:.4f}", target, c,
                     clean.ndcg.at(c), method, attacked.ndcg.at(c), c, clean.hr.at(c), method, attacked.hr.at(c));
}

SweepAxis parse_axis(std::string_view name) {
  if (name == "K") return SweepAxis::K;
  if (name == "lambda") return SweepAxis::Lambda;
  throw ArgumentError(fmt::format("unknown sweep axis '{}' (expected K or lambda)", name));
}

std::vector<double> parse_values(std::string_view list) {
  std::vector<double> out;
  if (trim(list).empty()) throw ArgumentError("sweep needs at least one value");
  for (auto v : split_list(list)) out.push_back(parse_real("--values", v));
  return out;
}

std::string cmd_sweep(const ExperimentConfig& config, const fs::path& out, SweepAxis axis,
                      const std::vector<double>& values) {
  config.validate();
  if (values.empty()) throw ArgumentError("sweep needs at least one value");
  for (double v : values) {
    if (axis == SweepAxis::K) {
      require(v >= 0.0 && v == std::floor(v), "K values must be nonnegative integers");
    } else {
      require(v >= 0.0, "lambda values must be >= 0");
    }
  }
  const Corpus corpus = load_corpus(config);
  const SplitDataset dataset = split_leave_two(corpus);
  const PopularityBuckets buckets = popularity_buckets(dataset);
  const TrainConfig tc = train_config(config);
  const ModelParams theta_hat = train(dataset, fresh_model(config, dataset.item_count()), tc).params;
  const std::vector<ItemId> targets = resolve_targets(config, dataset);

  std::string csv = "method,K,lambda,target,bucket,metric,cutoff,value\n";
  auto emit = [&](const MetricsReport& r, int K, double lambda, ItemId target) {
    const auto b = buckets.bucket_of(target);
    const std::string bucket = b ? std::string(bucket_name(*b)) : std::string();
    const std::pair<const char*, const std::map<int, double>*> metrics[] = {
        {"recall", &r.recall}, {"ndcg", &r.ndcg}, {"hr", &r.hr}};
    for (const auto& [name, values_by_cut] : metrics) {
      for (const auto& [cut, value] : *values_by_cut) {
        csv += fmt::format("{},{},{},{},{},{},{},{:.17g}\n", r.method, K, format_real(lambda), target, bucket, name,
                           cut, value);
      }
    }
  };

  for (ItemId target : targets) {
    const MetricsReport clean = full_report(theta_hat, dataset, target, config, "clean");
    for (double v : values) {
      ExperimentConfig setting = config;
      if (axis == SweepAxis::K) {
        setting.K = static_cast<int>(v);
      } else {
        setting.lambda = v;
      }
      const int K = resolve_K(setting, corpus);
      emit(clean, K, setting.lambda, target);
      const AttackConfig attack = attack_config(setting, target, K, theta_hat, dataset);
      for (const auto& method : setting.methods) {
        const PollutedDataset polluted = run_attack(method, theta_hat, dataset, attack, setting.target_prob);
        const SplitDataset attacked_split = apply_pollution(dataset, polluted);
        const ModelParams retrained = train(attacked_split, fresh_model(setting, dataset.item_count()), tc).params;
        emit(full_report(retrained, dataset, target, setting, method), K, setting.lambda, target);
      }
    }
  }
  ensure_dir(out);
  write_file_atomic(out / "sweep.csv", csv);
  return fmt::format("targets {} settings {} methods {}", targets.size(), values.size(), config.methods.size());
}

}  // namespace seqpoison
