#include "seqpoison/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "seqpoison/error.hpp"
#include "seqpoison/parallel.hpp"
#include "seqpoison/random.hpp"

namespace seqpoison {

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("epochs must be nonnegative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must lie in [0, 1)");
  if (batch_size < 1) throw ArgumentError("batch size must be positive");
  if (!(tolerance > 0.0)) throw ArgumentError("tolerance must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ArgumentError("weight decay must be >= 0");
}

Objective mean_objective(const ModelParams& params, const std::vector<Sequence>& seqs) {
  if (seqs.empty()) throw ArgumentError("objective over an empty dataset");
  auto parts = parallel_map<LossGrad>(seqs.size(), [&](std::size_t i) {
    if (seqs[i].size() < 2) return LossGrad{0.0, ParamVector()};
    return loss_and_gradient(params, seqs[i]);
  });
  Objective out{0.0, ParamVector::Zero(params.size())};
  for (const auto& p : parts) {
    if (p.grad.size() == 0) continue;
    out.loss += p.loss;
    out.grad += p.grad;
  }
  const double n = static_cast<double>(seqs.size());
  out.loss /= n;
  out.grad /= n;
  return out;
}

Objective regularized_objective(const ModelParams& params, const std::vector<Sequence>& seqs,
                                double weight_decay) {
  Objective out = mean_objective(params, seqs);
  if (weight_decay > 0.0) {
    out.loss += 0.5 * weight_decay * params.values().squaredNorm();
    out.grad += weight_decay * params.values();
  }
  return out;
}

double mean_loss(const ModelParams& params, const std::vector<Sequence>& seqs) {
  if (seqs.empty()) throw ArgumentError("objective over an empty dataset");
  auto parts = parallel_map<double>(seqs.size(), [&](std::size_t i) {
    return seqs[i].size() < 2 ? 0.0 : sequence_loss(params, seqs[i]);
  });
  return std::accumulate(parts.begin(), parts.end(), 0.0) / static_cast<double>(seqs.size());
}

TrainResult train_sequences(const std::vector<Sequence>& seqs, const ModelParams& init, const TrainConfig& config) {
  config.validate();
  if (seqs.empty()) throw ArgumentError("cannot train on an empty dataset");
  for (const auto& s : seqs) {
    for (ItemId v : s) {
      if (v < 0 || v >= init.item_count()) throw ArgumentError("dataset item outside the model catalog");
    }
  }

  const double wd = config.weight_decay;
  auto record = [&](int epoch, const ModelParams& p, const Objective& obj) {
    const double penalty = 0.5 * wd * p.values().squaredNorm();
    return EpochRecord{epoch, obj.loss - penalty, obj.loss, obj.grad.norm()};
  };

  TrainResult result{init, {}};
  ModelParams params = init;
  Objective obj = regularized_objective(params, seqs, wd);
  if (!std::isfinite(obj.loss)) throw DivergenceError(0, "initial loss is not finite");
  result.log.push_back(record(0, params, obj));
  double best = obj.loss;
  double previous = obj.loss;

  ParamVector velocity = ParamVector::Zero(params.size());
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      auto grads = parallel_map<ParamVector>(count, [&](std::size_t k) {
        const auto& s = seqs[order[start + k]];
        return s.size() < 2 ? ParamVector() : loss_gradient(params, s);
      });
      ParamVector g = ParamVector::Zero(params.size());
      for (const auto& gi : grads) {
        if (gi.size() != 0) g += gi;
      }
      g /= static_cast<double>(count);
      if (wd > 0.0) g += wd * params.values();
      velocity = config.momentum * velocity + g;
      params.values() -= config.learning_rate * velocity;
    }

    obj = regularized_objective(params, seqs, wd);
    if (!std::isfinite(obj.loss) || !params.values().allFinite()) {
      throw DivergenceError(epoch, "mean training loss is not finite");
    }
    result.log.push_back(record(epoch, params, obj));
    if (obj.loss <= best) {
      best = obj.loss;
      result.params = params;
    }
    const double improvement = previous - obj.loss;
    previous = obj.loss;
    if (improvement >= 0.0 && improvement < config.tolerance) break;
  }
  return result;
}

TrainResult train(const SplitDataset& dataset, const ModelParams& init, const TrainConfig& config) {
  if (dataset.user_count() == 0) throw ArgumentError("cannot train on an empty dataset");
  if (init.item_count() != dataset.item_count()) {
    throw ArgumentError("model catalog size " + std::to_string(init.item_count()) + " does not match dataset size " +
                        std::to_string(dataset.item_count()));
  }
  return train_sequences(dataset.train, init, config);
}

TrainResult retrain_replaced(const ModelParams& theta_hat, const SplitDataset& dataset, UserId user,
                             const Sequence& new_seq, const TrainConfig& config) {
  if (user < 0 || user >= dataset.user_count()) throw ArgumentError("unknown user " + std::to_string(user));
  SplitDataset replaced = dataset;
  replaced.train[static_cast<std::size_t>(user)] = new_seq;
  return train(replaced, theta_hat, config);
}

std::string format_train_log(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,mean_train_loss,grad_norm\n";
  for (const auto& r : log) out += fmt::format("{},{:.17g},{:.17g}\n", r.epoch, r.mean_train_loss, r.grad_norm);
  return out;
}

}  // namespace seqpoison
