#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqpoison/dataset.hpp"
#include "seqpoison/model.hpp"

namespace seqpoison {

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.1;
  double momentum = 0.9;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  // L2 penalty (weight_decay / 2) * |theta|^2 added to the mean loss. Without
  // it the loss has no finite minimizer and the embeddings grow forever.
  double weight_decay = 1e-3;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_train_loss = 0.0;  // data term only
  double objective = 0.0;        // data term plus the L2 penalty
  double grad_norm = 0.0;        // of the objective
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;  // epoch 0 is the initial state
};

// Mean of sequence_loss over all sequences. Sequences with fewer than two
// items carry no prediction target and contribute zero, but still count in
// the denominator, so the objective is (1/n) * sum over every user.
struct Objective {
  double loss = 0.0;
  ParamVector grad;
};
Objective mean_objective(const ModelParams& params, const std::vector<Sequence>& seqs);
// mean_objective plus (weight_decay / 2) * |theta|^2.
Objective regularized_objective(const ModelParams& params, const std::vector<Sequence>& seqs, double weight_decay);
double mean_loss(const ModelParams& params, const std::vector<Sequence>& seqs);

// Mini-batch SGD with momentum over shuffled users. Stops after `epochs`
// passes, or once an epoch lowers the objective by less than `tolerance`.
// Epochs that raise the objective (momentum overshoot) do not stop training;
// the returned parameters are the best epoch-end iterate seen.
TrainResult train_sequences(const std::vector<Sequence>& seqs, const ModelParams& init, const TrainConfig& config);
TrainResult train(const SplitDataset& dataset, const ModelParams& init, const TrainConfig& config);

// Warm-starts from theta_hat on the dataset with user's prefix replaced.
TrainResult retrain_replaced(const ModelParams& theta_hat, const SplitDataset& dataset, UserId user,
                             const Sequence& new_seq, const TrainConfig& config);

// CSV with header `epoch,mean_train_loss,grad_norm`.
std::string format_train_log(const std::vector<EpochRecord>& log);

}  // namespace seqpoison
