#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "seqpoison/error.hpp"
#include "seqpoison/model.hpp"
#include "seqpoison/oracle.hpp"
#include "seqpoison/parallel.hpp"
#include "seqpoison/trainer.hpp"
#include "support.hpp"

using namespace seqpoison;

namespace {

SplitDataset small_dataset(std::uint64_t seed, int n = 30, int m = 12) {
  std::mt19937_64 gen(seed);
  return testing_support::random_dataset(gen, n, m, 4, 9);
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInit) {
  const auto ds = small_dataset(1);
  const auto init = init_params(12, 4, 0.1, 0.8, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train(ds, init, cfg);
  EXPECT_EQ(r.params, init);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].epoch, 0);
}

TEST(Train, ZeroLearningRateKeepsInit) {
  const auto ds = small_dataset(2);
  const auto init = init_params(12, 4, 0.1, 0.8, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.0;
  EXPECT_EQ(train(ds, init, cfg).params, init);
}

TEST(Train, MemorizesRepeatedItem) {
  // Train prefix is [5,5,5,5].
  const auto ds = split_leave_two(std::vector<InteractionSequence>{{0, {5, 5, 5, 5, 5, 5}}}, 8);
  ASSERT_EQ(ds.train[0], (Sequence{5, 5, 5, 5}));
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.batch_size = 1;
  cfg.tolerance = 1e-9;
  const auto r = train(ds, init_params(8, 4, 0.1, 0.8, 11), cfg);
  for (std::size_t t = 1; t < 4; ++t) {
    const auto z = logits(r.params, ds.train[0], t);
    const double p5 = std::exp(z[5] - z.maxCoeff()) / (z.array() - z.maxCoeff()).exp().sum();
    EXPECT_GE(p5, 0.9) << "position " << t;
  }
}

TEST(Train, LossDecreases) {
  const auto ds = small_dataset(3);
  const auto init = init_params(12, 4, 0.1, 0.8, 5);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  const auto r = train(ds, init, cfg);
  EXPECT_LT(regularized_objective(r.params, ds.train, cfg.weight_decay).loss, r.log.front().objective);
  EXPECT_LT(mean_loss(r.params, ds.train), mean_loss(init, ds.train));
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    EXPECT_LE(r.log[i].objective, r.log[i - 1].objective + 1e-3) << "epoch " << i;
  }
}

TEST(Train, DeterministicAndThreadInvariant) {
  const auto ds = small_dataset(4, 80);
  const auto init = init_params(12, 4, 0.1, 0.8, 5);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.seed = 99;
  const auto a = train(ds, init, cfg).params;
  const auto b = train(ds, init, cfg).params;
  EXPECT_EQ(a, b);
  ModelParams c = a;
  {
    ThreadLimit one(1);
    c = train(ds, init, cfg).params;
  }
  EXPECT_EQ(a, c);
  cfg.seed = 100;
  EXPECT_NE(a, train(ds, init, cfg).params);
}

TEST(Train, RejectsBadInput) {
  const auto ds = small_dataset(5);
  TrainConfig cfg;
  EXPECT_THROW(train(ds, init_params(11, 4, 0.1, 0.8, 1), cfg), ArgumentError);
  cfg.batch_size = 0;
  EXPECT_THROW(train(ds, init_params(12, 4, 0.1, 0.8, 1), cfg), ArgumentError);
  cfg = TrainConfig{};
  cfg.weight_decay = -1.0;
  EXPECT_THROW(train(ds, init_params(12, 4, 0.1, 0.8, 1), cfg), ArgumentError);
}

TEST(Train, HugeStepDiverges) {
  const auto ds = small_dataset(6);
  TrainConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.epochs = 50;
  try {
    train(ds, init_params(12, 4, 0.5, 0.8, 1), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Objective, RegularizedGradientMatchesDifferences) {
  std::mt19937_64 gen(7);
  const auto ds = testing_support::random_dataset(gen, 6, 5, 3, 7);
  const auto p = testing_support::random_params(gen, 5, 3);
  const double wd = 0.05;
  const auto obj = regularized_objective(p, ds.train, wd);
  const auto fd = oracle::fd_gradient(
      [&](const Eigen::VectorXd& x) { return regularized_objective(p.with_values(x), ds.train, wd).loss; },
      p.values());
  EXPECT_LT(testing_support::rel_err(obj.grad, fd), 1e-7);
  const auto plain = mean_objective(p, ds.train);
  EXPECT_NEAR(obj.loss - plain.loss, 0.5 * wd * p.values().squaredNorm(), 1e-12);
}

TEST(Objective, ShortSequencesCountInDenominator) {
  const auto p = init_params(4, 2, 0.3, 0.8, 2);
  const std::vector<Sequence> seqs{{0, 1, 2}, {3}};
  EXPECT_NEAR(mean_loss(p, seqs), 0.5 * sequence_loss(p, seqs[0]), 1e-15);
}

TEST(TrainLog, CsvLayout) {
  const auto ds = small_dataset(8);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.tolerance = 1e-12;
  const auto r = train(ds, init_params(12, 4, 0.1, 0.8, 1), cfg);
  const auto csv = format_train_log(r.log);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,mean_train_loss,grad_norm");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind(std::to_string(rows) + ",", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, static_cast<int>(r.log.size()));
  EXPECT_EQ(rows, 4);
}

TEST(Retrain, IdenticalSequenceStaysNearOptimum) {
  const auto ds = small_dataset(9, 20, 10);
  TrainConfig cfg;
  cfg.epochs = 3000;
  cfg.batch_size = 20;
  cfg.learning_rate = 0.5;
  cfg.tolerance = 1e-12;
  cfg.weight_decay = 0.01;
  const auto theta = train(ds, init_params(10, 3, 0.1, 0.8, 4), cfg);
  const double final_grad = regularized_objective(theta.params, ds.train, cfg.weight_decay).grad.norm();
  const auto again = retrain_replaced(theta.params, ds, 3, ds.train[3], cfg).params;
  EXPECT_LE((again.values() - theta.params.values()).norm(), 10 * cfg.learning_rate * final_grad + 1e-12);
  EXPECT_THROW(retrain_replaced(theta.params, ds, 20, ds.train[0], cfg), ArgumentError);
}
