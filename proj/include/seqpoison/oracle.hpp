#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "seqpoison/dataset.hpp"
#include "seqpoison/model.hpp"
#include "seqpoison/trainer.hpp"

namespace seqpoison::oracle {

// One verification outcome. For vector quantities estimate/truth hold L2
// norms and the errors are norms of the difference.
struct OracleReport {
  std::string quantity;
  double estimate = 0.0;
  double truth = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
  double tolerance = 0.0;
  std::string norm = "relative";  // which error the tolerance applies to
  bool pass = false;
};

OracleReport compare_vectors(std::string quantity, const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                             double tolerance, bool relative = true);
OracleReport compare_scalars(std::string quantity, double estimate, double truth, double tolerance,
                             bool relative = true);
nlohmann::json to_json(const OracleReport& report);

inline constexpr double kDefaultStep = 1e-5;

// Central differences of f at x, one coordinate at a time.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double step = kDefaultStep);
// Central differences of sequence_loss.
ParamVector fd_gradient(const ModelParams& params, const Sequence& seq, double step = kDefaultStep);

// Central differences of the analytic mean-loss gradient, symmetrized.
Eigen::MatrixXd fd_hessian(const ModelParams& params, const std::vector<Sequence>& seqs, double step = kDefaultStep,
                           std::size_t cap = kDenseParamCap);

// Ascending eigenvalues of dense_hessian.
Eigen::VectorXd hessian_spectrum(const ModelParams& params, const std::vector<Sequence>& seqs,
                                 std::size_t cap = kDenseParamCap);

// L_atk after warm-start retraining with user's prefix replaced by x_pol,
// minus L_atk at theta_hat. Both losses use the clean dataset.
double true_influence(const ModelParams& theta_hat, const SplitDataset& dataset, UserId user, const Sequence& x_pol,
                      ItemId target, const TrainConfig& config);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace seqpoison::oracle
