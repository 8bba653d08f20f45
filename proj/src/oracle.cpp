#include "seqpoison/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "seqpoison/error.hpp"
#include "seqpoison/influence.hpp"
#include "seqpoison/parallel.hpp"

namespace seqpoison::oracle {

OracleReport compare_vectors(std::string quantity, const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                             double tolerance, bool relative) {
  if (estimate.size() != truth.size()) throw ArgumentError("oracle comparison length mismatch");
  OracleReport r;
  r.quantity = std::move(quantity);
  r.estimate = estimate.norm();
  r.truth = truth.norm();
  r.abs_error = (estimate - truth).norm();
  r.rel_error = r.truth > 0.0 ? r.abs_error / r.truth : (r.abs_error == 0.0 ? 0.0 : INFINITY);
  r.tolerance = tolerance;
  r.norm = relative ? "relative-l2" : "absolute-l2";
  r.pass = (relative ? r.rel_error : r.abs_error) <= tolerance;
  return r;
}

OracleReport compare_scalars(std::string quantity, double estimate, double truth, double tolerance, bool relative) {
  OracleReport r;
  r.quantity = std::move(quantity);
  r.estimate = estimate;
  r.truth = truth;
  r.abs_error = std::abs(estimate - truth);
  r.rel_error = truth != 0.0 ? r.abs_error / std::abs(truth) : (r.abs_error == 0.0 ? 0.0 : INFINITY);
  r.tolerance = tolerance;
  r.norm = relative ? "relative" : "absolute";
  r.pass = (relative ? r.rel_error : r.abs_error) <= tolerance;
  return r;
}

nlohmann::json to_json(const OracleReport& r) {
  return {{"quantity", r.quantity}, {"estimate", r.estimate},   {"truth", r.truth},
          {"abs_error", r.abs_error}, {"rel_error", r.rel_error}, {"tolerance", r.tolerance},
          {"norm", r.norm},           {"pass", r.pass}};
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double step) {
  if (!(step > 0.0)) throw ArgumentError("finite-difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

ParamVector fd_gradient(const ModelParams& params, const Sequence& seq, double step) {
  const auto f = [&](const Eigen::VectorXd& theta) { return sequence_loss(params.with_values(theta), seq); };
  return fd_gradient(f, params.values(), step);
}

Eigen::MatrixXd fd_hessian(const ModelParams& params, const std::vector<Sequence>& seqs, double step,
                           std::size_t cap) {
  if (static_cast<std::size_t>(params.size()) > cap) throw RefusalError("finite-difference Hessian refused above cap");
  const Eigen::Index P = params.size();
  auto grad_at = [&](const Eigen::VectorXd& theta) {
    const ModelParams p = params.with_values(theta);
    ParamVector g = ParamVector::Zero(P);
    for (const auto& s : seqs) {
      if (s.size() >= 2) g += loss_gradient(p, s);
    }
    return ParamVector(g / static_cast<double>(seqs.size()));
  };
  auto cols = parallel_map<Eigen::VectorXd>(static_cast<std::size_t>(P), [&](std::size_t k) {
    Eigen::VectorXd up = params.values();
    Eigen::VectorXd down = params.values();
    up[static_cast<Eigen::Index>(k)] += step;
    down[static_cast<Eigen::Index>(k)] -= step;
    return Eigen::VectorXd((grad_at(up) - grad_at(down)) / (2.0 * step));
  });
  Eigen::MatrixXd H(P, P);
  for (Eigen::Index k = 0; k < P; ++k) H.col(k) = cols[static_cast<std::size_t>(k)];
  return 0.5 * (H + H.transpose());
}

Eigen::VectorXd hessian_spectrum(const ModelParams& params, const std::vector<Sequence>& seqs, std::size_t cap) {
  const Eigen::MatrixXd H = dense_hessian(params, seqs, cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (H + H.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

double true_influence(const ModelParams& theta_hat, const SplitDataset& dataset, UserId user, const Sequence& x_pol,
                      ItemId target, const TrainConfig& config) {
  const auto retrained = retrain_replaced(theta_hat, dataset, user, x_pol, config);
  return attack_loss(retrained.params, dataset, target) - attack_loss(theta_hat, dataset, target);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("spearman needs two equal-length samples");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace seqpoison::oracle
