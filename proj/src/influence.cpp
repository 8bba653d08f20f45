#include "seqpoison/influence.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "seqpoison/error.hpp"
#include "seqpoison/parallel.hpp"
#include "seqpoison/random.hpp"

namespace seqpoison {

void LissaConfig::validate() const {
  if (depth < 1 || repeats < 1) throw ArgumentError("LiSSA depth and repeats must be at least 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ArgumentError("LiSSA scale must be positive");
  if (!(damping >= 0.0) || !std::isfinite(damping)) throw ArgumentError("damping must be nonnegative");
}

InfluenceRecord make_record(UserId user, ItemId candidate, double influence) {
  return {user, candidate, influence, -influence};
}

namespace {

void check_target(const SplitDataset& dataset, ItemId target) {
  if (target < 0 || target >= dataset.item_count()) {
    throw ArgumentError("target item " + std::to_string(target) + " outside catalog");
  }
}

}  // namespace

double attack_loss(const ModelParams& params, const SplitDataset& dataset, ItemId target) {
  check_target(dataset, target);
  auto parts = parallel_map<double>(dataset.train.size(), [&](std::size_t u) {
    return final_position_ce(params, dataset.train[u], target).loss;
  });
  double total = 0.0;
  for (double x : parts) total += x;
  return total;
}

ParamVector attack_loss_grad(const ModelParams& params, const SplitDataset& dataset, ItemId target) {
  check_target(dataset, target);
  auto parts = parallel_map<ParamVector>(dataset.train.size(), [&](std::size_t u) {
    return final_position_ce(params, dataset.train[u], target).grad;
  });
  ParamVector total = ParamVector::Zero(params.size());
  for (const auto& g : parts) total += g;
  return total;
}

ParamVector damped_solve(const Eigen::MatrixXd& hessian, const ParamVector& s, double damping) {
  if (hessian.rows() != hessian.cols() || hessian.rows() != s.size()) {
    throw ArgumentError("damped_solve dimension mismatch");
  }
  if (!(damping >= 0.0)) throw ArgumentError("damping must be nonnegative");
  Eigen::MatrixXd A = 0.5 * (hessian + hessian.transpose());
  A.diagonal().array() += damping;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  if (eig.info() != Eigen::Success) throw ConditioningError(INFINITY, "eigendecomposition failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double largest = ev.cwiseAbs().maxCoeff();
  const double smallest = ev.cwiseAbs().minCoeff();
  const double condition = smallest > 0.0 ? largest / smallest : INFINITY;
  if (!(condition <= 1e12)) throw ConditioningError(condition, "damped Hessian is singular or ill-conditioned");

  const Eigen::MatrixXd& V = eig.eigenvectors();
  auto apply_inverse = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    return V * (V.transpose() * b).cwiseQuotient(ev);
  };
  Eigen::VectorXd y = apply_inverse(s);
  y += apply_inverse(s - A * y);  // one step of refinement
  return y;
}

ParamVector direct_inverse_hvp(const ModelParams& params, const std::vector<Sequence>& train_seqs,
                               const ParamVector& s, double damping, std::size_t cap) {
  if (s.size() != params.size()) throw ArgumentError("right-hand side has wrong length");
  return damped_solve(dense_hessian(params, train_seqs, cap), s, damping);
}

ParamVector lissa_solve(const SampleHvp& sample_hvp, std::size_t samples, const ParamVector& s,
                        const LissaConfig& cfg) {
  cfg.validate();
  if (samples == 0) throw ArgumentError("LiSSA needs at least one sample");
  if (!s.allFinite()) throw ArgumentError("LiSSA right-hand side is not finite");
  const double limit = 1e6 * s.norm();

  auto finals = parallel_map<ParamVector>(static_cast<std::size_t>(cfg.repeats), [&](std::size_t r) {
    Rng rng(derive_seed(cfg.seed, r));
    ParamVector y = s;
    for (int j = 1; j <= cfg.depth; ++j) {
      const auto u = static_cast<std::size_t>(rng.below(samples));
      const ParamVector hy = sample_hvp(u, y);
      y = s + y - cfg.scale * (hy + cfg.damping * y);
      const double norm = y.norm();
      if (!std::isfinite(norm) || norm > limit) {
        throw ContractionError(fmt::format(
            "LiSSA recursion diverged at step {} of repeat {} (|y| = {:.3g}); use a smaller scale than {}", j, r,
            norm, cfg.scale));
      }
    }
    return y;
  });
  ParamVector mean = ParamVector::Zero(s.size());
  for (const auto& y : finals) mean += y;
  mean /= static_cast<double>(cfg.repeats);
  return cfg.scale * mean;
}

ParamVector lissa_inverse_hvp(const ModelParams& params, const std::vector<Sequence>& train_seqs,
                              const ParamVector& s, const LissaConfig& cfg) {
  if (s.size() != params.size()) throw ArgumentError("right-hand side has wrong length");
  if (train_seqs.empty()) throw ArgumentError("LiSSA needs training sequences");
  const SampleHvp sample = [&](std::size_t u, const ParamVector& v) -> ParamVector {
    const auto& seq = train_seqs[u];
    if (seq.size() < 2) return ParamVector::Zero(v.size());
    return sequence_hvp(params, seq, v);
  };
  return lissa_solve(sample, train_seqs.size(), s, cfg);
}

double max_sample_curvature(const ModelParams& params, const std::vector<Sequence>& train_seqs, double damping,
                            int iterations, std::uint64_t seed) {
  auto per_user = parallel_map<double>(train_seqs.size(), [&](std::size_t u) {
    const auto& seq = train_seqs[u];
    if (seq.size() < 2) return damping;
    Rng rng(derive_seed(seed, u));
    ParamVector v(params.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    v.normalize();
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
      ParamVector w = sequence_hvp(params, seq, v) + damping * v;
      estimate = w.norm();
      if (estimate == 0.0) break;
      v = w / estimate;
    }
    return estimate;
  });
  return per_user.empty() ? damping : *std::max_element(per_user.begin(), per_user.end());
}

double suggest_lissa_scale(const ModelParams& params, const std::vector<Sequence>& train_seqs, double damping) {
  const double curvature = max_sample_curvature(params, train_seqs, damping);
  return curvature > 0.0 ? 1.0 / curvature : 1.0;
}

double influence_score(const ParamVector& grad_diff, const ParamVector& stilde) {
  if (grad_diff.size() != stilde.size()) throw ArgumentError("influence_score length mismatch");
  return -stilde.dot(grad_diff);
}

ParamVector training_gradient(const ModelParams& params, const Sequence& seq) {
  if (seq.size() < 2) return ParamVector::Zero(params.size());
  return loss_gradient(params, seq);
}

ParamVector candidate_grad_diff(const ModelParams& params, const Sequence& x_u, const Sequence& x_pol) {
  if (x_pol.size() != x_u.size() + 1 || !std::equal(x_u.begin(), x_u.end(), x_pol.begin())) {
    throw ArgumentError("polluted sequence must extend the original by exactly one item");
  }
  return training_gradient(params, x_pol) - training_gradient(params, x_u);
}

std::string format_influence_csv(const std::vector<InfluenceRecord>& records) {
  std::string out = "user,candidate_item,influence,promotion\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{:.17g},{:.17g}\n", r.user, r.candidate, r.influence, r.promotion);
  }
  return out;
}

}  // namespace seqpoison
