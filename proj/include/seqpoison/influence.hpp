#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seqpoison/dataset.hpp"
#include "seqpoison/model.hpp"

namespace seqpoison {

// Stochastic inverse-HVP settings. Each of `repeats` recursions runs `depth`
// steps of
//   y_j = s + (I - scale * (H_u + damping * I)) y_{j-1}
// with H_u the Hessian of one uniformly sampled user's loss, and the result
// is scale * mean(y_depth). scale must keep scale * ||H_u + damping I|| < 2.
struct LissaConfig {
  int depth = 1000;
  int repeats = 8;
  double scale = 0.1;
  double damping = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct InfluenceRecord {
  UserId user = 0;
  ItemId candidate = 0;
  double influence = 0.0;  // dL_atk / d(eps); negative means the target gains
  double promotion = 0.0;  // always -influence
};

InfluenceRecord make_record(UserId user, ItemId candidate, double influence);

// Sum over users of CE(target) at the last position of each training prefix.
double attack_loss(const ModelParams& params, const SplitDataset& dataset, ItemId target);
ParamVector attack_loss_grad(const ModelParams& params, const SplitDataset& dataset, ItemId target);

// Solves (H + damping I) y = s for an explicit symmetric H. Throws
// ConditioningError when the shifted matrix is singular or its condition
// number exceeds 1e12.
ParamVector damped_solve(const Eigen::MatrixXd& hessian, const ParamVector& s, double damping);

// Dense route: dense_hessian over train_seqs, then damped_solve.
ParamVector direct_inverse_hvp(const ModelParams& params, const std::vector<Sequence>& train_seqs,
                               const ParamVector& s, double damping, std::size_t cap = kDenseParamCap);

// Generic LiSSA over a family of sampled HVP operators; sample_hvp(i, v)
// must return H_i v for sample i in [0, samples).
using SampleHvp = std::function<ParamVector(std::size_t, const ParamVector&)>;
ParamVector lissa_solve(const SampleHvp& sample_hvp, std::size_t samples, const ParamVector& s,
                        const LissaConfig& cfg);

ParamVector lissa_inverse_hvp(const ModelParams& params, const std::vector<Sequence>& train_seqs,
                              const ParamVector& s, const LissaConfig& cfg);

// Largest eigenvalue magnitude of H_u + damping I over users (power
// iteration), and the LiSSA scale 1 / that value, which keeps every sampled
// step contractive.
double max_sample_curvature(const ModelParams& params, const std::vector<Sequence>& train_seqs, double damping,
                            int iterations = 50, std::uint64_t seed = 0);
double suggest_lissa_scale(const ModelParams& params, const std::vector<Sequence>& train_seqs, double damping);

// -dot(stilde, grad_diff), where stilde = (H + damping I)^{-1} grad L_atk.
double influence_score(const ParamVector& grad_diff, const ParamVector& stilde);

// grad L(x_pol) - grad L(x_u); x_pol must be x_u with one item appended.
// Prefixes with fewer than two items have zero loss and zero gradient.
ParamVector candidate_grad_diff(const ModelParams& params, const Sequence& x_u, const Sequence& x_pol);

// Same as sequence gradient but zero for sequences without a target.
ParamVector training_gradient(const ModelParams& params, const Sequence& seq);

// CSV `user,candidate_item,influence,promotion`.
std::string format_influence_csv(const std::vector<InfluenceRecord>& records);

}  // namespace seqpoison
