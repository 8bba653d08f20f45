#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "seqpoison/dataset.hpp"

namespace seqpoison {

// Flattened parameters: in_embed row-major, then out_embed row-major.
using ParamVector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kDenseParamCap = 512;

// Decayed-bag sequence encoder with untied input/output item embeddings.
//
//   h_t = sum_s decay^(t-s) in_embed[seq_s] / sum_s decay^(t-s)
//   logits = out_embed * h_t
//
// The decay is a fixed hyper-parameter and is not part of the trainable
// vector.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(int items, int dim, double decay);
  ModelParams(int items, int dim, double decay, ParamVector values);

  int item_count() const { return items_; }
  int dim() const { return dim_; }
  double decay() const { return decay_; }
  Eigen::Index size() const { return values_.size(); }

  const ParamVector& values() const { return values_; }
  ParamVector& values() { return values_; }

  Eigen::Map<const RowMatrix> in_embed() const { return {values_.data(), items_, dim_}; }
  Eigen::Map<RowMatrix> in_embed() { return {values_.data(), items_, dim_}; }
  Eigen::Map<const RowMatrix> out_embed() const { return {values_.data() + block(), items_, dim_}; }
  Eigen::Map<RowMatrix> out_embed() { return {values_.data() + block(), items_, dim_}; }

  // Offsets into the flattened vector.
  Eigen::Index in_offset(ItemId v) const { return static_cast<Eigen::Index>(v) * dim_; }
  Eigen::Index out_offset(ItemId v) const { return block() + static_cast<Eigen::Index>(v) * dim_; }

  ModelParams with_values(ParamVector values) const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.items_ == b.items_ && a.dim_ == b.dim_ && a.decay_ == b.decay_ && a.values_ == b.values_;
  }

 private:
  Eigen::Index block() const { return static_cast<Eigen::Index>(items_) * dim_; }

  int items_ = 0;
  int dim_ = 0;
  double decay_ = 1.0;
  ParamVector values_;
};

ModelParams init_params(int items, int dim, double scale, double decay, std::uint64_t seed);

// h_t for the first t items of seq (1-based t, 1 <= t <= seq.size()).
Eigen::VectorXd encode_prefix(const ModelParams& params, std::span<const ItemId> seq, std::size_t t);
Eigen::VectorXd logits(const ModelParams& params, std::span<const ItemId> seq, std::size_t t);
Eigen::VectorXd softmax(const Eigen::VectorXd& z);
double log_sum_exp(const Eigen::VectorXd& z);

// Mean next-item cross-entropy over positions 1..T-1.
double sequence_loss(const ModelParams& params, std::span<const ItemId> seq);
ParamVector loss_gradient(const ModelParams& params, std::span<const ItemId> seq);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};
LossGrad loss_and_gradient(const ModelParams& params, std::span<const ItemId> seq);

// Cross-entropy of `target` at the final position of `prefix`, and its
// gradient. This is the per-user term of the attack loss.
LossGrad final_position_ce(const ModelParams& params, std::span<const ItemId> prefix, ItemId target);

// H v for one sequence's loss (forward-over-reverse, exact).
ParamVector sequence_hvp(const ModelParams& params, std::span<const ItemId> seq, const ParamVector& v);
// H v for the mean loss over seqs. Sequences shorter than two items have no
// prediction target; they contribute zero but count towards the mean.
ParamVector hvp(const ModelParams& params, const std::vector<Sequence>& seqs, const ParamVector& v);

// Explicit Hessian of the mean loss, assembled from the Gauss-Newton term
// J^T (diag(p) - p p^T) J plus the bilinear cross term. Independent of hvp.
Eigen::MatrixXd dense_hessian(const ModelParams& params, const std::vector<Sequence>& seqs,
                              std::size_t cap = kDenseParamCap);

// Binary checkpoint: "SQPM", u32 version=1, u32 m, u32 d, f64 decay, then
// 2*m*d f64 values, all little-endian.
std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace seqpoison
