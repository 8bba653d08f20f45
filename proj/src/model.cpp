#include "seqpoison/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "seqpoison/error.hpp"
#include "seqpoison/io.hpp"
#include "seqpoison/random.hpp"

namespace seqpoison {

namespace {

void check_items(const ModelParams& params, std::span<const ItemId> seq) {
  for (ItemId v : seq) {
    if (v < 0 || v >= params.item_count()) throw ArgumentError("item id " + std::to_string(v) + " outside model catalog");
  }
}

void check_trainable(std::span<const ItemId> seq) {
  if (seq.size() < 2) throw ArgumentError("sequence needs at least 2 items to have a prediction target");
}

// Running state of the decayed bag: S_t = decay * S_{t-1} + E[v_t], Z_t likewise with 1.
struct PrefixState {
  Eigen::VectorXd sum;
  double norm = 0.0;
};

Eigen::VectorXd output_gradient_residual(const Eigen::VectorXd& z, ItemId target, double& ce) {
  const double lse = log_sum_exp(z);
  ce = lse - z[target];
  Eigen::VectorXd r = (z.array() - lse).exp().matrix();
  r[target] -= 1.0;
  return r;
}

// Scatters dh_t (t = 1..n) back onto the input rows: row seq_s receives
// sum_{t >= s} decay^(t-s) dh_t / Z_t.
void backprop_inputs(const ModelParams& params, std::span<const ItemId> seq, const std::vector<Eigen::VectorXd>& dh,
                     const std::vector<double>& norms, ParamVector& grad) {
  const double decay = params.decay();
  const int d = params.dim();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (std::size_t s = dh.size(); s-- > 0;) {
    acc = decay * acc + dh[s] / norms[s];
    grad.segment(params.in_offset(seq[s]), d) += acc;
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

}  // namespace

ModelParams::ModelParams(int items, int dim, double decay)
    : ModelParams(items, dim, decay, ParamVector::Zero(2 * static_cast<Eigen::Index>(items) * dim)) {}

ModelParams::ModelParams(int items, int dim, double decay, ParamVector values)
    : items_(items), dim_(dim), decay_(decay), values_(std::move(values)) {
  if (items < 1 || dim < 1) throw ArgumentError("model dimensions must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ArgumentError("decay must lie in (0, 1]");
  if (values_.size() != 2 * static_cast<Eigen::Index>(items) * dim) {
    throw ArgumentError("parameter vector has length " + std::to_string(values_.size()) + ", expected " +
                        std::to_string(2 * static_cast<long long>(items) * dim));
  }
}

ModelParams ModelParams::with_values(ParamVector values) const {
  return ModelParams(items_, dim_, decay_, std::move(values));
}

ModelParams init_params(int items, int dim, double scale, double decay, std::uint64_t seed) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ArgumentError("init scale must be finite and nonnegative");
  ModelParams params(items, dim, decay);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    params.values()[i] = scale == 0.0 ? 0.0 : rng.uniform(-scale, scale);
  }
  return params;
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double mx = z.maxCoeff();
  return mx + std::log((z.array() - mx).exp().sum());
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Eigen::VectorXd encode_prefix(const ModelParams& params, std::span<const ItemId> seq, std::size_t t) {
  if (t < 1 || t > seq.size()) throw ArgumentError("prefix position out of range");
  check_items(params, seq.first(t));
  const auto E = params.in_embed();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(params.dim());
  double den = 0.0;
  for (std::size_t s = 0; s < t; ++s) {
    const double w = std::pow(params.decay(), static_cast<double>(t - 1 - s));
    num += w * E.row(seq[s]).transpose();
    den += w;
  }
  return num / den;
}

Eigen::VectorXd logits(const ModelParams& params, std::span<const ItemId> seq, std::size_t t) {
  return params.out_embed() * encode_prefix(params, seq, t);
}

LossGrad loss_and_gradient(const ModelParams& params, std::span<const ItemId> seq) {
  check_trainable(seq);
  check_items(params, seq);
  const auto E = params.in_embed();
  const auto O = params.out_embed();
  const int d = params.dim();
  const std::size_t positions = seq.size() - 1;
  const double inv = 1.0 / static_cast<double>(positions);

  LossGrad out;
  out.grad = ParamVector::Zero(params.size());
  Eigen::Map<RowMatrix> gO(out.grad.data() + params.out_offset(0), params.item_count(), d);

  std::vector<Eigen::VectorXd> dh(positions);
  std::vector<double> norms(positions);
  PrefixState st{Eigen::VectorXd::Zero(d), 0.0};
  double total = 0.0;
  for (std::size_t t = 0; t < positions; ++t) {
    st.sum = params.decay() * st.sum + E.row(seq[t]).transpose();
    st.norm = params.decay() * st.norm + 1.0;
    const Eigen::VectorXd h = st.sum / st.norm;
    const Eigen::VectorXd z = O * h;
    double ce = 0.0;
    const Eigen::VectorXd r = output_gradient_residual(z, seq[t + 1], ce);
    total += ce;
    gO.noalias() += (inv * r) * h.transpose();
    dh[t] = inv * (O.transpose() * r);
    norms[t] = st.norm;
  }
  backprop_inputs(params, seq, dh, norms, out.grad);
  out.loss = total * inv;
  return out;
}

double sequence_loss(const ModelParams& params, std::span<const ItemId> seq) {
  check_trainable(seq);
  check_items(params, seq);
  const auto E = params.in_embed();
  const auto O = params.out_embed();
  const std::size_t positions = seq.size() - 1;
  PrefixState st{Eigen::VectorXd::Zero(params.dim()), 0.0};
  double total = 0.0;
  for (std::size_t t = 0; t < positions; ++t) {
    st.sum = params.decay() * st.sum + E.row(seq[t]).transpose();
    st.norm = params.decay() * st.norm + 1.0;
    const Eigen::VectorXd z = O * (st.sum / st.norm);
    total += log_sum_exp(z) - z[seq[t + 1]];
  }
  return total / static_cast<double>(positions);
}

ParamVector loss_gradient(const ModelParams& params, std::span<const ItemId> seq) {
  return loss_and_gradient(params, seq).grad;
}

LossGrad final_position_ce(const ModelParams& params, std::span<const ItemId> prefix, ItemId target) {
  if (prefix.empty()) throw ArgumentError("prefix must be nonempty");
  if (target < 0 || target >= params.item_count()) throw ArgumentError("target outside model catalog");
  check_items(params, prefix);
  const auto E = params.in_embed();
  const auto O = params.out_embed();
  const int d = params.dim();

  PrefixState st{Eigen::VectorXd::Zero(d), 0.0};
  for (ItemId v : prefix) {
    st.sum = params.decay() * st.sum + E.row(v).transpose();
    st.norm = params.decay() * st.norm + 1.0;
  }
  const Eigen::VectorXd h = st.sum / st.norm;
  const Eigen::VectorXd z = O * h;

  LossGrad out;
  const Eigen::VectorXd r = output_gradient_residual(z, target, out.loss);
  out.grad = ParamVector::Zero(params.size());
  Eigen::Map<RowMatrix> gO(out.grad.data() + params.out_offset(0), params.item_count(), d);
  gO.noalias() += r * h.transpose();
  const Eigen::VectorXd dh = O.transpose() * r;
  double w = 1.0 / st.norm;
  for (std::size_t s = prefix.size(); s-- > 0;) {
    out.grad.segment(params.in_offset(prefix[s]), d) += w * dh;
    w *= params.decay();
  }
  return out;
}

ParamVector sequence_hvp(const ModelParams& params, std::span<const ItemId> seq, const ParamVector& v) {
  check_trainable(seq);
  check_items(params, seq);
  if (v.size() != params.size()) throw ArgumentError("hvp direction has wrong length");
  const auto E = params.in_embed();
  const auto O = params.out_embed();
  const int m = params.item_count();
  const int d = params.dim();
  const Eigen::Map<const RowMatrix> vE(v.data(), m, d);
  const Eigen::Map<const RowMatrix> vO(v.data() + params.out_offset(0), m, d);
  const std::size_t positions = seq.size() - 1;
  const double inv = 1.0 / static_cast<double>(positions);

  ParamVector out = ParamVector::Zero(params.size());
  Eigen::Map<RowMatrix> hO(out.data() + params.out_offset(0), m, d);
  std::vector<Eigen::VectorXd> dh_dot(positions);
  std::vector<double> norms(positions);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_dot = Eigen::VectorXd::Zero(d);
  double norm = 0.0;
  for (std::size_t t = 0; t < positions; ++t) {
    sum = params.decay() * sum + E.row(seq[t]).transpose();
    sum_dot = params.decay() * sum_dot + vE.row(seq[t]).transpose();
    norm = params.decay() * norm + 1.0;
    const Eigen::VectorXd h = sum / norm;
    const Eigen::VectorXd h_dot = sum_dot / norm;
    const Eigen::VectorXd z = O * h;
    const Eigen::VectorXd p = softmax(z);
    Eigen::VectorXd r = p;
    r[seq[t + 1]] -= 1.0;
    const Eigen::VectorXd z_dot = vO * h + O * h_dot;
    const Eigen::VectorXd r_dot = p.cwiseProduct(z_dot) - p * p.dot(z_dot);

    hO.noalias() += (inv * r_dot) * h.transpose();
    hO.noalias() += (inv * r) * h_dot.transpose();
    dh_dot[t] = inv * (vO.transpose() * r + O.transpose() * r_dot);
    norms[t] = norm;
  }
  backprop_inputs(params, seq, dh_dot, norms, out);
  return out;
}

ParamVector hvp(const ModelParams& params, const std::vector<Sequence>& seqs, const ParamVector& v) {
  if (seqs.empty()) throw ArgumentError("hvp needs at least one sequence");
  if (v.size() != params.size()) throw ArgumentError("hvp direction has wrong length");
  ParamVector acc = ParamVector::Zero(params.size());
  for (const auto& s : seqs) {
    if (s.size() >= 2) acc += sequence_hvp(params, s, v);
  }
  return acc / static_cast<double>(seqs.size());
}

Eigen::MatrixXd dense_hessian(const ModelParams& params, const std::vector<Sequence>& seqs, std::size_t cap) {
  if (static_cast<std::size_t>(params.size()) > cap) {
    throw RefusalError("dense Hessian refused: " + std::to_string(params.size()) + " parameters exceed cap " +
                       std::to_string(cap));
  }
  if (seqs.empty()) throw ArgumentError("dense_hessian needs at least one sequence");
  const int m = params.item_count();
  const int d = params.dim();
  const Eigen::Index P = params.size();
  const auto E = params.in_embed();
  const auto O = params.out_embed();

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(P, P);
  Eigen::MatrixXd J(m, P);
  for (const auto& seq : seqs) {
    if (seq.size() < 2) continue;
    check_items(params, seq);
    const std::size_t positions = seq.size() - 1;
    const double w_seq = 1.0 / (static_cast<double>(positions) * static_cast<double>(seqs.size()));
    for (std::size_t t = 1; t <= positions; ++t) {
      // c_a: total normalized decay weight of item a within the prefix.
      std::vector<double> c(static_cast<std::size_t>(m), 0.0);
      double den = 0.0;
      for (std::size_t s = 0; s < t; ++s) den += std::pow(params.decay(), static_cast<double>(t - 1 - s));
      for (std::size_t s = 0; s < t; ++s) {
        c[static_cast<std::size_t>(seq[s])] += std::pow(params.decay(), static_cast<double>(t - 1 - s)) / den;
      }
      Eigen::VectorXd h = Eigen::VectorXd::Zero(d);
      for (int a = 0; a < m; ++a) {
        if (c[static_cast<std::size_t>(a)] != 0.0) h += c[static_cast<std::size_t>(a)] * E.row(a).transpose();
      }
      const Eigen::VectorXd p = softmax(O * h);
      Eigen::VectorXd r = p;
      r[seq[t]] -= 1.0;

      // J = d logits / d theta.
      J.setZero();
      for (int v = 0; v < m; ++v) {
        J.block(v, params.out_offset(v), 1, d) = h.transpose();
        for (int a = 0; a < m; ++a) {
          const double ca = c[static_cast<std::size_t>(a)];
          if (ca != 0.0) J.block(v, params.in_offset(a), 1, d) = ca * O.row(v);
        }
      }
      const Eigen::MatrixXd SJ = p.asDiagonal() * J - p * (p.transpose() * J);
      H.noalias() += w_seq * (J.transpose() * SJ);

      // Second derivative of logit v: d2 z_v / dO_{v,i} dE_{a,i} = c_a.
      for (int v = 0; v < m; ++v) {
        for (int a = 0; a < m; ++a) {
          const double ca = c[static_cast<std::size_t>(a)];
          if (ca == 0.0) continue;
          const double coef = w_seq * r[v] * ca;
          for (int i = 0; i < d; ++i) {
            H(params.out_offset(v) + i, params.in_offset(a) + i) += coef;
            H(params.in_offset(a) + i, params.out_offset(v) + i) += coef;
          }
        }
      }
    }
  }
  return H;
}

std::string encode_checkpoint(const ModelParams& params) {
  std::string out = "SQPM";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(params.item_count()));
  put_u32(out, static_cast<std::uint32_t>(params.dim()));
  put_f64(out, params.decay());
  out.reserve(out.size() + static_cast<std::size_t>(params.size()) * 8);
  for (Eigen::Index i = 0; i < params.size(); ++i) put_f64(out, params.values()[i]);
  return out;
}

ModelParams decode_checkpoint(std::string_view bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 4 + 4 + 8;
  if (bytes.size() < kHeader || bytes.substr(0, 4) != "SQPM") throw FormatError("checkpoint magic mismatch");
  const auto version = get_le(bytes, 4, 4);
  if (version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto m = static_cast<int>(get_le(bytes, 8, 4));
  const auto d = static_cast<int>(get_le(bytes, 12, 4));
  const double decay = std::bit_cast<double>(get_le(bytes, 16, 8));
  if (m < 1 || d < 1) throw FormatError("checkpoint has empty dimensions");
  const auto count = 2 * static_cast<std::size_t>(m) * static_cast<std::size_t>(d);
  if (bytes.size() != kHeader + 8 * count) throw FormatError("checkpoint size does not match its header");
  ParamVector values(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    values[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(get_le(bytes, kHeader + 8 * i, 8));
  }
  if (!values.allFinite()) throw FormatError("checkpoint contains non-finite values");
  try {
    return ModelParams(m, d, decay, std::move(values));
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  write_file_atomic(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace seqpoison
