#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "seqpoison/dataset.hpp"
#include "seqpoison/model.hpp"

namespace testing_support {

using seqpoison::ItemId;
using seqpoison::ModelParams;
using seqpoison::Sequence;

// Naive scalar implementation of the decayed-bag recommender. Written from
// the formulas with plain loops so it shares no code with the library.
struct RefModel {
  int m = 0;
  int d = 0;
  double gamma = 1.0;
  std::vector<double> E;  // m*d row-major
  std::vector<double> O;  // m*d row-major

  explicit RefModel(const ModelParams& p) : m(p.item_count()), d(p.dim()), gamma(p.decay()) {
    const auto& v = p.values();
    E.assign(v.data(), v.data() + m * d);
    O.assign(v.data() + m * d, v.data() + 2 * m * d);
  }

  std::vector<double> encode(const Sequence& seq, std::size_t t) const {
    std::vector<double> h(d, 0.0);
    double z = 0.0;
    for (std::size_t s = 1; s <= t; ++s) {
      const double w = std::pow(gamma, static_cast<double>(t - s));
      z += w;
      for (int k = 0; k < d; ++k) h[k] += w * E[seq[s - 1] * d + k];
    }
    for (auto& x : h) x /= z;
    return h;
  }

  std::vector<double> logits(const Sequence& seq, std::size_t t) const {
    const auto h = encode(seq, t);
    std::vector<double> z(m, 0.0);
    for (int v = 0; v < m; ++v) {
      for (int k = 0; k < d; ++k) z[v] += O[v * d + k] * h[k];
    }
    return z;
  }

  double ce(const Sequence& seq, std::size_t t, ItemId target) const {
    const auto z = logits(seq, t);
    double mx = z[0];
    for (double x : z) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - mx);
    return -(z[target] - mx - std::log(sum));
  }

  double loss(const Sequence& seq) const {
    double total = 0.0;
    for (std::size_t t = 1; t < seq.size(); ++t) total += ce(seq, t, seq[t]);
    return total / static_cast<double>(seq.size() - 1);
  }
};

inline ModelParams random_params(std::mt19937_64& gen, int m, int d, double scale = 0.5, double gamma = 0.8) {
  std::uniform_real_distribution<double> u(-scale, scale);
  seqpoison::ParamVector v(2 * m * d);
  for (auto& x : v) x = u(gen);
  return ModelParams(m, d, gamma, v);
}

inline Sequence random_sequence(std::mt19937_64& gen, int m, std::size_t len) {
  std::uniform_int_distribution<int> u(0, m - 1);
  Sequence s(len);
  for (auto& x : s) x = u(gen);
  return s;
}

inline seqpoison::SplitDataset random_dataset(std::mt19937_64& gen, int n, int m, std::size_t min_len = 3,
                                              std::size_t max_len = 7) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::vector<seqpoison::InteractionSequence> seqs;
  for (int u = 0; u < n; ++u) seqs.push_back({u, random_sequence(gen, m, len(gen))});
  return seqpoison::split_leave_two(seqs, m);
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("seqpoison_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace testing_support
