#pragma once

// Reference computations written independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "hybridpair/features.hpp"

namespace oracle {

/// Move frequencies at each step from explicit counting, each path repeated
/// `copies[k]` times.
inline std::vector<std::vector<double>> move_frequencies(const std::vector<hybridpair::HybridPath>& elite,
                                                         const std::vector<int>& copies,
                                                         std::size_t move_count) {
  std::vector<std::vector<double>> out;
  const std::size_t horizon = elite.front().moves.size();
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<long long> hits(move_count, 0);
    long long total = 0;
    for (std::size_t k = 0; k < elite.size(); ++k) {
      for (int c = 0; c < copies[k]; ++c) {
        ++hits[elite[k].moves[t]];
        ++total;
      }
    }
    std::vector<double> p(move_count);
    for (std::size_t j = 0; j < move_count; ++j) {
      p[j] = static_cast<double>(hits[j]) / static_cast<double>(total);
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

/// Weighted mean and second central moment. The variance uses the pairwise
/// form sum_ij w_i w_j (x_i - x_j)^2 / (2 W^2), which never forms the mean.
inline Moments weighted_moments(const std::vector<double>& x, const std::vector<double>& w) {
  long double wsum = 0, msum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    wsum += w[i];
    msum += static_cast<long double>(w[i]) * x[i];
  }
  long double pair = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const long double d = static_cast<long double>(x[i]) - x[j];
      pair += static_cast<long double>(w[i]) * w[j] * d * d;
    }
  }
  return {static_cast<double>(msum / wsum), static_cast<double>(pair / (2 * wsum * wsum))};
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-300) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

/// Metric definitions straight from the confusion counts.
struct Metrics {
  std::optional<double> f1;
  std::optional<double> balanced_accuracy;
};

inline Metrics metrics(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m;
  if (tp + fp > 0 && tp + fn > 0) {
    m.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  if (tp + fn > 0 && tn + fp > 0) {
    m.balanced_accuracy = 0.5 * (static_cast<double>(tp) / static_cast<double>(tp + fn) +
                                 static_cast<double>(tn) / static_cast<double>(tn + fp));
  }
  return m;
}

/// Exhaustive CART over every feature and every threshold between adjacent
/// distinct values. Impurity is the size-weighted Gini of the two children;
/// the first strictly better split in (feature, threshold) order wins.
struct CartNode {
  int feature = -1;
  double threshold = 0.0;
  int leaf_class = 0;
  std::vector<CartNode> children;  // empty or {left, right}
};

inline double gini(std::size_t ones, std::size_t n) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(ones) / static_cast<double>(n);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

inline CartNode cart(const hybridpair::FeatureMatrix& m, const std::vector<std::size_t>& rows,
                     std::size_t min_leaf) {
  CartNode node;
  std::size_t ones = 0;
  for (const auto r : rows) ones += m.labels[r] == 1 ? 1 : 0;
  const std::size_t n = rows.size();
  node.leaf_class = 2 * ones >= n ? 1 : 0;
  if (ones == 0 || ones == n || n < 2 * min_leaf) return node;

  double best = INFINITY;
  int best_f = -1;
  double best_t = 0.0;
  for (std::size_t f = 0; f < m.cols(); ++f) {
    std::vector<double> values;
    for (const auto r : rows) values.push_back(m.row(r)[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = values[i] + (values[i + 1] - values[i]) / 2.0;
      std::size_t nl = 0, l1 = 0;
      for (const auto r : rows) {
        if (m.row(r)[f] <= t) {
          ++nl;
          l1 += m.labels[r] == 1 ? 1 : 0;
        }
      }
      const std::size_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double imp = (static_cast<double>(nl) * gini(l1, nl) +
                          static_cast<double>(nr) * gini(ones - l1, nr)) /
                         static_cast<double>(n);
      if (imp < best) {
        best = imp;
        best_f = static_cast<int>(f);
        best_t = t;
      }
    }
  }
  if (best_f < 0) return node;
  node.feature = best_f;
  node.threshold = best_t;
  std::vector<std::size_t> left, right;
  for (const auto r : rows) (m.row(r)[best_f] <= best_t ? left : right).push_back(r);
  node.children.push_back(cart(m, left, min_leaf));
  node.children.push_back(cart(m, right, min_leaf));
  return node;
}

}  // namespace oracle
