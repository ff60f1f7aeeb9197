#pragma once

// Ranking conventions and evaluation metrics.
//
// A Ranking stores, for every item i, its 0-based position (0 = best).
// Scores map to rankings by "higher score is better", exact ties broken by
// ascending item index.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxrank {

class Ranking {
 public:
  Ranking() = default;

  explicit Ranking(std::vector<int> positions) : positions_(std::move(positions)) {
    std::vector<char> seen(positions_.size(), 0);
    for (int p : positions_) {
      if (p < 0 || static_cast<std::size_t>(p) >= positions_.size() || seen[p])
        throw std::invalid_argument("Ranking: positions must be a permutation of 0..n-1");
      seen[p] = 1;
    }
  }

  static Ranking identity(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    return Ranking(std::move(p));
  }

  // Builds the ranking whose ordering (item at each position) is given.
  static Ranking from_ordering(const std::vector<int>& ordering) {
    std::vector<int> p(ordering.size(), -1);
    for (std::size_t pos = 0; pos < ordering.size(); ++pos) {
      const int item = ordering[pos];
      if (item < 0 || static_cast<std::size_t>(item) >= ordering.size() || p[item] != -1)
        throw std::invalid_argument("Ranking: ordering must be a permutation of 0..n-1");
      p[item] = static_cast<int>(pos);
    }
    return Ranking(std::move(p));
  }

  int size() const { return static_cast<int>(positions_.size()); }
  int operator[](int item) const { return positions_[item]; }
  const std::vector<int>& positions() const { return positions_; }

  // Inverse permutation: ordering()[k] is the item at position k.
  std::vector<int> ordering() const {
    std::vector<int> inv(positions_.size());
    for (std::size_t i = 0; i < positions_.size(); ++i) inv[positions_[i]] = static_cast<int>(i);
    return inv;
  }

  friend bool operator==(const Ranking&, const Ranking&) = default;

 private:
  std::vector<int> positions_;
};

template <typename Derived>
Ranking rank_from_scores(const Eigen::DenseBase<Derived>& scores) {
  const auto n = scores.size();
  if (n == 0) throw std::invalid_argument("rank_from_scores: empty score vector");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isnan(static_cast<double>(scores(i)))) throw std::invalid_argument("rank_from_scores: NaN score");
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return Ranking::from_ordering(order);
}

namespace detail {
inline void require_same_size(const Ranking& a, Eigen::Index n, const char* who) {
  if (a.size() != n) throw std::invalid_argument(std::string(who) + ": length mismatch");
}
}  // namespace detail

// Normalized count of discordant pairs, ties counting one half.
template <typename Derived>
double zero_one_rank_loss(const Ranking& truth, const Eigen::DenseBase<Derived>& scores) {
  const int n = truth.size();
  detail::require_same_size(truth, scores.size(), "zero_one_rank_loss");
  if (n < 2) throw std::invalid_argument("zero_one_rank_loss: need at least two items");
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (truth[i] >= truth[j]) continue;
      if (scores(i) < scores(j))
        sum += 1.0;
      else if (scores(i) == scores(j))
        sum += 0.5;
    }
  return sum * 2.0 / (static_cast<double>(n) * (n - 1));
}

template <typename Derived>
double ranking_accuracy(const Ranking& truth, const Eigen::DenseBase<Derived>& scores) {
  return 1.0 - zero_one_rank_loss(truth, scores);
}

inline int zero_one_accuracy(const Ranking& truth, const Ranking& predicted) {
  detail::require_same_size(truth, predicted.size(), "zero_one_accuracy");
  return truth == predicted ? 1 : 0;
}

inline double spearman(const Ranking& a, const Ranking& b) {
  const int n = a.size();
  detail::require_same_size(a, b.size(), "spearman");
  if (n < 2) throw std::invalid_argument("spearman: need at least two items");
  double d2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  const double nn = n;
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

}  // namespace ctxrank
