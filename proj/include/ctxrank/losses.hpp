#pragma once

// Differentiable ranking losses with exact gradients w.r.t. the scores.

#include "ctxrank/ranking.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctxrank {

template <typename Scalar = double>
struct LossValue {
  Scalar value = Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> grad;
};

namespace detail {

template <typename Derived>
void check_scores(const Ranking& truth, const Eigen::MatrixBase<Derived>& s, const char* who, int min_n) {
  if (truth.size() != s.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (truth.size() < min_n)
    throw std::invalid_argument(std::string(who) + ": need at least " + std::to_string(min_n) + " items");
  if (!s.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite score");
}

// softplus(z) = log(1 + e^z) without overflow.
template <typename Scalar>
Scalar softplus(Scalar z) {
  return std::max(z, Scalar(0)) + std::log1p(std::exp(-std::abs(z)));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// Pairwise hinge surrogate of the 0/1 ranking loss:
//   2/(n(n-1)) * sum_{truth(i) < truth(j)} max(1 - (s_i - s_j), 0).
// The subgradient of max(z, 0) is taken as 0 at z = 0.
template <typename Derived>
LossValue<typename Derived::Scalar> hinge_rank_loss(const Ranking& truth, const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  detail::check_scores(truth, s, "hinge_rank_loss", 2);
  const int n = truth.size();
  const Scalar norm = Scalar(2) / (Scalar(n) * Scalar(n - 1));
  LossValue<Scalar> out;
  out.grad.setZero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (truth[i] >= truth[j]) continue;
      const Scalar z = Scalar(1) - (s(i) - s(j));
      if (z > Scalar(0)) {
        out.value += z;
        out.grad(i) -= Scalar(1);
        out.grad(j) += Scalar(1);
      }
    }
  out.value *= norm;
  out.grad *= norm;
  return out;
}

// Negative log-likelihood of the first `stages` choices of `truth` under the
// Plackett-Luce model with log-strengths `s`.
template <typename Derived>
LossValue<typename Derived::Scalar> plackett_luce_prefix(const Ranking& truth, const Eigen::MatrixBase<Derived>& s,
                                                         int stages) {
  using Scalar = typename Derived::Scalar;
  const int n = truth.size();
  const std::vector<int> order = truth.ordering();
  LossValue<Scalar> out;
  out.grad.setZero(n);
  stages = std::clamp(stages, 0, std::max(n - 1, 0));
  for (int stage = 0; stage < stages; ++stage) {
    Scalar peak = -std::numeric_limits<Scalar>::infinity();
    for (int k = stage; k < n; ++k) peak = std::max(peak, s(order[k]));
    Scalar total = Scalar(0);
    for (int k = stage; k < n; ++k) total += std::exp(s(order[k]) - peak);
    out.value += peak + std::log(total) - s(order[stage]);
    for (int k = stage; k < n; ++k) out.grad(order[k]) += std::exp(s(order[k]) - peak) / total;
    out.grad(order[stage]) -= Scalar(1);
  }
  return out;
}

// Full Plackett-Luce loss (n-1 choice stages).
template <typename Derived>
LossValue<typename Derived::Scalar> pl_loss(const Ranking& truth, const Eigen::MatrixBase<Derived>& s) {
  detail::check_scores(truth, s, "pl_loss", 1);
  return plackett_luce_prefix(truth, s, truth.size() - 1);
}

// ListNet-style top-k loss: PL likelihood truncated to min(k, n-1) stages.
template <typename Derived>
LossValue<typename Derived::Scalar> listnet_topk_loss(const Ranking& truth, const Eigen::MatrixBase<Derived>& s,
                                                      int k) {
  if (k < 1) throw std::invalid_argument("listnet_topk_loss: k must be positive");
  detail::check_scores(truth, s, "listnet_topk_loss", 1);
  return plackett_luce_prefix(truth, s, std::min(k, truth.size() - 1));
}

// RankNet pairwise logistic loss: mean over ordered pairs of softplus(-(s_i - s_j)).
template <typename Derived>
LossValue<typename Derived::Scalar> ranknet_loss(const Ranking& truth, const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  detail::check_scores(truth, s, "ranknet_loss", 2);
  const int n = truth.size();
  const Scalar norm = Scalar(2) / (Scalar(n) * Scalar(n - 1));
  LossValue<Scalar> out;
  out.grad.setZero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (truth[i] >= truth[j]) continue;
      const Scalar margin = s(i) - s(j);
      out.value += detail::softplus(-margin);
      const Scalar d = -detail::sigmoid(-margin);
      out.grad(i) += d;
      out.grad(j) -= d;
    }
  out.value *= norm;
  out.grad *= norm;
  return out;
}

}  // namespace ctxrank
