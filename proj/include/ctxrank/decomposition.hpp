#pragma once

// Tabular K-th order FETA over a finite universe of N objects.
//
// Contexts are sets of item indices, stored as bitmasks, so a table lookup
// never depends on the order a context is presented in. U_c holds the scores
// U_c(i, C) for |C| = c; U_0 is the context-free utility.

#include "ctxrank/ranking.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ctxrank::decomposition {

using Mask = std::uint32_t;

inline constexpr int kMaxUniverse = 8;

Mask to_mask(std::span<const int> items);
std::vector<int> from_mask(Mask mask);

class UtilityTables {
 public:
  explicit UtilityTables(int universe_size);

  int universe_size() const { return n_; }
  // Largest context size with at least one populated entry (-1 if empty).
  int max_order() const;

  bool has(int item, Mask context) const;
  double at(int item, Mask context) const;  // throws std::out_of_range if unset
  void set(int item, Mask context, double value);

  double at(int item, std::span<const int> context) const { return at(item, to_mask(context)); }
  void set(int item, std::span<const int> context, double value) { set(item, to_mask(context), value); }

 private:
  std::size_t slot(int item, Mask context) const;

  int n_;
  std::vector<double> values_;
  std::vector<char> present_;
};

// Ranking of every nonempty subset of the universe, indexed by mask. The
// ranking of a query lists its members in ascending item order.
class RankingFunction {
 public:
  explicit RankingFunction(int universe_size);

  int universe_size() const { return n_; }
  const Ranking& operator()(Mask query) const;
  void set(Mask query, Ranking ranking);
  bool total() const;

 private:
  int n_;
  std::vector<Ranking> rankings_;
  std::vector<char> present_;
};

// U(i, C) = U_0(i) + sum_{k=1..K} binom(|C|, k)^{-1} sum_{C' in C, |C'| = k} U_k(i, C').
double kth_order_utility(const UtilityTables& tables, int item, Mask context, int order);

// FETA ranking of `query` using order min(max_order, |query| - 1).
Ranking feta_rank(const UtilityTables& tables, Mask query, int max_order);

// Scores of every member of `query` (ascending item order) at the given order.
Eigen::VectorXd feta_scores(const UtilityTables& tables, Mask query, int order);

// Ranking function induced by the tables at a fixed maximal order.
RankingFunction induced_ranking_function(const UtilityTables& tables, int max_order);

// Builds tables that reproduce `rho` on every query: pairwise indicator level,
// then each context size c = m-1 scored as (m - position_1based) * (delta_max + epsilon),
// delta_max being the score range over all queries of size m-1.
UtilityTables construct_feta_tables(const RankingFunction& rho, double epsilon = 1.0);

struct Mismatch {
  Mask query;
  Ranking expected;
  Ranking got;
};

struct VerificationReport {
  long queries = 0;
  std::vector<Mismatch> mismatches;
  // Smallest score gap between consecutive items of the target order, over
  // all queries with at least two items; negative when some order is violated.
  double min_margin = 0.0;

  bool ok() const { return mismatches.empty(); }
};

VerificationReport verify_reconstruction(const RankingFunction& rho, const UtilityTables& tables);

void write_report(std::ostream& out, const VerificationReport& report, int universe_size);

RankingFunction random_ranking_function(int universe_size, std::mt19937_64& rng);

// Copy of `tables` with an all-zero level at context size `level` (no-op on
// existing entries).
UtilityTables with_zero_level(const UtilityTables& tables, int level);

struct SpanCheck {
  long realizable_functions = 0;  // distinct ranking functions reached by U_0 alone
  bool restrictions_consistent = true;
  bool reversal_found = false;
};

// Enumerates every strict ordering of U_0 values for a universe of size N and
// checks that each induces the restriction of one global order on every subset.
SpanCheck zeroth_order_span(int universe_size);

// True if some pair of items is ordered differently by the rankings of two
// queries containing both.
bool has_preference_reversal(const RankingFunction& rho);

}  // namespace ctxrank::decomposition
