#include "ctxrank/decomposition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>

namespace ctxrank::decomposition {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void check_universe(int n) {
  if (n < 1 || n > kMaxUniverse)
    throw std::invalid_argument("universe size must lie in [1, " + std::to_string(kMaxUniverse) + "]");
}

std::string format_mask(Mask m) {
  std::string s = "{";
  bool first = true;
  for (int i : from_mask(m)) {
    if (!first) s += ",";
    s += std::to_string(i);
    first = false;
  }
  return s + "}";
}

std::string format_positions(const Ranking& r) {
  std::string s = "(";
  for (int i = 0; i < r.size(); ++i) s += (i ? "," : "") + std::to_string(r[i]);
  return s + ")";
}

}  // namespace

Mask to_mask(std::span<const int> items) {
  Mask m = 0;
  for (int i : items) {
    if (i < 0 || i >= kMaxUniverse) throw std::invalid_argument("item index out of range");
    m |= Mask{1} << i;
  }
  return m;
}

std::vector<int> from_mask(Mask mask) {
  std::vector<int> items;
  for (int i = 0; mask >> i; ++i)
    if ((mask >> i) & 1u) items.push_back(i);
  return items;
}

UtilityTables::UtilityTables(int universe_size) : n_(universe_size) {
  check_universe(n_);
  const std::size_t size = static_cast<std::size_t>(n_) << n_;
  values_.assign(size, 0.0);
  present_.assign(size, 0);
}

std::size_t UtilityTables::slot(int item, Mask context) const {
  if (item < 0 || item >= n_) throw std::out_of_range("item index out of range");
  if (context >> n_) throw std::out_of_range("context outside the universe");
  if ((context >> item) & 1u) throw std::invalid_argument("context must not contain the item itself");
  return (static_cast<std::size_t>(item) << n_) | context;
}

bool UtilityTables::has(int item, Mask context) const { return present_[slot(item, context)] != 0; }

double UtilityTables::at(int item, Mask context) const {
  const auto s = slot(item, context);
  if (!present_[s])
    throw std::out_of_range("missing table entry for item " + std::to_string(item) + " in context " +
                            format_mask(context));
  return values_[s];
}

void UtilityTables::set(int item, Mask context, double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("table entries must be finite");
  const auto s = slot(item, context);
  values_[s] = value;
  present_[s] = 1;
}

int UtilityTables::max_order() const {
  int best = -1;
  for (std::size_t s = 0; s < present_.size(); ++s)
    if (present_[s]) best = std::max(best, std::popcount(static_cast<Mask>(s & ((Mask{1} << n_) - 1))));
  return best;
}

RankingFunction::RankingFunction(int universe_size) : n_(universe_size) {
  check_universe(n_);
  rankings_.resize(std::size_t{1} << n_);
  present_.assign(std::size_t{1} << n_, 0);
}

const Ranking& RankingFunction::operator()(Mask query) const {
  if (query == 0 || query >> n_) throw std::out_of_range("query outside the universe");
  if (!present_[query]) throw std::out_of_range("ranking function undefined on " + format_mask(query));
  return rankings_[query];
}

void RankingFunction::set(Mask query, Ranking ranking) {
  if (query == 0 || query >> n_) throw std::out_of_range("query outside the universe");
  if (ranking.size() != std::popcount(query)) throw std::invalid_argument("ranking size differs from query size");
  rankings_[query] = std::move(ranking);
  present_[query] = 1;
}

bool RankingFunction::total() const {
  for (Mask q = 1; q < (Mask{1} << n_); ++q)
    if (!present_[q]) return false;
  return true;
}

double kth_order_utility(const UtilityTables& tables, int item, Mask context, int order) {
  const int c = std::popcount(context);
  if (order < 0 || order > c) throw std::invalid_argument("order must lie in [0, |context|]");
  double u = tables.at(item, Mask{0});
  for (int k = 1; k <= order; ++k) {
    double sum = 0.0;
    // Enumerate the k-element subsets of `context` in increasing numeric order.
    for (Mask sub = context;; sub = (sub - 1) & context) {
      if (std::popcount(sub) == k) sum += tables.at(item, sub);
      if (sub == 0) break;
    }
    u += sum / binomial(c, k);
  }
  return u;
}

Eigen::VectorXd feta_scores(const UtilityTables& tables, Mask query, int order) {
  const auto members = from_mask(query);
  Eigen::VectorXd s(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    const Mask context = query & ~(Mask{1} << members[k]);
    s(static_cast<Eigen::Index>(k)) = kth_order_utility(tables, members[k], context, order);
  }
  return s;
}

Ranking feta_rank(const UtilityTables& tables, Mask query, int max_order) {
  const int order = std::min(max_order, std::popcount(query) - 1);
  return rank_from_scores(feta_scores(tables, query, order));
}

RankingFunction induced_ranking_function(const UtilityTables& tables, int max_order) {
  RankingFunction rho(tables.universe_size());
  for (Mask q = 1; q < (Mask{1} << tables.universe_size()); ++q) rho.set(q, feta_rank(tables, q, max_order));
  return rho;
}

UtilityTables construct_feta_tables(const RankingFunction& rho, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!rho.total()) throw std::invalid_argument("ranking function is not total");
  const int n = rho.universe_size();
  const Mask full = (Mask{1} << n) - 1;
  UtilityTables tables(n);
  for (int i = 0; i < n; ++i) tables.set(i, Mask{0}, 0.0);

  // Pairs: U_1(i, {j}) = 1 iff i precedes j.
  for (Mask q = 1; q <= full; ++q) {
    if (std::popcount(q) != 2) continue;
    const auto members = from_mask(q);
    const Ranking& r = rho(q);
    tables.set(members[0], Mask{1} << members[1], r[0] < r[1] ? 1.0 : 0.0);
    tables.set(members[1], Mask{1} << members[0], r[1] < r[0] ? 1.0 : 0.0);
  }

  for (int m = 3; m <= n; ++m) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Mask q = 1; q <= full; ++q) {
      if (std::popcount(q) != m - 1) continue;
      const auto s = feta_scores(tables, q, m - 2);
      lo = std::min(lo, s.minCoeff());
      hi = std::max(hi, s.maxCoeff());
    }
    const double step = (hi - lo) + epsilon;
    for (Mask q = 1; q <= full; ++q) {
      if (std::popcount(q) != m) continue;
      const auto members = from_mask(q);
      const Ranking& r = rho(q);
      for (int k = 0; k < m; ++k) {
        const Mask context = q & ~(Mask{1} << members[k]);
        tables.set(members[k], context, (m - (r[k] + 1)) * step);
      }
    }
  }
  return tables;
}

VerificationReport verify_reconstruction(const RankingFunction& rho, const UtilityTables& tables) {
  const int n = rho.universe_size();
  if (tables.universe_size() != n) throw std::invalid_argument("universe size mismatch");
  VerificationReport report;
  report.min_margin = std::numeric_limits<double>::infinity();
  for (Mask q = 1; q < (Mask{1} << n); ++q) {
    ++report.queries;
    const int size = std::popcount(q);
    const auto s = feta_scores(tables, q, size - 1);
    const Ranking got = rank_from_scores(s);
    const Ranking& expected = rho(q);
    if (got != expected) report.mismatches.push_back({q, expected, got});
    const auto order = expected.ordering();
    for (int k = 0; k + 1 < size; ++k) report.min_margin = std::min(report.min_margin, s(order[k]) - s(order[k + 1]));
  }
  if (!std::isfinite(report.min_margin)) report.min_margin = 0.0;
  return report;
}

void write_report(std::ostream& out, const VerificationReport& report, int universe_size) {
  out << "universe_size: " << universe_size << '\n'
      << "queries: " << report.queries << '\n'
      << "mismatches: " << report.mismatches.size() << '\n'
      << "min_margin: " << report.min_margin << '\n';
  for (const auto& m : report.mismatches)
    out << "mismatch query=" << format_mask(m.query) << " expected=" << format_positions(m.expected)
        << " got=" << format_positions(m.got) << '\n';
}

RankingFunction random_ranking_function(int universe_size, std::mt19937_64& rng) {
  RankingFunction rho(universe_size);
  for (Mask q = 1; q < (Mask{1} << universe_size); ++q) {
    std::vector<int> order(std::popcount(q));
    std::iota(order.begin(), order.end(), 0);
    for (int k = static_cast<int>(order.size()) - 1; k > 0; --k) {
      std::uniform_int_distribution<int> pick(0, k);
      std::swap(order[k], order[pick(rng)]);
    }
    rho.set(q, Ranking::from_ordering(order));
  }
  return rho;
}

UtilityTables with_zero_level(const UtilityTables& tables, int level) {
  UtilityTables out = tables;
  const int n = tables.universe_size();
  for (int i = 0; i < n; ++i)
    for (Mask c = 0; c < (Mask{1} << n); ++c) {
      if ((c >> i) & 1u || std::popcount(c) != level) continue;
      if (!out.has(i, c)) out.set(i, c, 0.0);
    }
  return out;
}

bool has_preference_reversal(const RankingFunction& rho) {
  const int n = rho.universe_size();
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      int seen = 0;  // bit 0: a before b observed, bit 1: b before a observed
      for (Mask q = 1; q < (Mask{1} << n); ++q) {
        if (!((q >> a) & 1u) || !((q >> b) & 1u)) continue;
        const auto members = from_mask(q);
        const auto ia = std::find(members.begin(), members.end(), a) - members.begin();
        const auto ib = std::find(members.begin(), members.end(), b) - members.begin();
        const Ranking& r = rho(q);
        seen |= r[static_cast<int>(ia)] < r[static_cast<int>(ib)] ? 1 : 2;
        if (seen == 3) return true;
      }
    }
  return false;
}

SpanCheck zeroth_order_span(int universe_size) {
  if (universe_size < 1 || universe_size > 6) throw std::invalid_argument("zeroth_order_span supports N in [1, 6]");
  SpanCheck check;
  std::vector<int> values(universe_size);
  std::iota(values.begin(), values.end(), 1);
  std::set<std::vector<int>> distinct;
  do {
    UtilityTables tables(universe_size);
    for (int i = 0; i < universe_size; ++i) tables.set(i, Mask{0}, values[i]);
    const auto rho = induced_ranking_function(tables, 0);

    const Mask full = (Mask{1} << universe_size) - 1;
    const auto global = rho(full);
    std::vector<int> signature;
    for (Mask q = 1; q <= full; ++q) {
      const auto members = from_mask(q);
      const Ranking& r = rho(q);
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = 0; b < members.size(); ++b)
          if ((r[static_cast<int>(a)] < r[static_cast<int>(b)]) != (global[members[a]] < global[members[b]]))
            check.restrictions_consistent = false;
      signature.insert(signature.end(), r.positions().begin(), r.positions().end());
    }
    if (has_preference_reversal(rho)) check.reversal_found = true;
    distinct.insert(std::move(signature));
  } while (std::next_permutation(values.begin(), values.end()));
  check.realizable_functions = static_cast<long>(distinct.size());
  return check;
}

}  // namespace ctxrank::decomposition
