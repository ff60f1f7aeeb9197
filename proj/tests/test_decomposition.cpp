#include "ctxrank/decomposition.hpp"
#include "ctxrank/rankers.hpp"

#include "doctest.h"

#include <algorithm>
#include <bit>
#include <random>
#include <sstream>

using namespace ctxrank;
using namespace ctxrank::decomposition;

namespace {

// Support matrix over items {a, b, c, d} = {0, 1, 2, 3}.
constexpr double kSupport[4][4] = {
    {0.0, 0.7, 0.5, 0.1},
    {0.2, 0.0, 0.8, 0.9},
    {0.5, 0.2, 0.0, 0.4},
    {0.7, 0.1, 0.5, 0.0},
};

UtilityTables support_tables() {
  UtilityTables t(4);
  for (int i = 0; i < 4; ++i) {
    t.set(i, Mask{0}, 0.0);
    for (int j = 0; j < 4; ++j)
      if (i != j) t.set(i, Mask{1} << j, kSupport[i][j]);
  }
  return t;
}

Mask mask_of(std::initializer_list<int> items) { return to_mask(std::vector<int>(items)); }

}  // namespace

TEST_CASE("mask helpers") {
  CHECK(mask_of({0, 2, 3}) == 0b1101u);
  CHECK(from_mask(0b1101u) == std::vector<int>{0, 2, 3});
  CHECK(from_mask(0).empty());
  CHECK_THROWS_AS(mask_of({kMaxUniverse}), std::invalid_argument);
}

TEST_CASE("utility table lookups ignore context order") {
  std::mt19937_64 rng(1);
  UtilityTables t(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int item = static_cast<int>(rng() % 5);
    std::vector<int> ctx;
    for (int j = 0; j < 5; ++j)
      if (j != item && (rng() & 1u)) ctx.push_back(j);
    const double v = u(rng);
    t.set(item, ctx, v);
    std::shuffle(ctx.begin(), ctx.end(), rng);
    CHECK(t.at(item, ctx) == v);
  }
  CHECK_THROWS_AS(t.at(0, mask_of({0})), std::invalid_argument);
  CHECK_THROWS_AS(UtilityTables(2).at(0, mask_of({1})), std::out_of_range);
  CHECK_THROWS_AS(t.set(0, Mask{0}, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(UtilityTables(0), std::invalid_argument);
}

TEST_CASE("kth_order_utility examples") {
  const auto t = support_tables();
  CHECK(kth_order_utility(t, 0, mask_of({1, 2}), 1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(kth_order_utility(t, 0, mask_of({1, 2}), 0) == 0.0);
  CHECK(kth_order_utility(t, 2, mask_of({3}), 1) == 0.4);

  UtilityTables z(3);
  for (int i = 0; i < 3; ++i) z.set(i, Mask{0}, 1.5 * i);
  z.set(1, mask_of({2}), 0.25);
  CHECK(kth_order_utility(z, 1, mask_of({0, 2}), 0) == 1.5);
  CHECK(kth_order_utility(z, 1, mask_of({2}), 1) == 1.75);
  CHECK_THROWS_AS(kth_order_utility(z, 1, mask_of({0, 2}), 1), std::out_of_range);  // U_1(1, {0}) missing
  CHECK_THROWS_AS(kth_order_utility(z, 1, mask_of({2}), 2), std::invalid_argument);
}

TEST_CASE("tabular FETA on the support illustration") {
  const auto t = support_tables();
  CHECK(feta_rank(t, mask_of({0, 1, 2}), 1).ordering() == std::vector<int>{0, 1, 2});
  // Members {a, b, d}: b first, then a and d tied at 0.4 with a (lower index) ahead.
  const auto q2 = feta_scores(t, mask_of({0, 1, 3}), 1);
  CHECK(q2(0) == q2(2));
  CHECK(feta_rank(t, mask_of({0, 1, 3}), 1).ordering() == std::vector<int>{1, 0, 2});

  const auto rho = induced_ranking_function(t, 1);
  CHECK(has_preference_reversal(rho));

  // Agrees with the generic first-order aggregation on every query.
  for (Mask q = 1; q < 16; ++q) {
    const auto members = from_mask(q);
    const auto s = feta_aggregate(
        static_cast<int>(members.size()), [](int) { return 0.0; },
        [&](int i, int j) { return kSupport[members[i]][members[j]]; });
    CHECK(rank_from_scores(s) == rho(q));
  }
}

TEST_CASE("construction base cases") {
  RankingFunction one(1);
  one.set(1, Ranking::identity(1));
  const auto t1 = construct_feta_tables(one);
  CHECK(t1.at(0, Mask{0}) == 0.0);
  CHECK(t1.max_order() == 0);
  CHECK(verify_reconstruction(one, t1).ok());

  RankingFunction two(2);
  two.set(0b01, Ranking::identity(1));
  two.set(0b10, Ranking::identity(1));
  two.set(0b11, Ranking::identity(2));  // a before b
  const auto t2 = construct_feta_tables(two);
  CHECK(t2.at(0, mask_of({1})) == 1.0);
  CHECK(t2.at(1, mask_of({0})) == 0.0);
  CHECK(t2.at(0, Mask{0}) == 0.0);
  CHECK(t2.at(1, Mask{0}) == 0.0);
  const auto report = verify_reconstruction(two, t2);
  CHECK(report.ok());
  CHECK(report.queries == 3);

  CHECK_THROWS_AS(construct_feta_tables(two, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(construct_feta_tables(RankingFunction(3)), std::invalid_argument);
}

TEST_CASE("construction reproduces every random ranking function") {
  for (double epsilon : {1e-6, 1.0, 1e3}) {
    CAPTURE(epsilon);
    for (int n = 1; n <= 5; ++n) {
      std::mt19937_64 rng(100 + n);
      for (int trial = 0; trial < 100; ++trial) {
        const auto rho = random_ranking_function(n, rng);
        const auto tables = construct_feta_tables(rho, epsilon);
        const auto report = verify_reconstruction(rho, tables);
        CHECK(report.queries == (1L << n) - 1);
        CHECK(report.mismatches.empty());
        if (n >= 2) CHECK(report.min_margin > 0.0);
        CHECK(tables.max_order() == n - 1);
      }
    }
  }
}

TEST_CASE("construction reproduces the function induced by the support matrix") {
  const auto rho = induced_ranking_function(support_tables(), 1);
  CHECK(verify_reconstruction(rho, construct_feta_tables(rho)).ok());
}

TEST_CASE("verification reports planted mismatches") {
  // Ranking function with the a/b reversal of the support illustration.
  const auto rho = induced_ranking_function(support_tables(), 1);
  UtilityTables zero(4);
  for (int i = 0; i < 4; ++i)
    for (Mask c = 0; c < 16; ++c)
      if (!((c >> i) & 1u)) zero.set(i, c, 0.0);
  const auto report = verify_reconstruction(rho, zero);
  CHECK_FALSE(report.ok());
  CHECK(report.queries == 15);
  CHECK(report.min_margin <= 0.0);

  std::ostringstream out;
  write_report(out, report, 4);
  CHECK(out.str().find("queries: 15") != std::string::npos);
  CHECK(out.str().find("mismatch query=") != std::string::npos);
}

TEST_CASE("zeroth-order tables span only global orders") {
  CHECK(zeroth_order_span(1).realizable_functions == 1);
  CHECK(zeroth_order_span(2).realizable_functions == 2);
  const long factorial[] = {1, 1, 2, 6, 24, 120, 720};
  for (int n = 1; n <= 6; ++n) {
    const auto check = zeroth_order_span(n);
    CHECK(check.realizable_functions == factorial[n]);
    CHECK(check.restrictions_consistent);
    CHECK_FALSE(check.reversal_found);
  }
  CHECK_THROWS_AS(zeroth_order_span(7), std::invalid_argument);

  // U_0 = (3, 1, 2): a > c > b on every subset.
  UtilityTables t(3);
  t.set(0, Mask{0}, 3.0);
  t.set(1, Mask{0}, 1.0);
  t.set(2, Mask{0}, 2.0);
  const auto rho = induced_ranking_function(t, 0);
  const int global[] = {0, 2, 1};
  for (Mask q = 1; q < 8; ++q) {
    const auto members = from_mask(q);
    const auto& r = rho(q);
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = 0; b < members.size(); ++b)
        CHECK((r[static_cast<int>(a)] < r[static_cast<int>(b)]) == (global[members[a]] < global[members[b]]));
  }
}

TEST_CASE("adding a zero level preserves the induced ranking function") {
  std::mt19937_64 rng(7);
  for (int n = 2; n <= 5; ++n)
    for (int trial = 0; trial < 20; ++trial) {
      const auto rho = random_ranking_function(n, rng);
      const auto tables = construct_feta_tables(rho);
      for (int order = 0; order < n - 1; ++order) {
        // Tables truncated at `order`, padded with a zero level at order + 1.
        UtilityTables truncated(n);
        for (int i = 0; i < n; ++i)
          for (Mask c = 0; c < (Mask{1} << n); ++c)
            if (!((c >> i) & 1u) && std::popcount(c) <= order) truncated.set(i, c, tables.at(i, c));
        const auto before = induced_ranking_function(truncated, order);
        const auto after = induced_ranking_function(with_zero_level(truncated, order + 1), order + 1);
        for (Mask q = 1; q < (Mask{1} << n); ++q) CHECK(before(q) == after(q));
      }
    }
}
