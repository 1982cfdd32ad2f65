#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "rcd/dispatch.hpp"
#include "support.hpp"

using namespace rcd;

namespace {

Matrix random_cost(Rng& rng, std::size_t r, std::size_t c, bool integer) {
  Matrix m(r, c);
  for (auto& v : m.data) v = integer ? static_cast<double>(rng.below(1000)) : rng.uniform(0.0, 900.0);
  return m;
}

void check_matching(const Assignment& a, const Matrix& cost) {
  CHECK(a.pairs.size() == std::min(cost.rows, cost.cols));
  std::set<std::size_t> rows, cols;
  double total = 0.0;
  for (const auto& [r, c] : a.pairs) {
    CHECK(r < cost.rows);
    CHECK(c < cost.cols);
    rows.insert(r);
    cols.insert(c);
    total += cost(r, c);
  }
  CHECK(rows.size() == a.pairs.size());
  CHECK(cols.size() == a.pairs.size());
  CHECK(std::is_sorted(a.pairs.begin(), a.pairs.end()));
  CHECK(a.total_cost_s == doctest::Approx(total).epsilon(1e-12));
}

}  // namespace

TEST_CASE("hungarian: small examples") {
  SUBCASE("empty sides") {
    CHECK(hungarian_match(Matrix(0, 3)).pairs.empty());
    CHECK(hungarian_match(Matrix(2, 0)).pairs.empty());
    CHECK(greedy_match(Matrix(0, 0)).pairs.empty());
  }
  SUBCASE("2x2 anti-diagonal") {
    Matrix c(2, 2);
    c(0, 0) = 10;
    c(0, 1) = 1;
    c(1, 0) = 1;
    c(1, 1) = 10;
    const auto a = hungarian_match(c);
    CHECK(a.total_cost_s == 2.0);
    CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  }
  SUBCASE("greedy is myopic where hungarian is not") {
    Matrix c(2, 2);
    c(0, 0) = 1;
    c(0, 1) = 2;
    c(1, 0) = 2;
    c(1, 1) = 100;
    CHECK(greedy_match(c).total_cost_s == 101.0);
    CHECK(hungarian_match(c).total_cost_s == 4.0);
  }
  SUBCASE("more drivers than requests") {
    Matrix c(1, 3);
    c(0, 0) = 5;
    c(0, 1) = 3;
    c(0, 2) = 3;
    const auto g = greedy_match(c);
    CHECK(g.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
    CHECK(hungarian_match(c).total_cost_s == 3.0);
  }
  SUBCASE("more requests than drivers") {
    Matrix c(3, 1);
    c(0, 0) = 7;
    c(1, 0) = 2;
    c(2, 0) = 9;
    const auto a = hungarian_match(c);
    CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}});
    CHECK(greedy_match(c).pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}});
  }
}

TEST_CASE("hungarian matches exhaustive permutations exactly") {
  Rng rng(60);
  for (int it = 0; it < 500; ++it) {
    const std::size_t r = 1 + rng.below(7), c = 1 + rng.below(7);
    const auto cost = random_cost(rng, r, c, it % 2 == 0);
    const double oracle = rcd::test::brute_force_assignment(cost);
    const auto a = hungarian_match(cost);
    const auto p = hungarian_match_padded(cost);
    check_matching(a, cost);
    check_matching(p, cost);
    if (it % 2 == 0) {
      CHECK(a.total_cost_s == oracle);
      CHECK(p.total_cost_s == oracle);
    } else {
      CHECK(a.total_cost_s == doctest::Approx(oracle).epsilon(1e-12));
      CHECK(p.total_cost_s == doctest::Approx(oracle).epsilon(1e-12));
    }
    const auto g = greedy_match(cost);
    check_matching(g, cost);
    CHECK(g.total_cost_s >= a.total_cost_s - 1e-9);
  }
}

TEST_CASE("hungarian: optimum is invariant under row and column permutations") {
  Rng rng(61);
  for (int it = 0; it < 200; ++it) {
    const std::size_t r = 1 + rng.below(30), c = 1 + rng.below(30);
    const auto cost = random_cost(rng, r, c, true);
    std::vector<std::size_t> pr(r), pc(c);
    std::iota(pr.begin(), pr.end(), 0);
    std::iota(pc.begin(), pc.end(), 0);
    rcd::test::shuffle(rng, pr);
    rcd::test::shuffle(rng, pc);
    Matrix permuted(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) permuted(i, j) = cost(pr[i], pc[j]);
    const auto a = hungarian_match(cost);
    CHECK(hungarian_match(permuted).total_cost_s == a.total_cost_s);
    CHECK(hungarian_match_padded(cost).total_cost_s == a.total_cost_s);
    // adding a constant to a row of a square problem shifts the optimum by it
    if (r == c) {
      Matrix shifted = cost;
      for (std::size_t j = 0; j < c; ++j) shifted(0, j) += 37.0;
      CHECK(hungarian_match(shifted).total_cost_s == a.total_cost_s + 37.0);
    }
  }
}

TEST_CASE("hungarian: deterministic and handles large ties") {
  Matrix flat(40, 25, 60.0);
  const auto a = hungarian_match(flat);
  CHECK(a.total_cost_s == 25 * 60.0);
  CHECK(hungarian_match(flat).pairs == a.pairs);
  check_matching(a, flat);
}
