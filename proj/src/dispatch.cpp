#include "rcd/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcd/common.hpp"

namespace rcd {
namespace {

void check_costs(const Matrix& cost) {
  for (double v : cost.data)
    if (!std::isfinite(v) || v < 0.0) throw Error("dispatch costs must be finite and >= 0");
}

// Assigns every row of an n x m matrix (n <= m). Returns the column per row.
std::vector<std::size_t> assign_rows(std::size_t n, std::size_t m,
                                     const auto& a /* (i, j) -> cost */) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j]) col[p[j] - 1] = j - 1;
  return col;
}

Assignment finish(std::vector<std::pair<std::size_t, std::size_t>> pairs, const Matrix& cost) {
  std::sort(pairs.begin(), pairs.end());
  Assignment out;
  for (const auto& [r, d] : pairs) out.total_cost_s += cost(r, d);
  out.pairs = std::move(pairs);
  return out;
}

}  // namespace

Assignment hungarian_match(const Matrix& cost) {
  if (cost.rows == 0 || cost.cols == 0) return {};
  check_costs(cost);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (cost.rows <= cost.cols) {
    const auto col = assign_rows(cost.rows, cost.cols,
                                 [&](std::size_t i, std::size_t j) { return cost(i, j); });
    for (std::size_t i = 0; i < cost.rows; ++i) pairs.emplace_back(i, col[i]);
  } else {
    const auto row = assign_rows(cost.cols, cost.rows,
                                 [&](std::size_t i, std::size_t j) { return cost(j, i); });
    for (std::size_t j = 0; j < cost.cols; ++j) pairs.emplace_back(row[j], j);
  }
  return finish(std::move(pairs), cost);
}

Assignment hungarian_match_padded(const Matrix& cost) {
  if (cost.rows == 0 || cost.cols == 0) return {};
  check_costs(cost);
  const std::size_t n = std::max(cost.rows, cost.cols);
  const double sentinel = 10.0 * (*std::max_element(cost.data.begin(), cost.data.end()) + 1.0);
  Matrix sq(n, n, sentinel);
  for (std::size_t i = 0; i < cost.rows; ++i)
    for (std::size_t j = 0; j < cost.cols; ++j) sq(i, j) = cost(i, j);
  const auto col = assign_rows(n, n, [&](std::size_t i, std::size_t j) { return sq(i, j); });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < cost.rows; ++i)
    if (col[i] < cost.cols) pairs.emplace_back(i, col[i]);
  return finish(std::move(pairs), cost);
}

Assignment greedy_match(const Matrix& cost) {
  if (cost.rows == 0 || cost.cols == 0) return {};
  check_costs(cost);
  std::vector<char> taken(cost.cols, 0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t r = 0; r < cost.rows; ++r) {
    std::size_t best = cost.cols;
    for (std::size_t d = 0; d < cost.cols; ++d)
      if (!taken[d] && (best == cost.cols || cost(r, d) < cost(r, best))) best = d;
    if (best == cost.cols) break;
    taken[best] = 1;
    pairs.emplace_back(r, best);
  }
  return finish(std::move(pairs), cost);
}

}  // namespace rcd
