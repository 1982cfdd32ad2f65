#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "rcd/matrix.hpp"

namespace rcd {

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (request, driver)
  double total_cost_s = 0.0;
};

/// Minimum-cost matching on an n_requests x n_drivers cost matrix. The
/// smaller side is matched completely. Rectangular O(n^2 m) shortest
/// augmenting path with potentials; pairs are ordered by request index.
Assignment hungarian_match(const Matrix& cost);

/// Square reference: pads to max(n, m) with a sentinel of
/// 10 * (max cost + 1) and drops sentinel pairs.
Assignment hungarian_match_padded(const Matrix& cost);

/// Requests in row order, each taking the cheapest unassigned driver
/// (lowest driver index on ties).
Assignment greedy_match(const Matrix& cost);

}  // namespace rcd
