#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "rcd/calibration.hpp"
#include "rcd/geo.hpp"
#include "rcd/matrix.hpp"

namespace rcd {

struct ZoneBalance {
  ZoneId zone = 0;
  int idle = 0;
  double forecast = 0.0;  // expected requests over the lookahead
  int incoming = 0;       // drivers already repositioning into the zone

  double supply() const { return idle + incoming; }
  /// Movable excess; only idle drivers can be moved.
  double surplus() const {
    const double s = supply() - forecast;
    return s <= 0.0 ? 0.0 : (s < idle ? s : idle);
  }
  double deficit() const { return forecast > supply() ? forecast - supply() : 0.0; }
};

struct LpConfig {
  double move_fraction = 0.50;
  double lookahead_min = 5.0;
  int interval_steps = 6;

  void validate() const;

  friend bool operator==(const LpConfig&, const LpConfig&) = default;
};

struct Move {
  ZoneId from = 0;
  ZoneId to = 0;
  int count = 0;

  friend bool operator==(const Move&, const Move&) = default;
};

struct RepositionPlan {
  std::vector<Move> moves;
  double objective_value = 0.0;  // continuous LP optimum
  double served_estimate = 0.0;  // sum_d min(deficit_d, integer inflow_d)
  double optimality_gap = 0.0;   // primal minus certified dual bound

  int total_moves() const;
};

/// Per-zone share of forecast pickups implied by a prior's OD sampler.
class SpatialForecast {
 public:
  SpatialForecast(const CalibratedPrior& prior, const HexGrid& grid);

  double share(ZoneId z) const;
  const std::map<ZoneId, double>& shares() const { return shares_; }
  /// Expected requests in [now_s, now_s + lookahead_s), pro rata on bins.
  double expected_requests(double now_s, double lookahead_s) const;

 private:
  std::map<ZoneId, double> shares_;
  std::vector<double> rate_profile_;
  int bin_seconds_;
};

/// `incoming` holds the destinations of drivers already repositioning.
std::vector<ZoneBalance> zone_balances(std::span<const LatLon> idle_drivers,
                                       const SpatialForecast& forecast, double now_s,
                                       double lookahead_min, const HexGrid& grid,
                                       std::span<const LatLon> incoming = {});
std::vector<ZoneBalance> zone_balances(std::span<const LatLon> idle_drivers,
                                       const CalibratedPrior& prior, double now_s,
                                       double lookahead_min, const HexGrid& grid,
                                       std::span<const LatLon> incoming = {});

/// Continuous solution of the surplus/deficit transportation LP.
struct TransportSolution {
  Matrix x;                // |S| x |D|
  std::vector<double> y;   // served per deficit zone
  double objective = 0.0;
  double dual_bound = 0.0;
  double gap() const { return objective - dual_bound; }
};

/// min alpha*sum c_sd x_sd - sum y_d  s.t. supply, demand cap, linking
/// and budget constraints. Solved as a min-cost flow by successive
/// shortest paths; the dual bound comes from node potentials.
TransportSolution solve_transport_lp(std::span<const double> surplus,
                                     std::span<const double> deficit, const Matrix& cost,
                                     double alpha, double budget);

/// `c` is indexed in `balances` order. Builds the LP over surplus and
/// deficit zones, solves it, and rounds x by largest remainder. When
/// `lp_dump` is non-null the instance is written in CPLEX LP format.
RepositionPlan solve_reposition_lp(std::span<const ZoneBalance> balances, const Matrix& c,
                                   const LpConfig& cfg, int n_idle,
                                   std::ostream* lp_dump = nullptr);

/// Demand-following greedy: one driver at a time from the largest surplus
/// to the nearest positive deficit, ties broken by zone id.
RepositionPlan heuristic_reposition(std::span<const ZoneBalance> balances, const Matrix& c,
                                    const LpConfig& cfg, int n_idle);

int move_budget(const LpConfig& cfg, int n_idle);

/// Post-move driver count (idle + incoming) per zone, in `balances` order.
std::vector<double> post_move_supply(const RepositionPlan& plan,
                                     std::span<const ZoneBalance> balances);

/// U(x, d) = sum_j max(0, d_j - s_j).
double unserved(std::span<const double> supply, std::span<const double> demand);

struct BoundCheck {
  double lhs = 0.0;          // U(x, d_true)
  double rhs = 0.0;          // U(x, d_est) + |d_est - d_true|_1
  double unserved_est = 0.0;
  double l1_gap = 0.0;
};

BoundCheck unserved_bound_check(const RepositionPlan& plan,
                                std::span<const ZoneBalance> balances_est,
                                std::span<const ZoneBalance> balances_true);

void write_lp(std::ostream& out, std::span<const double> surplus,
              std::span<const double> deficit, const Matrix& cost, double alpha,
              double budget);

}  // namespace rcd
