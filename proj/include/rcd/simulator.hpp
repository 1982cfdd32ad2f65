#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcd/calibration.hpp"
#include "rcd/geo.hpp"
#include "rcd/metrics.hpp"
#include "rcd/reposition.hpp"

namespace rcd {

enum class Policy { replay_greedy, replay_batch, cal_only, cal_heuristic, cal_lp };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);
bool is_calibrated(Policy p);

struct SimConfig {
  int step_s = 30;
  int horizon_s = 14400;
  int batch_window_s = 60;
  int max_wait_s = 600;
  double fleet_fraction = 0.15;
  double fleet_scale = 1.0;
  Policy policy = Policy::replay_batch;
  std::uint64_t seed = 42;
  RouterConfig router;
  LpConfig lp;
  int hex_resolution = 8;
  BoundingBox bbox = kManhattanBox;
  // cal_* dispatch adds bias * share(driver zone) / max share seconds to
  // each pickup cost, keeping drivers in forecast-hot zones. 0 disables it.
  double cal_dispatch_bias = 0.0;
  // cal_* policies replay the ground-truth stream unless this is set, in
  // which case demand is sampled from the prior.
  bool demand_from_prior = false;

  void validate() const;
};

struct Request {
  std::int64_t id = 0;
  std::int64_t created_s = 0;
  LatLon pickup;
  LatLon dropoff;
};

/// Requests from a block's trips, ordered by (offset, pool index).
std::vector<Request> replay_demand(const RegimeBlock& block);
std::vector<Request> prior_demand(const CalibratedPrior& prior, std::uint64_t seed);

enum class DriverStatus { idle, to_pickup, to_dropoff, repositioning };

struct Driver {
  std::int64_t id = 0;
  LatLon position;
  DriverStatus status = DriverStatus::idle;
  std::int64_t busy_until_s = 0;
  LatLon destination;
  // Leg start, used to interpolate a repositioning driver's position.
  LatLon leg_origin;
  std::int64_t leg_start_s = 0;
  std::int64_t request = -1;  // index into the demand vector
};

/// round(fraction * mean hourly rate * scale), at least 1, placed
/// uniformly in the bounding box.
std::vector<Driver> init_fleet(std::span<const Request> demand, const SimConfig& cfg,
                               std::uint64_t seed);

/// Position of a driver at time t (interpolated while repositioning).
LatLon position_at(const Driver& d, std::int64_t t);

/// Moves `count` idle drivers per move, nearest to the destination
/// centroid first. Returns the number of requested moves that had to be
/// clipped because the origin zone lacked idle drivers.
int apply_plan(std::vector<Driver>& drivers, const RepositionPlan& plan, const HexGrid& grid,
               const Router& router, std::int64_t now_s, int step_s);

struct SimRun {
  std::vector<RequestOutcome> outcomes;
  SimResult result;
  int n_drivers = 0;
  int reposition_moves = 0;
  int clipped_moves = 0;
};

/// Runs one policy over `demand`. cal_* policies need a prior.
SimRun run(const SimConfig& cfg, std::span<const Request> demand,
           const CalibratedPrior* prior = nullptr);

/// One JSON object per request: request_id, created_s, wait_s, status,
/// pickup_zone.
std::string trace_jsonl(std::span<const RequestOutcome> outcomes);

}  // namespace rcd
