#include "rcd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"
#include "rcd/dispatch.hpp"
#include "rcd/random.hpp"

namespace rcd {

std::string to_string(Policy p) {
  switch (p) {
    case Policy::replay_greedy: return "replay_greedy";
    case Policy::replay_batch: return "replay_batch";
    case Policy::cal_only: return "cal_only";
    case Policy::cal_heuristic: return "cal_heuristic";
    case Policy::cal_lp: return "cal_lp";
  }
  return "replay_batch";
}

Policy policy_from_string(const std::string& s) {
  for (Policy p : {Policy::replay_greedy, Policy::replay_batch, Policy::cal_only,
                   Policy::cal_heuristic, Policy::cal_lp})
    if (to_string(p) == s) return p;
  throw Error("unknown policy '" + s + "'");
}

bool is_calibrated(Policy p) {
  return p == Policy::cal_only || p == Policy::cal_heuristic || p == Policy::cal_lp;
}

void SimConfig::validate() const {
  if (step_s <= 0) throw Error("step_s must be > 0");
  if (horizon_s <= 0 || horizon_s % step_s) throw Error("horizon_s must be a positive multiple of step_s");
  if (batch_window_s <= 0 || batch_window_s % step_s)
    throw Error("batch_window_s must be a positive multiple of step_s");
  if (max_wait_s < 0) throw Error("max_wait_s must be >= 0");
  if (!(fleet_fraction > 0.0)) throw Error("fleet_fraction must be > 0");
  if (!(fleet_scale > 0.0)) throw Error("fleet_scale must be > 0");
  if (cal_dispatch_bias < 0.0) throw Error("cal_dispatch_bias must be >= 0");
  router.validate();
  lp.validate();
}

std::vector<Request> replay_demand(const RegimeBlock& block) {
  std::vector<std::size_t> order(block.od_pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return block.od_pool[a].offset_s < block.od_pool[b].offset_s;
  });
  std::vector<Request> out;
  out.reserve(order.size());
  for (std::size_t i : order) {
    const auto& od = block.od_pool[i];
    out.push_back({static_cast<std::int64_t>(out.size()), od.offset_s, od.pickup, od.dropoff});
  }
  return out;
}

std::vector<Request> prior_demand(const CalibratedPrior& prior, std::uint64_t seed) {
  std::vector<Request> out;
  for (const auto& r : sample_requests(prior, seed))
    out.push_back({static_cast<std::int64_t>(out.size()), r.time_s, r.pickup, r.dropoff});
  return out;
}

std::vector<Driver> init_fleet(std::span<const Request> demand, const SimConfig& cfg,
                               std::uint64_t seed) {
  const double hourly = static_cast<double>(demand.size()) / (cfg.horizon_s / 3600.0);
  const auto n = std::max<std::int64_t>(
      1, std::llround(cfg.fleet_fraction * hourly * cfg.fleet_scale));
  Rng rng(seed);
  std::vector<Driver> fleet(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    auto& d = fleet[i];
    d.id = i;
    d.position.lat = rng.uniform(cfg.bbox.min_lat, cfg.bbox.max_lat);
    d.position.lon = rng.uniform(cfg.bbox.min_lon, cfg.bbox.max_lon);
    d.destination = d.leg_origin = d.position;
  }
  return fleet;
}

LatLon position_at(const Driver& d, std::int64_t t) {
  if (d.status == DriverStatus::idle || d.status == DriverStatus::to_dropoff) return d.position;
  const auto span = d.busy_until_s - d.leg_start_s;
  if (span <= 0 || t >= d.busy_until_s) return d.destination;
  const double f = std::clamp(static_cast<double>(t - d.leg_start_s) / span, 0.0, 1.0);
  return {d.leg_origin.lat + f * (d.destination.lat - d.leg_origin.lat),
          d.leg_origin.lon + f * (d.destination.lon - d.leg_origin.lon)};
}

namespace {

std::int64_t ceil_seconds(double s) { return static_cast<std::int64_t>(std::ceil(s - 1e-9)); }

std::int64_t ceil_to_step(std::int64_t s, int step) { return (s + step - 1) / step * step; }

void start_leg(Driver& d, DriverStatus status, LatLon to, std::int64_t now, std::int64_t secs,
               int step) {
  d.leg_origin = d.position;
  d.leg_start_s = now;
  d.destination = to;
  d.status = status;
  d.busy_until_s = now + ceil_to_step(secs, step);
}

}  // namespace

int apply_plan(std::vector<Driver>& drivers, const RepositionPlan& plan, const HexGrid& grid,
               const Router& router, std::int64_t now_s, int step_s) {
  std::map<ZoneId, std::vector<std::size_t>> idle_by_zone;
  for (std::size_t i = 0; i < drivers.size(); ++i)
    if (drivers[i].status == DriverStatus::idle)
      idle_by_zone[grid.zone_of(drivers[i].position)].push_back(i);
  int clipped = 0;
  for (const auto& m : plan.moves) {
    if (m.count <= 0 || m.from == m.to) continue;
    auto& pool = idle_by_zone[m.from];
    const LatLon target = grid.centroid(m.to);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i : pool) ranked.emplace_back(haversine_m(drivers[i].position, target), i);
    std::sort(ranked.begin(), ranked.end());
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(m.count), ranked.size());
    clipped += m.count - static_cast<int>(take);
    for (std::size_t k = 0; k < take; ++k) {
      auto& d = drivers[ranked[k].second];
      start_leg(d, DriverStatus::repositioning, target, now_s,
                ceil_seconds(router.seconds(d.position, target)), step_s);
    }
    std::vector<std::size_t> rest;
    for (std::size_t k = take; k < ranked.size(); ++k) rest.push_back(ranked[k].second);
    std::sort(rest.begin(), rest.end());
    pool = std::move(rest);
  }
  return clipped;
}

SimRun run(const SimConfig& cfg, std::span<const Request> demand, const CalibratedPrior* prior) {
  cfg.validate();
  const bool calibrated = is_calibrated(cfg.policy);
  if (calibrated && !prior) throw Error("policy " + to_string(cfg.policy) + " needs a prior");
  const bool repositions = cfg.policy == Policy::cal_heuristic || cfg.policy == Policy::cal_lp;

  const HexGrid grid(cfg.hex_resolution);
  const Router router(cfg.router);
  std::optional<SpatialForecast> forecast;
  double max_share = 0.0;
  if (calibrated) {
    forecast.emplace(*prior, grid);
    for (const auto& [z, s] : forecast->shares()) max_share = std::max(max_share, s);
  }

  SimRun out;
  auto drivers = init_fleet(demand, cfg, substream_seed(cfg.seed, 1));
  out.n_drivers = static_cast<int>(drivers.size());

  const std::size_t n_req = demand.size();
  out.outcomes.resize(n_req);
  std::vector<std::int64_t> trip_s(n_req, 0), planned_pickup(n_req, 0);
  std::vector<std::int64_t> driver_of(n_req, -1);
  for (std::size_t i = 0; i < n_req; ++i) {
    auto& o = out.outcomes[i];
    o.request_id = demand[i].id;
    o.created_s = demand[i].created_s;
    o.pickup_zone = grid.zone_of(demand[i].pickup);
  }
  std::vector<std::size_t> order(n_req);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return demand[a].created_s < demand[b].created_s;
  });

  std::size_t next_admit = 0;
  std::vector<std::size_t> pending;  // admitted, not yet picked up, not expired
  const int step = cfg.step_s;
  const int steps = cfg.horizon_s / step;

  for (int k = 0; k < steps; ++k) {
    const std::int64_t t = static_cast<std::int64_t>(k) * step;

    // (1) advance
    for (auto& d : drivers) {
      while (d.status != DriverStatus::idle && d.busy_until_s <= t) {
        const std::int64_t arrived = d.busy_until_s;
        d.position = d.destination;
        if (d.status == DriverStatus::to_pickup) {
          const auto r = static_cast<std::size_t>(d.request);
          auto& o = out.outcomes[r];
          o.pickup_s = planned_pickup[r];
          o.dropoff_s = planned_pickup[r] + trip_s[r];
          o.status = RequestStatus::completed;
          std::erase(pending, r);
          start_leg(d, DriverStatus::to_dropoff, demand[r].dropoff, arrived, trip_s[r], step);
        } else {
          d.status = DriverStatus::idle;
          d.request = -1;
        }
      }
    }

    // (2) admit
    while (next_admit < n_req && demand[order[next_admit]].created_s <= t)
      pending.push_back(order[next_admit++]);

    // (3) expire; a matched driver still en route is released
    std::erase_if(pending, [&](std::size_t r) {
      if (t - demand[r].created_s <= cfg.max_wait_s) return false;
      out.outcomes[r].status = RequestStatus::expired;
      if (driver_of[r] >= 0) {
        auto& d = drivers[static_cast<std::size_t>(driver_of[r])];
        d.position = position_at(d, t);
        d.status = DriverStatus::idle;
        d.request = -1;
      }
      return true;
    });

    // (4) dispatch
    const bool greedy = cfg.policy == Policy::replay_greedy;
    if (greedy || t % cfg.batch_window_s == 0) {
      std::vector<std::size_t> reqs, avail;
      for (std::size_t r : pending)
        if (driver_of[r] < 0) reqs.push_back(r);
      for (std::size_t i = 0; i < drivers.size(); ++i)
        if (drivers[i].status == DriverStatus::idle ||
            drivers[i].status == DriverStatus::repositioning)
          avail.push_back(i);
      if (!reqs.empty() && !avail.empty()) {
        std::vector<LatLon> pos(avail.size());
        std::vector<double> bias(avail.size(), 0.0);
        for (std::size_t j = 0; j < avail.size(); ++j) {
          pos[j] = position_at(drivers[avail[j]], t);
          if (calibrated && cfg.cal_dispatch_bias > 0.0 && max_share > 0.0)
            bias[j] = cfg.cal_dispatch_bias * forecast->share(grid.zone_of(pos[j])) / max_share;
        }
        Matrix raw(reqs.size(), avail.size()), cost(reqs.size(), avail.size());
        for (std::size_t i = 0; i < reqs.size(); ++i)
          for (std::size_t j = 0; j < avail.size(); ++j) {
            raw(i, j) = static_cast<double>(
                ceil_seconds(router.seconds(pos[j], demand[reqs[i]].pickup)));
            cost(i, j) = raw(i, j) + bias[j];
          }
        const auto a = greedy ? greedy_match(cost) : hungarian_match(cost);
        for (const auto& [i, j] : a.pairs) {
          const std::size_t r = reqs[i];
          auto& d = drivers[avail[j]];
          d.position = pos[j];
          const auto secs = static_cast<std::int64_t>(raw(i, j));
          start_leg(d, DriverStatus::to_pickup, demand[r].pickup, t, secs, step);
          d.request = static_cast<std::int64_t>(r);
          driver_of[r] = static_cast<std::int64_t>(avail[j]);
          planned_pickup[r] = t + secs;
          trip_s[r] = ceil_seconds(router.seconds(demand[r].pickup, demand[r].dropoff));
          out.outcomes[r].matched_s = t;
        }
      }
    }

    // (5) reposition
    if (repositions && k % cfg.lp.interval_steps == 0) {
      std::vector<LatLon> idle, incoming;
      for (const auto& d : drivers) {
        if (d.status == DriverStatus::idle) idle.push_back(d.position);
        if (d.status == DriverStatus::repositioning) incoming.push_back(d.destination);
      }
      if (idle.empty()) continue;
      auto all = zone_balances(idle, *forecast, static_cast<double>(t), cfg.lp.lookahead_min,
                               grid, incoming);
      std::vector<ZoneBalance> bal;
      for (const auto& b : all)
        if (b.surplus() > 0.0 || b.deficit() > 0.0) bal.push_back(b);
      std::vector<LatLon> cent;
      for (const auto& b : bal) cent.push_back(grid.centroid(b.zone));
      Matrix c(bal.size(), bal.size());
      for (std::size_t i = 0; i < bal.size(); ++i)
        for (std::size_t j = 0; j < bal.size(); ++j)
          c(i, j) = i == j ? 0.0 : router.seconds(cent[i], cent[j]);
      const int n_idle = static_cast<int>(idle.size());
      const auto plan = cfg.policy == Policy::cal_lp
                            ? solve_reposition_lp(bal, c, cfg.lp, n_idle)
                            : heuristic_reposition(bal, c, cfg.lp, n_idle);
      out.reposition_moves += plan.total_moves();
      out.clipped_moves += apply_plan(drivers, plan, grid, router, t, step);
    }
  }

  out.result = summarize(out.outcomes, cfg.horizon_s);
  return out;
}

std::string trace_jsonl(std::span<const RequestOutcome> outcomes) {
  std::string s;
  for (const auto& o : outcomes) {
    nlohmann::ordered_json j;
    j["request_id"] = o.request_id;
    j["created_s"] = o.created_s;
    if (auto w = o.wait_s())
      j["wait_s"] = *w;
    else
      j["wait_s"] = nullptr;
    j["status"] = to_string(o.status);
    j["pickup_zone"] = o.pickup_zone;
    s += j.dump();
    s += '\n';
  }
  return s;
}

}  // namespace rcd
