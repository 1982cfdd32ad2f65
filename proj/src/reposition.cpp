#include "rcd/reposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace rcd {

void LpConfig::validate() const {
  if (!(move_fraction > 0.0 && move_fraction <= 1.0))
    throw Error("move_fraction must be in (0, 1]");
  if (!(lookahead_min > 0.0)) throw Error("lookahead must be > 0");
  if (interval_steps < 1) throw Error("reposition interval must be >= 1 step");
}

int RepositionPlan::total_moves() const {
  int n = 0;
  for (const auto& m : moves) n += m.count;
  return n;
}

int move_budget(const LpConfig& cfg, int n_idle) {
  return static_cast<int>(std::floor(cfg.move_fraction * n_idle + 1e-9));
}

// --------------------------------------------------------------- forecasts

SpatialForecast::SpatialForecast(const CalibratedPrior& prior, const HexGrid& grid)
    : rate_profile_(prior.rate_profile), bin_seconds_(prior.bin_seconds) {
  for (std::size_t i = 0; i < prior.od_pool.size(); ++i)
    shares_[grid.zone_of(prior.od_pool[i].pickup)] += prior.pair_probability(i);
}

double SpatialForecast::share(ZoneId z) const {
  auto it = shares_.find(z);
  return it == shares_.end() ? 0.0 : it->second;
}

double SpatialForecast::expected_requests(double now_s, double lookahead_s) const {
  const double bs = bin_seconds_;
  const double end = now_s + lookahead_s;
  double total = 0.0;
  const auto first = static_cast<std::ptrdiff_t>(std::floor(std::max(now_s, 0.0) / bs));
  for (auto b = first; b < std::ssize(rate_profile_); ++b) {
    const double lo = std::max(now_s, b * bs);
    const double hi = std::min(end, (b + 1) * bs);
    if (hi <= lo) break;
    total += rate_profile_[b] * (hi - lo) / bs;
  }
  return total;
}

std::vector<ZoneBalance> zone_balances(std::span<const LatLon> idle_drivers,
                                       const SpatialForecast& forecast, double now_s,
                                       double lookahead_min, const HexGrid& grid,
                                       std::span<const LatLon> incoming) {
  const double expected = forecast.expected_requests(now_s, lookahead_min * 60.0);
  std::map<ZoneId, ZoneBalance> by_zone;
  for (const auto& [zone, share] : forecast.shares())
    by_zone[zone] = {zone, 0, expected * share};
  for (const auto& p : idle_drivers) {
    const ZoneId z = grid.zone_of(p);
    auto& b = by_zone[z];
    b.zone = z;
    ++b.idle;
  }
  for (const auto& p : incoming) {
    const ZoneId z = grid.zone_of(p);
    auto& b = by_zone[z];
    b.zone = z;
    ++b.incoming;
  }
  std::vector<ZoneBalance> out;
  out.reserve(by_zone.size());
  for (auto& [z, b] : by_zone) out.push_back(b);
  return out;
}

std::vector<ZoneBalance> zone_balances(std::span<const LatLon> idle_drivers,
                                       const CalibratedPrior& prior, double now_s,
                                       double lookahead_min, const HexGrid& grid,
                                       std::span<const LatLon> incoming) {
  return zone_balances(idle_drivers, SpatialForecast(prior, grid), now_s, lookahead_min,
                       grid, incoming);
}

// ---------------------------------------------------------- min-cost flow

namespace {

constexpr double kFlowEps = 1e-12;

struct FlowEdge {
  int to;
  double cap;
  double cost;
  int rev;
  double original_cap;  // < 0 for residual twins
};

class FlowGraph {
 public:
  explicit FlowGraph(int n) : adj_(n) {}

  std::pair<int, int> add_edge(int u, int v, double cap, double cost) {
    adj_[u].push_back({v, cap, cost, static_cast<int>(adj_[v].size()), cap});
    adj_[v].push_back({u, 0.0, -cost, static_cast<int>(adj_[u].size()) - 1, -1.0});
    return {u, static_cast<int>(adj_[u].size()) - 1};
  }

  const FlowEdge& edge(std::pair<int, int> e) const { return adj_[e.first][e.second]; }
  double flow(std::pair<int, int> e) const {
    const auto& fe = edge(e);
    return fe.original_cap - fe.cap;
  }

  // Successive shortest paths until no negative-cost source->sink path.
  void min_cost_flow(int src, int sink) {
    const int n = static_cast<int>(adj_.size());
    for (int iter = 0;; ++iter) {
      if (iter > 100000) throw Error("min-cost flow did not converge");
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<std::pair<int, int>> parent(n, {-1, -1});
      dist[src] = 0.0;
      for (int round = 0; round < n; ++round) {
        bool changed = false;
        for (int u = 0; u < n; ++u) {
          if (!std::isfinite(dist[u])) continue;
          for (int k = 0; k < std::ssize(adj_[u]); ++k) {
            const auto& e = adj_[u][k];
            if (e.cap > kFlowEps && dist[u] + e.cost < dist[e.to] - kFlowEps) {
              dist[e.to] = dist[u] + e.cost;
              parent[e.to] = {u, k};
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (!std::isfinite(dist[sink]) || dist[sink] >= -kFlowEps) return;
      double push = std::numeric_limits<double>::infinity();
      for (int v = sink; v != src; v = parent[v].first)
        push = std::min(push, adj_[parent[v].first][parent[v].second].cap);
      if (push <= kFlowEps) return;
      for (int v = sink; v != src; v = parent[v].first) {
        auto& e = adj_[parent[v].first][parent[v].second];
        e.cap -= push;
        adj_[v][e.rev].cap += push;
      }
    }
  }

  // Weak-duality lower bound: potentials are shortest distances in the
  // residual graph closed by a free sink->src return arc. The return arc
  // carries the flow value, so its reverse is residual whenever that is > 0.
  double dual_bound(int src, int sink) const {
    const int n = static_cast<int>(adj_.size());
    double value = 0.0;
    for (const auto& e : adj_[src])
      if (e.original_cap >= 0.0) value += e.original_cap - e.cap;
    std::vector<double> pi(n, 0.0);
    bool converged = false;
    for (int round = 0; round <= n && !converged; ++round) {
      converged = true;
      auto relax = [&](int u, int v, double cost) {
        if (pi[u] + cost < pi[v] - 1e-10) {
          pi[v] = pi[u] + cost;
          converged = false;
        }
      };
      for (int u = 0; u < n; ++u)
        for (const auto& e : adj_[u])
          if (e.cap > kFlowEps) relax(u, e.to, e.cost);
      relax(sink, src, 0.0);
      if (value > kFlowEps) relax(src, sink, 0.0);
    }
    if (!converged) throw Error("min-cost flow residual has a negative cycle");
    double bound = 0.0;
    for (int u = 0; u < n; ++u)
      for (const auto& e : adj_[u]) {
        if (e.original_cap < 0.0) continue;
        const double rc = e.cost + pi[u] - pi[e.to];
        if (rc < 0.0) bound += e.original_cap * rc;
      }
    return bound;
  }

 private:
  std::vector<std::vector<FlowEdge>> adj_;
};

std::string lp_text(std::span<const double> surplus, std::span<const double> deficit,
                    const Matrix& cost, double alpha, double budget) {
  std::ostringstream os;
  write_lp(os, surplus, deficit, cost, alpha, budget);
  return os.str();
}

}  // namespace

TransportSolution solve_transport_lp(std::span<const double> surplus,
                                     std::span<const double> deficit, const Matrix& cost,
                                     double alpha, double budget) {
  const int S = static_cast<int>(surplus.size());
  const int D = static_cast<int>(deficit.size());
  if (cost.rows != surplus.size() || cost.cols != deficit.size())
    throw Error("transport LP: cost matrix shape mismatch");
  TransportSolution sol;
  sol.x = Matrix(S, D);
  sol.y.assign(D, 0.0);
  if (S == 0 || D == 0 || budget <= 0.0) return sol;

  const int src = 0, hub = 1, sink = 2 + S + D;
  FlowGraph g(sink + 1);
  g.add_edge(src, hub, budget, 0.0);
  for (int s = 0; s < S; ++s) g.add_edge(hub, 2 + s, std::max(0.0, surplus[s]), 0.0);
  std::vector<std::pair<int, int>> xe(static_cast<std::size_t>(S) * D);
  for (int s = 0; s < S; ++s)
    for (int d = 0; d < D; ++d)
      xe[s * D + d] = g.add_edge(2 + s, 2 + S + d,
                                 std::min(std::max(0.0, surplus[s]), budget),
                                 alpha * cost(s, d));
  std::vector<std::pair<int, int>> ye(D);
  for (int d = 0; d < D; ++d)
    ye[d] = g.add_edge(2 + S + d, sink, std::max(0.0, deficit[d]), -1.0);

  try {
    g.min_cost_flow(src, sink);
    sol.dual_bound = g.dual_bound(src, sink);
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + "\n" + lp_text(surplus, deficit, cost, alpha, budget));
  }
  for (int s = 0; s < S; ++s)
    for (int d = 0; d < D; ++d) {
      const double f = g.flow(xe[s * D + d]);
      sol.x(s, d) = f;
      sol.objective += alpha * cost(s, d) * f;
    }
  for (int d = 0; d < D; ++d) {
    sol.y[d] = g.flow(ye[d]);
    sol.objective -= sol.y[d];
  }
  return sol;
}

namespace {

struct Split {
  std::vector<std::size_t> src, dst;  // indices into balances
  std::vector<double> surplus, deficit;
  Matrix cost;
  double alpha = 0.0;
};

Split split_balances(std::span<const ZoneBalance> balances, const Matrix& c) {
  if (c.rows != balances.size() || c.cols != balances.size())
    throw Error("reposition: cost matrix must be |zones| x |zones|");
  Split sp;
  for (std::size_t i = 0; i < balances.size(); ++i) {
    if (balances[i].surplus() > 0.0) {
      sp.src.push_back(i);
      sp.surplus.push_back(balances[i].surplus());
    } else if (balances[i].deficit() > 0.0) {
      sp.dst.push_back(i);
      sp.deficit.push_back(balances[i].deficit());
    }
  }
  sp.cost = Matrix(sp.src.size(), sp.dst.size());
  double max_c = 0.0;
  for (std::size_t s = 0; s < sp.src.size(); ++s)
    for (std::size_t d = 0; d < sp.dst.size(); ++d) {
      const double v = c(sp.src[s], sp.dst[d]);
      if (!std::isfinite(v) || v < 0.0)
        throw Error("reposition: costs must be finite and non-negative");
      sp.cost(s, d) = v;
      max_c = std::max(max_c, v);
    }
  sp.alpha = max_c > 0.0 ? 1.0 / (2.0 * max_c) : 0.0;
  return sp;
}

double served_from_moves(const Split& sp, const std::vector<std::vector<int>>& xi) {
  double served = 0.0;
  for (std::size_t d = 0; d < sp.dst.size(); ++d) {
    double in = 0.0;
    for (std::size_t s = 0; s < sp.src.size(); ++s) in += xi[s][d];
    served += std::min(sp.deficit[d], in);
  }
  return served;
}

}  // namespace

RepositionPlan solve_reposition_lp(std::span<const ZoneBalance> balances, const Matrix& c,
                                   const LpConfig& cfg, int n_idle, std::ostream* lp_dump) {
  cfg.validate();
  const Split sp = split_balances(balances, c);
  const int budget = move_budget(cfg, n_idle);
  if (lp_dump) write_lp(*lp_dump, sp.surplus, sp.deficit, sp.cost, sp.alpha, budget);

  RepositionPlan plan;
  if (sp.src.empty() || sp.dst.empty() || budget <= 0) return plan;
  const auto sol = solve_transport_lp(sp.surplus, sp.deficit, sp.cost, sp.alpha, budget);
  plan.objective_value = sol.objective;
  plan.optimality_gap = sol.gap();
  if (plan.optimality_gap > 1e-8)
    throw Error("reposition LP optimality gap above 1e-8\n" +
                lp_text(sp.surplus, sp.deficit, sp.cost, sp.alpha, budget));

  // Largest-remainder rounding of x under integer supply and budget caps.
  const std::size_t S = sp.src.size(), D = sp.dst.size();
  std::vector<std::vector<int>> xi(S, std::vector<int>(D, 0));
  std::vector<int> row_cap(S), row_used(S, 0);
  for (std::size_t s = 0; s < S; ++s)
    row_cap[s] = static_cast<int>(std::floor(sp.surplus[s] + 1e-9));
  struct Frac {
    double rem;
    std::size_t s, d;
  };
  std::vector<Frac> fracs;
  double continuous_total = 0.0;
  int used = 0;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t d = 0; d < D; ++d) {
      const double x = sol.x(s, d);
      continuous_total += x;
      int fl = static_cast<int>(std::floor(x + 1e-9));
      fl = std::min(fl, row_cap[s] - row_used[s]);
      fl = std::min(fl, budget - used);
      fl = std::max(fl, 0);
      xi[s][d] = fl;
      row_used[s] += fl;
      used += fl;
      const double rem = x - fl;
      if (rem > 1e-9) fracs.push_back({rem, s, d});
    }
  const int target =
      std::min(budget, static_cast<int>(std::lround(continuous_total)));
  std::stable_sort(fracs.begin(), fracs.end(),
                   [](const Frac& a, const Frac& b) { return a.rem > b.rem; });
  for (const auto& f : fracs) {
    if (used >= target) break;
    if (row_used[f.s] + 1 > row_cap[f.s]) continue;
    ++xi[f.s][f.d];
    ++row_used[f.s];
    ++used;
  }

  for (std::size_t s = 0; s < S; ++s) {
    if (row_used[s] > row_cap[s]) throw Error("reposition rounding broke a supply cap");
    for (std::size_t d = 0; d < D; ++d)
      if (xi[s][d] > 0)
        plan.moves.push_back({balances[sp.src[s]].zone, balances[sp.dst[d]].zone, xi[s][d]});
  }
  if (used > budget) throw Error("reposition rounding broke the move budget");
  plan.served_estimate = served_from_moves(sp, xi);
  return plan;
}

RepositionPlan heuristic_reposition(std::span<const ZoneBalance> balances, const Matrix& c,
                                    const LpConfig& cfg, int n_idle) {
  cfg.validate();
  const Split sp = split_balances(balances, c);
  const int budget = move_budget(cfg, n_idle);
  RepositionPlan plan;
  std::vector<double> surplus = sp.surplus, deficit = sp.deficit;
  std::vector<std::vector<int>> xi(sp.src.size(), std::vector<int>(sp.dst.size(), 0));
  for (int moved = 0; moved < budget; ++moved) {
    // Balances are sorted by zone id, so strict comparisons keep the lower id.
    std::ptrdiff_t s_best = -1;
    for (std::size_t s = 0; s < surplus.size(); ++s)
      if (surplus[s] >= 1.0 - 1e-9 && (s_best < 0 || surplus[s] > surplus[s_best]))
        s_best = static_cast<std::ptrdiff_t>(s);
    if (s_best < 0) break;
    std::ptrdiff_t d_best = -1;
    for (std::size_t d = 0; d < deficit.size(); ++d)
      if (deficit[d] > 0.0 && (d_best < 0 || sp.cost(s_best, d) < sp.cost(s_best, d_best)))
        d_best = static_cast<std::ptrdiff_t>(d);
    if (d_best < 0) break;
    ++xi[s_best][d_best];
    surplus[s_best] -= 1.0;
    deficit[d_best] -= 1.0;
    plan.objective_value += sp.alpha * sp.cost(s_best, d_best);
  }
  for (std::size_t s = 0; s < sp.src.size(); ++s)
    for (std::size_t d = 0; d < sp.dst.size(); ++d)
      if (xi[s][d] > 0)
        plan.moves.push_back({balances[sp.src[s]].zone, balances[sp.dst[d]].zone, xi[s][d]});
  plan.served_estimate = served_from_moves(sp, xi);
  plan.objective_value -= plan.served_estimate;
  return plan;
}

// ------------------------------------------------------------ bound check

std::vector<double> post_move_supply(const RepositionPlan& plan,
                                     std::span<const ZoneBalance> balances) {
  std::map<ZoneId, std::size_t> index;
  std::vector<double> supply(balances.size());
  for (std::size_t i = 0; i < balances.size(); ++i) {
    index[balances[i].zone] = i;
    supply[i] = balances[i].supply();
  }
  for (const auto& m : plan.moves) {
    auto from = index.find(m.from), to = index.find(m.to);
    if (from == index.end() || to == index.end())
      throw Error("plan references a zone outside the balance set");
    supply[from->second] -= m.count;
    supply[to->second] += m.count;
  }
  return supply;
}

double unserved(std::span<const double> supply, std::span<const double> demand) {
  double u = 0.0;
  for (std::size_t j = 0; j < supply.size(); ++j) u += std::max(0.0, demand[j] - supply[j]);
  return u;
}

BoundCheck unserved_bound_check(const RepositionPlan& plan,
                                std::span<const ZoneBalance> balances_est,
                                std::span<const ZoneBalance> balances_true) {
  if (balances_est.size() != balances_true.size())
    throw Error("bound check: zone sets differ");
  std::vector<double> d_est, d_true;
  for (std::size_t j = 0; j < balances_est.size(); ++j) {
    if (balances_est[j].zone != balances_true[j].zone)
      throw Error("bound check: zone sets differ");
    d_est.push_back(balances_est[j].forecast);
    d_true.push_back(balances_true[j].forecast);
  }
  const auto supply = post_move_supply(plan, balances_est);
  BoundCheck b;
  b.unserved_est = unserved(supply, d_est);
  for (std::size_t j = 0; j < d_est.size(); ++j) b.l1_gap += std::fabs(d_est[j] - d_true[j]);
  b.lhs = unserved(supply, d_true);
  b.rhs = b.unserved_est + b.l1_gap;
  return b;
}

void write_lp(std::ostream& out, std::span<const double> surplus,
              std::span<const double> deficit, const Matrix& cost, double alpha,
              double budget) {
  const std::size_t S = surplus.size(), D = deficit.size();
  auto x = [](std::size_t s, std::size_t d) {
    return "x_" + std::to_string(s) + "_" + std::to_string(d);
  };
  out.precision(17);
  out << "\\ surplus/deficit repositioning LP\nMinimize\n obj:";
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t d = 0; d < D; ++d) out << " + " << alpha * cost(s, d) << ' ' << x(s, d);
  for (std::size_t d = 0; d < D; ++d) out << " - y_" << d;
  out << "\nSubject To\n";
  for (std::size_t s = 0; s < S; ++s) {
    out << " supply_" << s << ':';
    for (std::size_t d = 0; d < D; ++d) out << " + " << x(s, d);
    out << " <= " << surplus[s] << '\n';
  }
  for (std::size_t d = 0; d < D; ++d) out << " demand_" << d << ": y_" << d << " <= " << deficit[d] << '\n';
  for (std::size_t d = 0; d < D; ++d) {
    out << " link_" << d << ": y_" << d;
    for (std::size_t s = 0; s < S; ++s) out << " - " << x(s, d);
    out << " <= 0\n";
  }
  out << " budget:";
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t d = 0; d < D; ++d) out << " + " << x(s, d);
  out << " <= " << budget << "\nEnd\n";
}

}  // namespace rcd
