#include "rcd/metrics.hpp"

#include <algorithm>

#include "rcd/stats.hpp"

namespace rcd {

std::string to_string(RequestStatus s) {
  switch (s) {
    case RequestStatus::completed: return "completed";
    case RequestStatus::expired: return "expired";
    case RequestStatus::in_flight: return "in_flight";
  }
  return "in_flight";
}

SimResult summarize(std::span<const RequestOutcome> outcomes, std::int64_t horizon_s) {
  SimResult r;
  r.horizon_s = horizon_s;
  r.n_created = static_cast<std::int64_t>(outcomes.size());
  for (const auto& o : outcomes) {
    switch (o.status) {
      case RequestStatus::completed:
        ++r.n_completed;
        r.waits_s.push_back(static_cast<double>(*o.wait_s()));
        break;
      case RequestStatus::expired: ++r.n_expired; break;
      case RequestStatus::in_flight: ++r.n_in_flight; break;
    }
  }
  if (!r.waits_s.empty()) {
    std::vector<double> sorted = r.waits_s;
    std::sort(sorted.begin(), sorted.end());
    r.mean = mean_of(sorted);
    r.p50 = percentile_sorted(sorted, 0.50);
    r.p95 = percentile_sorted(sorted, 0.95);
    r.p99 = percentile_sorted(sorted, 0.99);
    r.gini = gini(sorted);
  }
  r.completion_rate =
      r.n_created ? static_cast<double>(r.n_completed) / static_cast<double>(r.n_created) : 0.0;
  r.throughput_per_h =
      horizon_s > 0 ? static_cast<double>(r.n_completed) / (horizon_s / 3600.0) : 0.0;
  return r;
}

}  // namespace rcd
