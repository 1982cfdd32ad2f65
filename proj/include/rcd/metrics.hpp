#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rcd {

enum class RequestStatus { completed, expired, in_flight };

std::string to_string(RequestStatus s);

struct RequestOutcome {
  std::int64_t request_id = 0;
  std::int64_t created_s = 0;
  std::optional<std::int64_t> matched_s;
  std::optional<std::int64_t> pickup_s;
  std::optional<std::int64_t> dropoff_s;
  RequestStatus status = RequestStatus::in_flight;
  std::uint64_t pickup_zone = 0;

  std::optional<std::int64_t> wait_s() const {
    if (!pickup_s) return std::nullopt;
    return *pickup_s - created_s;
  }
};

struct SimResult {
  std::vector<double> waits_s;  // completed requests, in request order
  std::int64_t n_created = 0;
  std::int64_t n_completed = 0;
  std::int64_t n_expired = 0;
  std::int64_t n_in_flight = 0;
  std::int64_t horizon_s = 0;

  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double completion_rate = 0.0;
  double gini = 0.0;
  double throughput_per_h = 0.0;
};

SimResult summarize(std::span<const RequestOutcome> outcomes, std::int64_t horizon_s);

}  // namespace rcd
