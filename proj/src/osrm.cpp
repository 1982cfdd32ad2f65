#include <cmath>
#include <cstdio>
#include <semaphore>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "rcd/geo.hpp"

namespace rcd {
namespace {

// Coordinates snapped to 1e-4 degrees (~11 m) form the cache grid.
std::int64_t snap(double deg) { return std::llround(deg * 1e4); }

struct PairKey {
  std::int64_t a_lat, a_lon, b_lat, b_lon;
  bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const {
    std::size_t h = 1469598103934665603ULL;
    for (std::int64_t v : {k.a_lat, k.a_lon, k.b_lat, k.b_lon}) {
      h ^= static_cast<std::size_t>(v);
      h *= 1099511628211ULL;
    }
    return h;
  }
};

PairKey key_of(const LatLon& a, const LatLon& b) {
  return {snap(a.lat), snap(a.lon), snap(b.lat), snap(b.lon)};
}

}  // namespace

struct OsrmClient::Impl {
  std::string scheme_host;
  std::string prefix;
  std::counting_semaphore<1024> slots;
  std::mutex cache_mu;
  std::unordered_map<PairKey, double, PairKeyHash> cache;

  Impl(const std::string& url, int limit)
      : slots(std::clamp(limit, 1, 1024)) {
    const auto scheme = url.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', host_start);
    scheme_host = slash == std::string::npos ? url : url.substr(0, slash);
    prefix = slash == std::string::npos ? "" : url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  }
};

OsrmClient::OsrmClient(std::string base_url, int max_concurrency)
    : impl_(std::make_unique<Impl>(base_url, max_concurrency)) {}

OsrmClient::~OsrmClient() = default;

std::string OsrmClient::table_path(std::span<const LatLon> sources,
                                   std::span<const LatLon> destinations) {
  std::string path = "/table/v1/driving/";
  char buf[64];
  bool first = true;
  for (auto group : {sources, destinations}) {
    for (const auto& p : group) {
      std::snprintf(buf, sizeof buf, "%s%.6f,%.6f", first ? "" : ";", p.lon, p.lat);
      path += buf;
      first = false;
    }
  }
  path += "?annotations=duration&sources=";
  for (std::size_t i = 0; i < sources.size(); ++i)
    path += (i ? ";" : "") + std::to_string(i);
  path += "&destinations=";
  for (std::size_t j = 0; j < destinations.size(); ++j)
    path += (j ? ";" : "") + std::to_string(sources.size() + j);
  return path;
}

std::optional<Matrix> OsrmClient::parse_table(const std::string& body, std::size_t rows,
                                              std::size_t cols) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  if (doc.contains("code") && doc["code"] != "Ok") return std::nullopt;
  if (!doc.contains("durations") || !doc["durations"].is_array()) return std::nullopt;
  const auto& d = doc["durations"];
  if (d.size() != rows) return std::nullopt;
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!d[i].is_array() || d[i].size() != cols) return std::nullopt;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!d[i][j].is_number()) return std::nullopt;
      m(i, j) = std::max(0.0, d[i][j].get<double>());
    }
  }
  return m;
}

std::optional<Matrix> OsrmClient::table(std::span<const LatLon> sources,
                                        std::span<const LatLon> destinations) {
  Matrix out(sources.size(), destinations.size());
  if (sources.empty() || destinations.empty()) return out;
  {
    std::lock_guard lock(impl_->cache_mu);
    bool complete = true;
    for (std::size_t i = 0; i < sources.size() && complete; ++i)
      for (std::size_t j = 0; j < destinations.size(); ++j) {
        auto it = impl_->cache.find(key_of(sources[i], destinations[j]));
        if (it == impl_->cache.end()) {
          complete = false;
          break;
        }
        out(i, j) = it->second;
      }
    if (complete) return out;
  }

  std::optional<Matrix> parsed;
  {
    impl_->slots.acquire();
    ++requests_;
    httplib::Client cli(impl_->scheme_host);
    cli.set_connection_timeout(2);
    cli.set_read_timeout(10);
    auto res = cli.Get(impl_->prefix + table_path(sources, destinations));
    impl_->slots.release();
    if (!res || res->status != 200) return std::nullopt;
    parsed = parse_table(res->body, sources.size(), destinations.size());
  }
  if (!parsed) return std::nullopt;
  std::lock_guard lock(impl_->cache_mu);
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = 0; j < destinations.size(); ++j)
      impl_->cache[key_of(sources[i], destinations[j])] = (*parsed)(i, j);
  return parsed;
}

}  // namespace rcd
