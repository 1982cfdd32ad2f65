#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcd/common.hpp"
#include "rcd/matrix.hpp"

namespace rcd {

// ------------------------------------------------------------------ zoning

/// Opaque hex cell id: resolution in the top 4 bits, then biased axial
/// coordinates (q, r) in two 30-bit fields.
using ZoneId = std::uint64_t;

inline constexpr const char* kZoningBackend = "axial-hex-fallback";

/// Pointy-top axial hex grid on a local equirectangular projection. Cell
/// edge length follows the H3 average for the resolution (res 8 ~ 461 m).
class HexGrid {
 public:
  explicit HexGrid(int resolution = 8, LatLon origin = kManhattanBox.center());

  /// Throws rcd::Error for non-finite coordinates or |lat| > 90.
  ZoneId zone_of(const LatLon& p) const;
  LatLon centroid(ZoneId z) const;
  bool contains(ZoneId z, const LatLon& p) const { return zone_of(p) == z; }

  int resolution() const { return resolution_; }
  double edge_m() const { return edge_m_; }
  const LatLon& origin() const { return origin_; }

  /// Every cell whose centroid or any sampled point lies in `box`.
  std::vector<ZoneId> cover(const BoundingBox& box) const;

  static double edge_length_m(int resolution);

 private:
  int resolution_;
  double edge_m_;
  LatLon origin_;
  double cos_lat0_;
};

ZoneId zone_of(const LatLon& p, int resolution = 8);

// ----------------------------------------------------------------- routing

enum class RouterKind { haversine, scaled, osrm };

std::string to_string(RouterKind k);
RouterKind router_kind_from_string(const std::string& s);

struct RouterConfig {
  RouterKind kind = RouterKind::haversine;
  double speed_kmh = 30.0;
  double scale_factor = 1.45;
  std::string osrm_base_url;
  bool osrm_fallback = true;
  int osrm_max_concurrency = 4;

  void validate() const;

  friend bool operator==(const RouterConfig&, const RouterConfig&) = default;
};

inline constexpr double kEarthRadiusM = 6371008.8;

double haversine_m(const LatLon& a, const LatLon& b);

class OsrmClient;

/// Travel-time oracle. Haversine and scaled kinds are pure; the OSRM kind
/// queries the table service and falls back to the scaled surrogate when
/// the service is unavailable (unless fallback is disabled).
class Router {
 public:
  explicit Router(RouterConfig cfg = {});
  ~Router();
  Router(Router&&) noexcept;
  Router& operator=(Router&&) noexcept;

  const RouterConfig& config() const { return cfg_; }

  double seconds(const LatLon& a, const LatLon& b) const;
  /// rows = sources, cols = destinations.
  Matrix matrix(std::span<const LatLon> sources,
                std::span<const LatLon> destinations) const;

  std::size_t fallback_count() const { return fallbacks_->load(); }

 private:
  double surrogate_seconds(const LatLon& a, const LatLon& b, double factor) const;

  RouterConfig cfg_;
  std::unique_ptr<OsrmClient> osrm_;
  std::unique_ptr<std::atomic<std::size_t>> fallbacks_;
};

double travel_time(const LatLon& a, const LatLon& b, const RouterConfig& cfg);

/// c[s][d] between zone centroids; zero diagonal. Haversine/scaled entries
/// are computed with an OpenMP loop; results are cached per (zones, cfg).
Matrix zone_travel_matrix(std::span<const ZoneId> zones, const HexGrid& grid,
                          const Router& router);
Matrix zone_travel_matrix_serial(std::span<const ZoneId> zones, const HexGrid& grid,
                                 const Router& router);

// -------------------------------------------------------------------- osrm

/// Minimal client for `GET {base}/table/v1/driving/{lon,lat;...}`.
/// Responses are cached on a 4-decimal coordinate grid; concurrent
/// requests are bounded by `max_concurrency`.
class OsrmClient {
 public:
  OsrmClient(std::string base_url, int max_concurrency = 4);
  ~OsrmClient();

  /// nullopt on transport failure, non-200 status, or an unparseable body.
  std::optional<Matrix> table(std::span<const LatLon> sources,
                              std::span<const LatLon> destinations);

  std::size_t requests_sent() const { return requests_.load(); }

  static std::string table_path(std::span<const LatLon> sources,
                                std::span<const LatLon> destinations);
  /// Parses the `durations` matrix of a table response body.
  static std::optional<Matrix> parse_table(const std::string& body,
                                           std::size_t rows, std::size_t cols);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace rcd
