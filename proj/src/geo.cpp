#include "rcd/geo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

namespace rcd {
namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr std::int64_t kAxialBias = std::int64_t{1} << 29;
constexpr std::uint64_t kAxialMask = (std::uint64_t{1} << 30) - 1;

}  // namespace

// ------------------------------------------------------------------ HexGrid

double HexGrid::edge_length_m(int resolution) {
  // Res-0 average edge, shrinking by sqrt(7) per aperture-7 level.
  return 1107712.591 / std::pow(std::sqrt(7.0), resolution);
}

HexGrid::HexGrid(int resolution, LatLon origin)
    : resolution_(resolution),
      edge_m_(edge_length_m(resolution)),
      origin_(origin),
      cos_lat0_(std::cos(origin.lat * kDegToRad)) {
  if (resolution < 0 || resolution > 15) throw Error("hex resolution must be in [0, 15]");
}

ZoneId HexGrid::zone_of(const LatLon& p) const {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon))
    throw Error("zone_of: non-finite coordinate");
  if (p.lat < -90.0 || p.lat > 90.0) throw Error("zone_of: latitude out of range");
  const double x = kEarthRadiusM * (p.lon - origin_.lon) * kDegToRad * cos_lat0_;
  const double y = kEarthRadiusM * (p.lat - origin_.lat) * kDegToRad;
  const double qf = (std::sqrt(3.0) / 3.0 * x - y / 3.0) / edge_m_;
  const double rf = (2.0 / 3.0 * y) / edge_m_;
  // Cube rounding.
  const double sf = -qf - rf;
  double q = std::round(qf), r = std::round(rf), s = std::round(sf);
  const double dq = std::fabs(q - qf), dr = std::fabs(r - rf), ds = std::fabs(s - sf);
  if (dq > dr && dq > ds)
    q = -r - s;
  else if (dr > ds)
    r = -q - s;
  const auto qi = static_cast<std::int64_t>(q) + kAxialBias;
  const auto ri = static_cast<std::int64_t>(r) + kAxialBias;
  if (qi < 0 || ri < 0 || qi > static_cast<std::int64_t>(kAxialMask) ||
      ri > static_cast<std::int64_t>(kAxialMask))
    throw Error("zone_of: point too far from grid origin");
  return (static_cast<std::uint64_t>(resolution_) << 60) |
         (static_cast<std::uint64_t>(qi) << 30) | static_cast<std::uint64_t>(ri);
}

LatLon HexGrid::centroid(ZoneId z) const {
  const auto q = static_cast<std::int64_t>((z >> 30) & kAxialMask) - kAxialBias;
  const auto r = static_cast<std::int64_t>(z & kAxialMask) - kAxialBias;
  const double x = edge_m_ * std::sqrt(3.0) * (static_cast<double>(q) + r / 2.0);
  const double y = edge_m_ * 1.5 * static_cast<double>(r);
  return {origin_.lat + y / kEarthRadiusM / kDegToRad,
          origin_.lon + x / (kEarthRadiusM * cos_lat0_) / kDegToRad};
}

std::vector<ZoneId> HexGrid::cover(const BoundingBox& box) const {
  // Sample at a pitch well under the cell inradius.
  const double step_m = edge_m_ / 4.0;
  const double dlat = step_m / kEarthRadiusM / kDegToRad;
  const double dlon = step_m / (kEarthRadiusM * cos_lat0_) / kDegToRad;
  std::set<ZoneId> cells;
  for (double lat = box.min_lat; lat <= box.max_lat + 1e-12; lat += dlat)
    for (double lon = box.min_lon; lon <= box.max_lon + 1e-12; lon += dlon)
      cells.insert(zone_of({lat, lon}));
  return {cells.begin(), cells.end()};
}

ZoneId zone_of(const LatLon& p, int resolution) { return HexGrid(resolution).zone_of(p); }

// ------------------------------------------------------------------ routing

std::string to_string(RouterKind k) {
  switch (k) {
    case RouterKind::haversine: return "haversine";
    case RouterKind::scaled: return "scaled";
    case RouterKind::osrm: return "osrm";
  }
  return "haversine";
}

RouterKind router_kind_from_string(const std::string& s) {
  if (s == "haversine") return RouterKind::haversine;
  if (s == "scaled") return RouterKind::scaled;
  if (s == "osrm") return RouterKind::osrm;
  throw Error("unknown router kind '" + s + "'");
}

void RouterConfig::validate() const {
  if (!(speed_kmh > 0.0)) throw Error("router speed_kmh must be > 0");
  if (!(scale_factor >= 1.0)) throw Error("router scale_factor must be >= 1");
  if (kind == RouterKind::osrm && osrm_base_url.empty())
    throw Error("osrm router needs a base url");
  if (osrm_max_concurrency < 1) throw Error("osrm concurrency limit must be >= 1");
}

double haversine_m(const LatLon& a, const LatLon& b) {
  const double p1 = a.lat * kDegToRad, p2 = b.lat * kDegToRad;
  const double dp = p2 - p1;
  const double dl = (b.lon - a.lon) * kDegToRad;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

Router::Router(RouterConfig cfg)
    : cfg_(std::move(cfg)), fallbacks_(std::make_unique<std::atomic<std::size_t>>(0)) {
  cfg_.validate();
  if (cfg_.kind == RouterKind::osrm)
    osrm_ = std::make_unique<OsrmClient>(cfg_.osrm_base_url, cfg_.osrm_max_concurrency);
}

Router::~Router() = default;
Router::Router(Router&&) noexcept = default;
Router& Router::operator=(Router&&) noexcept = default;

double Router::surrogate_seconds(const LatLon& a, const LatLon& b, double factor) const {
  return haversine_m(a, b) * factor / (cfg_.speed_kmh / 3.6);
}

double Router::seconds(const LatLon& a, const LatLon& b) const {
  switch (cfg_.kind) {
    case RouterKind::haversine: return surrogate_seconds(a, b, 1.0);
    case RouterKind::scaled: return surrogate_seconds(a, b, cfg_.scale_factor);
    case RouterKind::osrm: break;
  }
  const LatLon src[] = {a};
  const LatLon dst[] = {b};
  return matrix(src, dst)(0, 0);
}

Matrix Router::matrix(std::span<const LatLon> sources,
                      std::span<const LatLon> destinations) const {
  if (cfg_.kind == RouterKind::osrm) {
    if (auto m = osrm_->table(sources, destinations)) return *m;
    if (!cfg_.osrm_fallback) throw Error("osrm table service unavailable and fallback disabled");
    if (fallbacks_->fetch_add(1) == 0)
      std::clog << "warning: osrm unavailable at " << cfg_.osrm_base_url
                << ", using scaled haversine surrogate\n";
  }
  const double factor = cfg_.kind == RouterKind::haversine ? 1.0 : cfg_.scale_factor;
  Matrix m(sources.size(), destinations.size());
  for (std::size_t i = 0; i < sources.size(); ++i)
    for (std::size_t j = 0; j < destinations.size(); ++j)
      m(i, j) = surrogate_seconds(sources[i], destinations[j], factor);
  return m;
}

double travel_time(const LatLon& a, const LatLon& b, const RouterConfig& cfg) {
  return Router(cfg).seconds(a, b);
}

namespace {

struct MatrixCacheKey {
  std::vector<ZoneId> zones;
  int resolution;
  double origin_lat, origin_lon;
  RouterKind kind;
  double speed, scale;
  std::string url;

  auto tie() const {
    return std::tie(zones, resolution, origin_lat, origin_lon, kind, speed, scale, url);
  }
  bool operator<(const MatrixCacheKey& o) const { return tie() < o.tie(); }
};

std::mutex g_matrix_cache_mu;
std::map<MatrixCacheKey, Matrix> g_matrix_cache;
constexpr std::size_t kMatrixCacheLimit = 512;

MatrixCacheKey cache_key(std::span<const ZoneId> zones, const HexGrid& grid,
                         const Router& router) {
  const auto& c = router.config();
  return {{zones.begin(), zones.end()}, grid.resolution(), grid.origin().lat,
          grid.origin().lon, c.kind, c.speed_kmh, c.scale_factor, c.osrm_base_url};
}

}  // namespace

Matrix zone_travel_matrix_serial(std::span<const ZoneId> zones, const HexGrid& grid,
                                 const Router& router) {
  if (zones.empty()) throw Error("zone_travel_matrix: no zones");
  std::vector<LatLon> pts;
  for (ZoneId z : zones) pts.push_back(grid.centroid(z));
  Matrix m(zones.size(), zones.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      m(i, j) = i == j ? 0.0 : router.seconds(pts[i], pts[j]);
  return m;
}

Matrix zone_travel_matrix(std::span<const ZoneId> zones, const HexGrid& grid,
                          const Router& router) {
  if (zones.empty()) throw Error("zone_travel_matrix: no zones");
  auto key = cache_key(zones, grid, router);
  {
    std::lock_guard lock(g_matrix_cache_mu);
    if (auto it = g_matrix_cache.find(key); it != g_matrix_cache.end()) return it->second;
  }
  std::vector<LatLon> pts;
  for (ZoneId z : zones) pts.push_back(grid.centroid(z));
  Matrix m;
  if (router.config().kind == RouterKind::osrm) {
    m = router.matrix(pts, pts);
  } else {
    m = Matrix(pts.size(), pts.size());
    const auto n = static_cast<std::ptrdiff_t>(pts.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      for (std::ptrdiff_t j = 0; j < n; ++j)
        m(i, j) = i == j ? 0.0 : router.seconds(pts[i], pts[j]);
  }
  for (std::size_t i = 0; i < m.rows; ++i) m(i, i) = 0.0;
  std::lock_guard lock(g_matrix_cache_mu);
  if (g_matrix_cache.size() >= kMatrixCacheLimit) g_matrix_cache.clear();
  g_matrix_cache.emplace(std::move(key), m);
  return m;
}

}  // namespace rcd
