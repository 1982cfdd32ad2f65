#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rcd {

/// Library-wide error type. Every failure that crosses a module boundary
/// is reported through this (or a subclass) so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

struct BoundingBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  bool contains(const LatLon& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon &&
           p.lon <= max_lon;
  }
  LatLon center() const {
    return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Manhattan, roughly Battery Park to Inwood.
inline constexpr BoundingBox kManhattanBox{40.700, -74.020, 40.880, -73.910};

/// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;

}  // namespace rcd
