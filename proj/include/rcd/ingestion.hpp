#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rcd/common.hpp"
#include "rcd/time.hpp"

namespace rcd {

struct TripRecord {
  Timestamp pickup_time = 0;
  Timestamp dropoff_time = 0;
  LatLon pickup;
  LatLon dropoff;

  friend bool operator==(const TripRecord&, const TripRecord&) = default;
};

/// Seven-dimensional shape descriptor of a binned demand series.
struct SummaryFeatures {
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  double skewness = 0.0;
  std::array<double, 3> autocorr{};  // lags 1..3

  static constexpr std::size_t kDims = 7;
  std::array<double, kDims> as_vector() const {
    return {mean, std, max, skewness, autocorr[0], autocorr[1], autocorr[2]};
  }

  friend bool operator==(const SummaryFeatures&,
                         const SummaryFeatures&) = default;
};

struct SurgeEvent {
  int start_bin = 0;
  int end_bin = 0;  // exclusive
  double peak_intensity = 0.0;
  int duration_bins = 0;
  std::vector<double> pre_surge_features;  // {mean, slope} of 6 prior bins

  friend bool operator==(const SurgeEvent&, const SurgeEvent&) = default;
};

/// One historical trip inside a block. `offset_s` is the pickup time
/// relative to the block start; replay uses it to rebuild the request
/// stream.
struct OdPair {
  LatLon pickup;
  LatLon dropoff;
  std::int32_t offset_s = 0;

  friend bool operator==(const OdPair&, const OdPair&) = default;
};

enum class DayType { weekday, weekend, holiday };

std::string to_string(DayType d);
DayType day_type_from_string(const std::string& s);

struct BlockMetadata {
  int month = 1;       // 1..12
  DayType day_type = DayType::weekday;
  int hour_block = 0;  // 0..5 for 4-hour blocks

  friend bool operator==(const BlockMetadata&, const BlockMetadata&) = default;
};

struct RegimeBlock {
  std::string block_id;  // e.g. "2024-01-15_08-12"
  std::vector<double> demand_series;
  SummaryFeatures features;
  std::vector<OdPair> od_pool;
  std::vector<SurgeEvent> events;
  BlockMetadata metadata;

  friend bool operator==(const RegimeBlock&, const RegimeBlock&) = default;
};

struct IngestConfig {
  int bin_minutes = 5;
  int block_hours = 4;
  BoundingBox bbox = kManhattanBox;
  double mad_threshold = 3.0;
  int mad_window = 12;
  std::vector<std::string> holidays;  // "YYYY-MM-DD"

  int bins_per_block() const { return block_hours * 60 / bin_minutes; }

  friend bool operator==(const IngestConfig&, const IngestConfig&) = default;
};

struct RegimeLibrary {
  std::vector<RegimeBlock> records;  // sorted by block_id
  IngestConfig build_config;

  const RegimeBlock* find(const std::string& block_id) const;

  friend bool operator==(const RegimeLibrary&, const RegimeLibrary&) = default;
};

// ---------------------------------------------------------------- parsing

enum class TripFormat { csv, columnar };

struct IngestSummary {
  std::size_t rows_read = 0;
  std::size_t accepted = 0;
  std::size_t malformed = 0;
  std::size_t out_of_bbox = 0;
  std::size_t bad_time_order = 0;

  std::size_t skipped() const { return malformed + out_of_bbox + bad_time_order; }
};

/// Reads trip records from `in`. Rows outside `bbox` or with
/// dropoff < pickup are dropped; malformed rows are counted and skipped.
/// Throws rcd::Error when the header (CSV) or magic (columnar) is unusable.
std::vector<TripRecord> parse_trips(std::istream& in, TripFormat format,
                                    const BoundingBox& bbox,
                                    IngestSummary* summary = nullptr);

/// Columnar binary container ("RCDCOL1"): magic, little-endian u64 row
/// count, then six contiguous columns (two i64 time columns, four f64
/// coordinate columns).
void write_columnar(std::ostream& out, std::span<const TripRecord> trips);

/// Zone-ID-only feeds (`pickup_datetime,dropoff_datetime,pickup_zone,
/// dropoff_zone`) are converted to coordinates through a centroid table.
using ZoneCentroids = std::map<std::int64_t, LatLon>;
ZoneCentroids parse_zone_centroids(std::istream& in);
std::vector<TripRecord> parse_zone_trips(std::istream& in,
                                         const ZoneCentroids& centroids,
                                         const BoundingBox& bbox,
                                         IngestSummary* summary = nullptr);

// ------------------------------------------------------------ regime build

SummaryFeatures compute_features(std::span<const double> series);

std::vector<SurgeEvent> detect_events(std::span<const double> series,
                                      double threshold = 3.0, int window = 12);

/// Robust z-scores over a trailing window that includes the current bin.
std::vector<double> robust_zscores(std::span<const double> series, int window);

inline constexpr double kMadEpsilon = 1e-9;
inline constexpr int kPreSurgeBins = 6;

/// Builds a block from already-binned content (used by ingestion and by
/// the synthetic generator so both share the feature/event pipeline).
RegimeBlock make_block(std::string block_id, std::vector<double> series,
                       std::vector<OdPair> od_pool, BlockMetadata metadata,
                       const IngestConfig& config);

RegimeLibrary segment_blocks(std::span<const TripRecord> trips,
                             const IngestConfig& config = {});

std::string block_id_for(const CivilDate& date, int start_hour, int end_hour);

// --------------------------------------------------------------- library io

inline constexpr const char* kLibraryMagic = "RCDLIB1";
inline constexpr int kLibraryVersion = 1;

void save_library(const RegimeLibrary& lib, const std::filesystem::path& path);
RegimeLibrary load_library(const std::filesystem::path& path);

}  // namespace rcd
