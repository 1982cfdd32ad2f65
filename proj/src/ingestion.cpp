#include "rcd/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string_view>

namespace rcd {
namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos
                                                ? std::string_view::npos
                                                : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t'))
      f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
      f.remove_suffix(1);
    if (f.size() >= 2 && f.front() == '"' && f.back() == '"')
      f = f.substr(1, f.size() - 2);
    fields.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

// Maps required column names to their positions in the header.
std::vector<std::size_t> header_columns(std::string_view header,
                                        std::span<const char* const> required) {
  const auto fields = split_csv(header);
  std::vector<std::size_t> idx;
  for (const char* name : required) {
    auto it = std::find(fields.begin(), fields.end(), std::string_view(name));
    if (it == fields.end())
      throw Error(std::string("trip header is missing column '") + name + "'");
    idx.push_back(static_cast<std::size_t>(it - fields.begin()));
  }
  return idx;
}

// Shared acceptance rules for a fully parsed row.
bool accept_trip(const TripRecord& t, const BoundingBox& bbox,
                 IngestSummary& s) {
  if (t.dropoff_time < t.pickup_time) {
    ++s.bad_time_order;
    return false;
  }
  if (!bbox.contains(t.pickup) || !bbox.contains(t.dropoff)) {
    ++s.out_of_bbox;
    return false;
  }
  ++s.accepted;
  return true;
}

std::vector<TripRecord> parse_csv(std::istream& in, const BoundingBox& bbox,
                                  IngestSummary& s) {
  std::vector<TripRecord> out;
  std::string line;
  while (std::getline(in, line) && is_blank(line)) {
  }
  if (!in && line.empty()) return out;  // empty stream
  static constexpr const char* kColumns[] = {
      "pickup_datetime", "dropoff_datetime", "pickup_lat",
      "pickup_lon",      "dropoff_lat",      "dropoff_lon"};
  const auto col = header_columns(line, kColumns);
  const std::size_t width = split_csv(line).size();

  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    ++s.rows_read;
    const auto f = split_csv(line);
    TripRecord t;
    const auto pu = f.size() == width ? parse_iso8601(f[col[0]]) : std::nullopt;
    const auto dr = f.size() == width ? parse_iso8601(f[col[1]]) : std::nullopt;
    if (!pu || !dr || !parse_double(f[col[2]], t.pickup.lat) ||
        !parse_double(f[col[3]], t.pickup.lon) ||
        !parse_double(f[col[4]], t.dropoff.lat) ||
        !parse_double(f[col[5]], t.dropoff.lon)) {
      ++s.malformed;
      continue;
    }
    t.pickup_time = *pu;
    t.dropoff_time = *dr;
    if (accept_trip(t, bbox, s)) out.push_back(t);
  }
  return out;
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) return false;
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  std::memcpy(&value, &bits, sizeof(T));
  return true;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof(T));
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

constexpr char kColumnarMagic[8] = {'R', 'C', 'D', 'C', 'O', 'L', '1', '\0'};

std::vector<TripRecord> parse_columnar(std::istream& in,
                                       const BoundingBox& bbox,
                                       IngestSummary& s) {
  std::vector<TripRecord> out;
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() == 0) return out;
  if (in.gcount() != sizeof magic ||
      std::memcmp(magic, kColumnarMagic, sizeof magic) != 0)
    throw Error("columnar trip file has a bad magic header");
  std::uint64_t rows = 0;
  if (!read_le(in, rows)) throw Error("columnar trip file is truncated");

  std::vector<TripRecord> all(rows);
  auto read_column = [&](auto member) {
    for (auto& t : all) {
      if (!read_le(in, member(t))) throw Error("columnar trip file is truncated");
    }
  };
  read_column([](TripRecord& t) -> Timestamp& { return t.pickup_time; });
  read_column([](TripRecord& t) -> Timestamp& { return t.dropoff_time; });
  read_column([](TripRecord& t) -> double& { return t.pickup.lat; });
  read_column([](TripRecord& t) -> double& { return t.pickup.lon; });
  read_column([](TripRecord& t) -> double& { return t.dropoff.lat; });
  read_column([](TripRecord& t) -> double& { return t.dropoff.lon; });

  for (const auto& t : all) {
    ++s.rows_read;
    if (!std::isfinite(t.pickup.lat) || !std::isfinite(t.pickup.lon) ||
        !std::isfinite(t.dropoff.lat) || !std::isfinite(t.dropoff.lon)) {
      ++s.malformed;
      continue;
    }
    if (accept_trip(t, bbox, s)) out.push_back(t);
  }
  return out;
}

}  // namespace

std::string to_string(DayType d) {
  switch (d) {
    case DayType::weekday: return "weekday";
    case DayType::weekend: return "weekend";
    case DayType::holiday: return "holiday";
  }
  return "weekday";
}

DayType day_type_from_string(const std::string& s) {
  if (s == "weekday") return DayType::weekday;
  if (s == "weekend") return DayType::weekend;
  if (s == "holiday") return DayType::holiday;
  throw Error("unknown day type '" + s + "'");
}

const RegimeBlock* RegimeLibrary::find(const std::string& block_id) const {
  auto it = std::lower_bound(
      records.begin(), records.end(), block_id,
      [](const RegimeBlock& b, const std::string& id) { return b.block_id < id; });
  if (it != records.end() && it->block_id == block_id) return &*it;
  return nullptr;
}

std::vector<TripRecord> parse_trips(std::istream& in, TripFormat format,
                                    const BoundingBox& bbox,
                                    IngestSummary* summary) {
  IngestSummary local;
  IngestSummary& s = summary ? *summary : local;
  return format == TripFormat::csv ? parse_csv(in, bbox, s)
                                   : parse_columnar(in, bbox, s);
}

void write_columnar(std::ostream& out, std::span<const TripRecord> trips) {
  out.write(kColumnarMagic, sizeof kColumnarMagic);
  write_le<std::uint64_t>(out, trips.size());
  for (const auto& t : trips) write_le(out, t.pickup_time);
  for (const auto& t : trips) write_le(out, t.dropoff_time);
  for (const auto& t : trips) write_le(out, t.pickup.lat);
  for (const auto& t : trips) write_le(out, t.pickup.lon);
  for (const auto& t : trips) write_le(out, t.dropoff.lat);
  for (const auto& t : trips) write_le(out, t.dropoff.lon);
}

ZoneCentroids parse_zone_centroids(std::istream& in) {
  ZoneCentroids table;
  std::string line;
  if (!std::getline(in, line)) return table;
  static constexpr const char* kColumns[] = {"zone_id", "lat", "lon"};
  const auto col = header_columns(line, kColumns);
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    const auto f = split_csv(line);
    std::int64_t id = 0;
    LatLon p;
    if (f.size() <= *std::max_element(col.begin(), col.end()) ||
        !parse_int(f[col[0]], id) || !parse_double(f[col[1]], p.lat) ||
        !parse_double(f[col[2]], p.lon))
      throw Error("malformed zone centroid row: " + line);
    table[id] = p;
  }
  return table;
}

std::vector<TripRecord> parse_zone_trips(std::istream& in,
                                         const ZoneCentroids& centroids,
                                         const BoundingBox& bbox,
                                         IngestSummary* summary) {
  IngestSummary local;
  IngestSummary& s = summary ? *summary : local;
  std::vector<TripRecord> out;
  std::string line;
  while (std::getline(in, line) && is_blank(line)) {
  }
  if (!in && line.empty()) return out;
  static constexpr const char* kColumns[] = {"pickup_datetime", "dropoff_datetime",
                                             "pickup_zone", "dropoff_zone"};
  const auto col = header_columns(line, kColumns);
  const std::size_t width = split_csv(line).size();
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    ++s.rows_read;
    const auto f = split_csv(line);
    std::int64_t pz = 0, dz = 0;
    const auto pu = f.size() == width ? parse_iso8601(f[col[0]]) : std::nullopt;
    const auto dr = f.size() == width ? parse_iso8601(f[col[1]]) : std::nullopt;
    if (!pu || !dr || !parse_int(f[col[2]], pz) || !parse_int(f[col[3]], dz) ||
        !centroids.contains(pz) || !centroids.contains(dz)) {
      ++s.malformed;
      continue;
    }
    TripRecord t{*pu, *dr, centroids.at(pz), centroids.at(dz)};
    if (accept_trip(t, bbox, s)) out.push_back(t);
  }
  return out;
}

// ------------------------------------------------------------ features

SummaryFeatures compute_features(std::span<const double> series) {
  if (series.empty()) throw Error("compute_features: empty series");
  const double n = static_cast<double>(series.size());
  SummaryFeatures f;
  f.mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  f.max = *std::max_element(series.begin(), series.end());
  double m2 = 0.0, m3 = 0.0;
  for (double x : series) {
    const double d = x - f.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  f.std = std::sqrt(m2);
  f.skewness = f.std > 0.0 ? m3 / (f.std * f.std * f.std) : 0.0;

  for (std::size_t lag = 1; lag <= 3; ++lag) {
    double r = 0.0;
    if (series.size() > lag + 1) {
      const auto a = series.first(series.size() - lag);
      const auto b = series.subspan(lag);
      const double len = static_cast<double>(a.size());
      const double ma = std::accumulate(a.begin(), a.end(), 0.0) / len;
      const double mb = std::accumulate(b.begin(), b.end(), 0.0) / len;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
      }
      if (saa > 0.0 && sbb > 0.0)
        r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    }
    f.autocorr[lag - 1] = r;
  }
  return f;
}

std::vector<double> robust_zscores(std::span<const double> series, int window) {
  if (window < 3) throw Error("rolling MAD window must be >= 3");
  std::vector<double> z(series.size(), 0.0);
  std::vector<double> buf;
  auto median = [](std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    return (lo + hi) / 2.0;
  };
  for (std::size_t t = 0; t < series.size(); ++t) {
    const std::size_t lo =
        t + 1 >= static_cast<std::size_t>(window) ? t + 1 - window : 0;
    buf.assign(series.begin() + lo, series.begin() + t + 1);
    const double med = median(buf);
    for (auto& v : buf) v = std::fabs(v - med);
    const double mad = median(buf);
    z[t] = (series[t] - med) / (1.4826 * mad + kMadEpsilon);
  }
  return z;
}

std::vector<SurgeEvent> detect_events(std::span<const double> series,
                                      double threshold, int window) {
  const auto z = robust_zscores(series, window);
  std::vector<SurgeEvent> events;
  const int n = static_cast<int>(series.size());
  int t = 0;
  while (t < n) {
    if (z[t] < threshold) {
      ++t;
      continue;
    }
    SurgeEvent ev;
    ev.start_bin = t;
    ev.peak_intensity = z[t];
    while (t < n && z[t] >= threshold) {
      ev.peak_intensity = std::max(ev.peak_intensity, z[t]);
      ++t;
    }
    ev.end_bin = t;
    ev.duration_bins = ev.end_bin - ev.start_bin;

    // Least-squares line through the preceding bins, zero-padded.
    std::array<double, kPreSurgeBins> pre{};
    for (int i = 0; i < kPreSurgeBins; ++i) {
      const int idx = ev.start_bin - kPreSurgeBins + i;
      pre[i] = idx >= 0 ? series[idx] : 0.0;
    }
    const double xbar = (kPreSurgeBins - 1) / 2.0;
    const double ybar = std::accumulate(pre.begin(), pre.end(), 0.0) / kPreSurgeBins;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < kPreSurgeBins; ++i) {
      sxy += (i - xbar) * (pre[i] - ybar);
      sxx += (i - xbar) * (i - xbar);
    }
    ev.pre_surge_features = {ybar, sxy / sxx};
    events.push_back(std::move(ev));
  }
  return events;
}

// ---------------------------------------------------------------- blocks

std::string block_id_for(const CivilDate& date, int start_hour, int end_hour) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%02d-%02d", start_hour, end_hour);
  return format_date(date) + buf;
}

RegimeBlock make_block(std::string block_id, std::vector<double> series,
                       std::vector<OdPair> od_pool, BlockMetadata metadata,
                       const IngestConfig& config) {
  RegimeBlock b;
  b.block_id = std::move(block_id);
  b.features = compute_features(series);
  b.events = detect_events(series, config.mad_threshold, config.mad_window);
  b.demand_series = std::move(series);
  b.od_pool = std::move(od_pool);
  b.metadata = metadata;
  return b;
}

RegimeLibrary segment_blocks(std::span<const TripRecord> trips,
                             const IngestConfig& config) {
  if (config.bin_minutes <= 0 || config.block_hours <= 0 ||
      (config.block_hours * 60) % config.bin_minutes != 0 ||
      24 % config.block_hours != 0)
    throw Error("block_hours*60 must be divisible by bin_minutes and 24 by block_hours");

  const Timestamp block_s = config.block_hours * 3600;
  const Timestamp bin_s = config.bin_minutes * 60;
  const int bins = config.bins_per_block();

  std::set<std::string> holidays(config.holidays.begin(), config.holidays.end());

  struct Accum {
    std::vector<double> series;
    std::vector<OdPair> pool;
  };
  std::map<Timestamp, Accum> blocks;
  for (const auto& t : trips) {
    Timestamp start = t.pickup_time - ((t.pickup_time % block_s) + block_s) % block_s;
    auto& acc = blocks[start];
    if (acc.series.empty()) acc.series.assign(bins, 0.0);
    const Timestamp offset = t.pickup_time - start;
    acc.series[static_cast<std::size_t>(offset / bin_s)] += 1.0;
    acc.pool.push_back({t.pickup, t.dropoff, static_cast<std::int32_t>(offset)});
  }

  RegimeLibrary lib;
  lib.build_config = config;
  for (auto& [start, acc] : blocks) {
    const CivilDate date = civil_date(start);
    const int hour = static_cast<int>((start - to_timestamp(date)) / 3600);
    BlockMetadata meta;
    meta.month = static_cast<int>(date.month);
    const unsigned wd = weekday_of(date);
    if (holidays.contains(format_date(date)))
      meta.day_type = DayType::holiday;
    else
      meta.day_type = (wd == 0 || wd == 6) ? DayType::weekend : DayType::weekday;
    meta.hour_block = hour / config.block_hours;
    lib.records.push_back(make_block(block_id_for(date, hour, hour + config.block_hours),
                                     std::move(acc.series), std::move(acc.pool),
                                     meta, config));
  }
  return lib;
}

}  // namespace rcd
