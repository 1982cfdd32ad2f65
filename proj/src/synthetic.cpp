#include "rcd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcd/random.hpp"
#include "rcd/similarity.hpp"

namespace rcd {

std::string to_string(Family f) {
  switch (f) {
    case Family::rush: return "rush";
    case Family::flat: return "flat";
    case Family::surge: return "surge";
    case Family::night: return "night";
  }
  return "flat";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::rush, Family::flat, Family::surge, Family::night})
    if (to_string(f) == s) return f;
  throw Error("unknown synthetic family '" + s + "'");
}

void SyntheticProfile::validate() const {
  if (!(base_rate >= 0.0) || !(peak_multiplier >= 0.0)) throw Error("profile rates must be >= 0");
  if (spatial.empty()) throw Error("profile needs at least one hotspot");
  double w = 0.0;
  for (const auto& h : spatial) {
    if (h.weight < 0.0 || !(h.sigma_m > 0.0)) throw Error("bad hotspot");
    w += h.weight;
  }
  if (std::fabs(w - 1.0) > 1e-9) throw Error("hotspot weights must sum to 1");
  double wd = 0.0;
  for (const auto& h : destinations) {
    if (h.weight < 0.0 || !(h.sigma_m > 0.0)) throw Error("bad destination hotspot");
    wd += h.weight;
  }
  if (!destinations.empty() && std::fabs(wd - 1.0) > 1e-9)
    throw Error("destination weights must sum to 1");
  if (background < 0.0 || background > 1.0) throw Error("background share must be in [0, 1]");
  if (local_dropoff < 0.0 || local_dropoff > 1.0) throw Error("local dropoff share must be in [0, 1]");
}

std::vector<SyntheticProfile> default_profiles() {
  // Rush, surge and night carry directional flows (pickups and dropoffs in
  // different districts); flat midday demand stays local.
  SyntheticProfile rush{Family::rush, 60.0, 2.4, 11,
                        {{{40.767, -73.963}, 0.40, 400},
                         {{40.773, -73.980}, 0.35, 400},
                         {{40.755, -73.977}, 0.25, 400}}};
  rush.destinations = {{{40.755, -73.977}, 0.6, 800}, {{40.750, -73.988}, 0.4, 800}};
  SyntheticProfile flat{Family::flat, 102.0, 1.0, 22,
                        {{{40.754, -73.984}, 0.4, 400},
                         {{40.735, -73.991}, 0.3, 400},
                         {{40.764, -73.970}, 0.3, 400}}};
  SyntheticProfile surge{Family::surge, 36.0, 1.4, 33,
                         {{{40.758, -73.986}, 0.4, 400},
                          {{40.750, -73.993}, 0.35, 400},
                          {{40.738, -74.002}, 0.25, 400}}};
  surge.destinations = {{{40.772, -73.978}, 0.5, 800}, {{40.738, -74.002}, 0.5, 800}};
  SyntheticProfile night{Family::night, 27.0, 1.5, 44,
                         {{{40.726, -73.985}, 0.375, 400},
                          {{40.718, -73.990}, 0.375, 400},
                          {{40.740, -73.978}, 0.25, 400}}};
  night.destinations = {{{40.740, -73.978}, 0.5, 800}, {{40.712, -74.006}, 0.5, 800}};
  return {rush, flat, surge, night};
}

const SyntheticProfile& default_profile(Family f) {
  static const auto profiles = default_profiles();
  return profiles[static_cast<std::size_t>(f)];
}

BlockMetadata family_metadata(Family f, int month) {
  switch (f) {
    case Family::rush: return {month, DayType::weekday, 2};
    case Family::flat: return {month, DayType::weekday, 3};
    case Family::surge: return {month, DayType::weekend, 4};
    case Family::night: return {month, DayType::weekend, 5};
  }
  return {month, DayType::weekday, 0};
}

Family family_of(const RegimeBlock& block) {
  const auto& m = block.metadata;
  if (m.day_type == DayType::weekday) return m.hour_block == 2 ? Family::rush : Family::flat;
  return m.hour_block == 4 ? Family::surge : Family::night;
}

std::vector<double> family_shape(const SyntheticProfile& p, int bins, std::uint64_t seed) {
  std::vector<double> s(static_cast<std::size_t>(bins), p.base_rate);
  const double scale = bins / 48.0;
  switch (p.family) {
    case Family::rush:
      for (int b = 0; b < bins; ++b) {
        // Flat-topped peak around bin 12.
        const double z = (b - 12.0 * scale) / (1.5 * scale);
        s[b] *= 1.0 + (p.peak_multiplier - 1.0) * std::exp(-0.5 * z * z * z * z);
      }
      break;
    case Family::flat: break;
    case Family::surge: {
      // Recurrent spikes (event lets-out) with a one-bin jitter per block.
      Rng rng(seed);
      for (double centre : {22.0, 34.0}) {
        const int start = static_cast<int>(centre * scale) + static_cast<int>(rng.below(3)) - 1;
        for (int b = std::max(0, start); b < std::min(bins, start + 3); ++b)
          s[b] = p.base_rate * p.peak_multiplier;
      }
      break;
    }
    case Family::night: {
      // Linear ramp with mean 1 whose end/start ratio is the peak multiplier.
      const double lo = 2.0 / (1.0 + p.peak_multiplier), hi = 2.0 * p.peak_multiplier / (1.0 + p.peak_multiplier);
      for (int b = 0; b < bins; ++b) s[b] *= lo + (hi - lo) * b / std::max(1.0, bins - 1.0);
      break;
    }
  }
  return s;
}

namespace {

constexpr double kMetersPerDegLat = 111320.0;

LatLon clamp_to(const BoundingBox& box, LatLon p) {
  return {std::clamp(p.lat, box.min_lat, box.max_lat), std::clamp(p.lon, box.min_lon, box.max_lon)};
}

LatLon displaced(const LatLon& c, double sigma_m, Rng& rng) {
  const double dlat = sigma_m * rng.normal() / kMetersPerDegLat;
  const double dlon =
      sigma_m * rng.normal() / (kMetersPerDegLat * std::cos(c.lat * M_PI / 180.0));
  return {c.lat + dlat, c.lon + dlon};
}

// Point from a hotspot mixture.
LatLon pick(const std::vector<Hotspot>& spots, Rng& rng) {
  double u = rng.uniform();
  std::size_t k = 0;
  while (k + 1 < spots.size() && u >= spots[k].weight) u -= spots[k++].weight;
  return displaced(spots[k].center, spots[k].sigma_m, rng);
}

}  // namespace

RegimeBlock generate_block(const SyntheticProfile& p, const CivilDate& date, std::uint64_t seed,
                           const IngestConfig& config) {
  p.validate();
  Rng rng(seed);
  const int bins = config.bins_per_block();
  const int bin_s = config.bin_minutes * 60;
  auto shape = family_shape(p, bins, rng.next());
  const double level = std::exp(0.10 * rng.normal());

  std::vector<double> series(static_cast<std::size_t>(bins));
  std::vector<OdPair> pool;
  for (int b = 0; b < bins; ++b) {
    const auto count = rng.poisson(shape[b] * level);
    series[b] = static_cast<double>(count);
    for (std::int64_t i = 0; i < count; ++i) {
      OdPair od;
      od.offset_s = static_cast<std::int32_t>(b * bin_s + rng.below(bin_s));
      if (rng.uniform() < p.background) {
        od.pickup = {rng.uniform(config.bbox.min_lat, config.bbox.max_lat),
                     rng.uniform(config.bbox.min_lon, config.bbox.max_lon)};
      } else {
        od.pickup = clamp_to(config.bbox, pick(p.spatial, rng));
      }
      if (p.destinations.empty() || rng.uniform() < p.local_dropoff)
        od.dropoff = clamp_to(config.bbox, displaced(od.pickup, p.dropoff_sigma_m, rng));
      else
        od.dropoff = clamp_to(config.bbox, pick(p.destinations, rng));
      pool.push_back(od);
    }
  }
  const auto meta = family_metadata(p.family, static_cast<int>(date.month));
  const int start_hour = meta.hour_block * config.block_hours;
  return make_block(block_id_for(date, start_hour, start_hour + config.block_hours),
                    std::move(series), std::move(pool), meta, config);
}

RegimeLibrary generate_synthetic_library(const std::vector<SyntheticProfile>& profiles,
                                         int n_blocks_per_profile, std::uint64_t seed,
                                         const IngestConfig& config) {
  if (n_blocks_per_profile < 1) throw Error("need at least one block per profile");
  if (config.bins_per_block() < 8) throw Error("synthetic blocks need at least 8 bins");
  RegimeLibrary lib;
  lib.build_config = config;
  const Timestamp day0 = to_timestamp({2024, 1, 1});
  for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
    const auto& p = profiles[pi];
    const bool weekend = family_metadata(p.family, 1).day_type != DayType::weekday;
    int made = 0;
    for (int day = 0; made < n_blocks_per_profile; ++day) {
      const CivilDate date = civil_date(day0 + static_cast<Timestamp>(day) * 86400);
      const unsigned wd = weekday_of(date);
      if ((wd == 0 || wd == 6) != weekend) continue;
      const auto block_seed =
          substream_seed(substream_seed(seed, p.noise_seed), static_cast<std::uint64_t>(made));
      lib.records.push_back(generate_block(p, date, block_seed, config));
      ++made;
    }
  }
  std::sort(lib.records.begin(), lib.records.end(),
            [](const RegimeBlock& a, const RegimeBlock& b) { return a.block_id < b.block_id; });
  for (std::size_t i = 1; i < lib.records.size(); ++i)
    if (lib.records[i].block_id == lib.records[i - 1].block_id)
      throw Error("synthetic library has duplicate block id " + lib.records[i].block_id);

  // Consistency premise: blocks resemble their own family more than others.
  if (profiles.size() > 1 && lib.records.size() > 1) {
    const auto scale = FeatureScale::from_library(lib);
    const SimilarityWeights w;
    double within = 0.0, cross = 0.0;
    std::size_t n_within = 0, n_cross = 0;
    for (std::size_t i = 0; i < lib.records.size(); ++i) {
      const auto qc = QueryContext::from_block(lib.records[i]);
      for (std::size_t j = 0; j < lib.records.size(); ++j) {
        if (i == j) continue;
        const double s = ensemble_score(qc, lib.records[j], w, scale, config).total_score;
        if (family_of(lib.records[i]) == family_of(lib.records[j])) {
          within += s;
          ++n_within;
        } else {
          cross += s;
          ++n_cross;
        }
      }
    }
    if (n_within && n_cross && !(within / n_within > cross / n_cross))
      throw Error("synthetic library violates within-family > cross-family similarity");
  }
  return lib;
}

}  // namespace rcd
