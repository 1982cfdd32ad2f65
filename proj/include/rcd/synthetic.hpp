#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcd/ingestion.hpp"

namespace rcd {

enum class Family { rush, flat, surge, night };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct Hotspot {
  LatLon center;
  double weight = 1.0;
  double sigma_m = 400.0;
};

struct SyntheticProfile {
  Family family = Family::flat;
  double base_rate = 20.0;        // requests per bin
  double peak_multiplier = 1.0;   // rush peak / surge spike height
  std::uint64_t noise_seed = 0;
  std::vector<Hotspot> spatial;       // pickup mixture
  std::vector<Hotspot> destinations;  // dropoff attractors
  double background = 0.0;            // share of pickups uniform in the box
  double local_dropoff = 0.50;        // share of dropoffs displaced around the pickup
  double dropoff_sigma_m = 1000.0;

  void validate() const;
};

/// The four built-in families with Manhattan hotspots.
std::vector<SyntheticProfile> default_profiles();
const SyntheticProfile& default_profile(Family f);

/// Day type and hour block implied by a family.
BlockMetadata family_metadata(Family f, int month);

/// Expected requests per bin (before per-block noise).
std::vector<double> family_shape(const SyntheticProfile& p, int bins, std::uint64_t seed);

/// One block drawn from a profile: per-block level noise, Poisson counts,
/// hotspot pickups and displaced dropoffs.
RegimeBlock generate_block(const SyntheticProfile& p, const CivilDate& date,
                           std::uint64_t seed, const IngestConfig& config = {});

/// n blocks per profile on dates whose day type matches the family.
/// Throws rcd::Error if mean within-family similarity does not exceed mean
/// cross-family similarity.
RegimeLibrary generate_synthetic_library(const std::vector<SyntheticProfile>& profiles,
                                         int n_blocks_per_profile, std::uint64_t seed,
                                         const IngestConfig& config = {});

/// Block-id prefix -> family, for libraries built by the generator.
Family family_of(const RegimeBlock& block);

}  // namespace rcd
