#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcd/ingestion.hpp"
#include "rcd/similarity.hpp"

namespace rcd {

/// How sample_requests draws OD pairs from the pooled matches.
enum class OdSampling {
  source_weighted,  // pick a source block by alpha, then a pair uniformly
  uniform_pool,     // every pooled pair equally likely
};

std::string to_string(OdSampling s);
OdSampling od_sampling_from_string(const std::string& s);

struct CalibratedPrior {
  std::vector<double> rate_profile;  // expected requests per bin
  std::vector<OdPair> od_pool;       // concatenation of the sources' pools
  std::vector<std::size_t> source_offsets;  // k+1 offsets into od_pool
  std::vector<double> weights;              // alpha, one per source
  std::vector<std::string> source_ids;
  double target_volume = 0.0;
  int bin_seconds = 300;
  OdSampling od_sampling = OdSampling::source_weighted;

  double total_rate() const;
  /// Probability mass the OD sampler places on od_pool[i].
  double pair_probability(std::size_t i) const;
};

/// Similarity-weighted rate profile plus pooled OD sampler, rescaled so
/// the profile sums to `target_volume`.
CalibratedPrior build_prior(std::span<const MatchResult> matches,
                            const RegimeLibrary& lib, double target_volume,
                            OdSampling od_sampling = OdSampling::source_weighted);

struct SampledRequest {
  std::int64_t time_s = 0;  // relative to block start
  LatLon pickup;
  LatLon dropoff;
};

/// Poisson counts per bin, uniform arrival second within the bin, OD from
/// the pooled sampler. Sorted by time; fully determined by `seed`.
std::vector<SampledRequest> sample_requests(const CalibratedPrior& prior,
                                            std::uint64_t seed);

/// Euclidean distance between two rate profiles.
double calibration_error(std::span<const double> estimate,
                         std::span<const double> truth);

struct ConsistencyReport {
  std::string scenario;
  std::size_t n_records = 0;
  double rho = 0.0;
  double p_value = 1.0;
  double top5_error_ratio = 0.0;  // mean error of top-5 / library median error
  std::vector<double> similarities;
  std::vector<double> errors;
};

/// Scores every record except `truth` against the truth block's full
/// series and correlates similarity with negative demand error.
ConsistencyReport consistency_check(const RegimeLibrary& lib, const RegimeBlock& truth,
                                    const SimilarityWeights& w,
                                    const std::string& scenario = {});
ConsistencyReport consistency_check_serial(const RegimeLibrary& lib,
                                           const RegimeBlock& truth,
                                           const SimilarityWeights& w,
                                           const std::string& scenario = {});

/// CSV with columns scenario,n,rho,p_value,top5_error_ratio.
std::string consistency_csv(std::span<const ConsistencyReport> reports);

}  // namespace rcd
