#include "rcd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rcd/random.hpp"
#include "rcd/stats.hpp"

namespace rcd {

std::string to_string(OdSampling s) {
  return s == OdSampling::uniform_pool ? "uniform_pool" : "source_weighted";
}

OdSampling od_sampling_from_string(const std::string& s) {
  if (s == "source_weighted") return OdSampling::source_weighted;
  if (s == "uniform_pool") return OdSampling::uniform_pool;
  throw Error("unknown od sampling '" + s + "'");
}

double CalibratedPrior::total_rate() const {
  return std::accumulate(rate_profile.begin(), rate_profile.end(), 0.0);
}

double CalibratedPrior::pair_probability(std::size_t i) const {
  if (od_sampling == OdSampling::uniform_pool)
    return 1.0 / static_cast<double>(od_pool.size());
  double live = 0.0;
  for (std::size_t s = 0; s < weights.size(); ++s)
    if (source_offsets[s + 1] > source_offsets[s]) live += weights[s];
  const auto it = std::upper_bound(source_offsets.begin(), source_offsets.end(), i);
  const auto s = static_cast<std::size_t>(it - source_offsets.begin()) - 1;
  const double size = static_cast<double>(source_offsets[s + 1] - source_offsets[s]);
  return weights[s] / live / size;
}

CalibratedPrior build_prior(std::span<const MatchResult> matches,
                            const RegimeLibrary& lib, double target_volume,
                            OdSampling od_sampling) {
  if (matches.empty()) throw Error("build_prior: no matches");
  if (!(target_volume >= 0.0)) throw Error("build_prior: target_volume must be >= 0");

  std::vector<const MatchResult*> used;
  for (const auto& m : matches)
    if (m.total_score > 0.0) used.push_back(&m);
  const bool uniform = used.empty();
  if (uniform)
    for (const auto& m : matches) used.push_back(&m);

  CalibratedPrior prior;
  prior.target_volume = target_volume;
  prior.bin_seconds = lib.build_config.bin_minutes * 60;
  prior.od_sampling = od_sampling;

  double score_sum = 0.0;
  for (const auto* m : used) score_sum += m->total_score;
  prior.source_offsets.push_back(0);
  for (const auto* m : used) {
    const RegimeBlock* block = lib.find(m->block_id);
    if (!block) throw Error("build_prior: block '" + m->block_id + "' not in library");
    const double alpha = uniform ? 1.0 / static_cast<double>(used.size())
                                 : m->total_score / score_sum;
    if (prior.rate_profile.empty())
      prior.rate_profile.assign(block->demand_series.size(), 0.0);
    if (block->demand_series.size() != prior.rate_profile.size())
      throw Error("build_prior: matched blocks differ in series length");
    for (std::size_t t = 0; t < prior.rate_profile.size(); ++t)
      prior.rate_profile[t] += alpha * block->demand_series[t];
    prior.weights.push_back(alpha);
    prior.source_ids.push_back(block->block_id);
    prior.od_pool.insert(prior.od_pool.end(), block->od_pool.begin(),
                         block->od_pool.end());
    prior.source_offsets.push_back(prior.od_pool.size());
  }
  if (prior.od_pool.empty()) throw Error("build_prior: all matched OD pools are empty");

  const double raw = prior.total_rate();
  if (raw > 0.0) {
    const double scale = target_volume / raw;
    for (auto& v : prior.rate_profile) v *= scale;
  }
  return prior;
}

std::vector<SampledRequest> sample_requests(const CalibratedPrior& prior,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SampledRequest> out;
  if (prior.od_pool.empty()) return out;

  // Cumulative alpha over sources that actually have trips.
  std::vector<double> cum;
  double acc = 0.0;
  for (std::size_t s = 0; s < prior.weights.size(); ++s) {
    if (prior.source_offsets[s + 1] > prior.source_offsets[s]) acc += prior.weights[s];
    cum.push_back(acc);
  }
  auto draw_pair = [&]() -> const OdPair& {
    if (prior.od_sampling == OdSampling::uniform_pool)
      return prior.od_pool[rng.below(prior.od_pool.size())];
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    auto s = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cum.begin(), std::ssize(cum) - 1));
    while (prior.source_offsets[s + 1] == prior.source_offsets[s]) --s;
    const std::size_t size = prior.source_offsets[s + 1] - prior.source_offsets[s];
    return prior.od_pool[prior.source_offsets[s] + rng.below(size)];
  };

  const auto bin_s = static_cast<std::uint64_t>(prior.bin_seconds);
  for (std::size_t t = 0; t < prior.rate_profile.size(); ++t) {
    const std::int64_t count = rng.poisson(prior.rate_profile[t]);
    for (std::int64_t c = 0; c < count; ++c) {
      SampledRequest r;
      r.time_s = static_cast<std::int64_t>(t * bin_s + rng.below(bin_s));
      const OdPair& p = draw_pair();
      r.pickup = p.pickup;
      r.dropoff = p.dropoff;
      out.push_back(r);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SampledRequest& a, const SampledRequest& b) {
                     return a.time_s < b.time_s;
                   });
  return out;
}

double calibration_error(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size())
    throw Error("calibration_error: profile lengths differ");
  double ss = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i)
    ss += (estimate[i] - truth[i]) * (estimate[i] - truth[i]);
  return std::sqrt(ss);
}

namespace {

ConsistencyReport finish_report(std::vector<MatchResult> scored, const RegimeLibrary& lib,
                                const RegimeBlock& truth, const std::string& scenario) {
  ConsistencyReport rep;
  rep.scenario = scenario.empty() ? truth.block_id : scenario;
  rep.n_records = scored.size();
  if (scored.size() < 3) throw Error("consistency_check: need at least 3 records");
  std::vector<double> neg_err;
  for (const auto& m : scored) {
    const RegimeBlock* r = lib.find(m.block_id);
    const double e = calibration_error(r->demand_series, truth.demand_series);
    rep.similarities.push_back(m.total_score);
    rep.errors.push_back(e);
    neg_err.push_back(-e);
  }
  const Correlation c = spearman(rep.similarities, neg_err);
  rep.rho = c.rho;
  rep.p_value = c.p_value;

  rank_matches(scored);
  const std::size_t top = std::min<std::size_t>(5, scored.size());
  double top_err = 0.0;
  for (std::size_t i = 0; i < top; ++i)
    top_err += calibration_error(lib.find(scored[i].block_id)->demand_series,
                                 truth.demand_series);
  top_err /= static_cast<double>(top);
  const double median = percentile(rep.errors, 0.5);
  rep.top5_error_ratio = median > 0.0 ? top_err / median : 0.0;
  return rep;
}

}  // namespace

ConsistencyReport consistency_check(const RegimeLibrary& lib, const RegimeBlock& truth,
                                    const SimilarityWeights& w,
                                    const std::string& scenario) {
  const auto scale = FeatureScale::from_library(lib);
  const auto qc = QueryContext::from_block(truth);
  return finish_report(score_library(qc, lib, w, scale, {truth.block_id}), lib, truth,
                       scenario);
}

ConsistencyReport consistency_check_serial(const RegimeLibrary& lib,
                                           const RegimeBlock& truth,
                                           const SimilarityWeights& w,
                                           const std::string& scenario) {
  const auto scale = FeatureScale::from_library(lib);
  const auto qc = QueryContext::from_block(truth);
  return finish_report(score_library_serial(qc, lib, w, scale, {truth.block_id}), lib,
                       truth, scenario);
}

std::string consistency_csv(std::span<const ConsistencyReport> reports) {
  std::ostringstream os;
  os.precision(6);
  os << "scenario,n,rho,p_value,top5_error_ratio\n";
  for (const auto& r : reports)
    os << r.scenario << ',' << r.n_records << ',' << r.rho << ',' << r.p_value << ','
       << r.top5_error_ratio << '\n';
  return os.str();
}

}  // namespace rcd
