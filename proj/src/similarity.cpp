#include "rcd/similarity.hpp"

#include <algorithm>
#include <cmath>

namespace rcd {

double SimilarityWeights::sum() const {
  return ks + w1 + feat + var + event + temporal;
}

void SimilarityWeights::validate() const {
  for (double w : as_array())
    if (!(w >= 0.0)) throw Error("similarity weights must be non-negative");
  if (std::fabs(sum() - 1.0) > 1e-9)
    throw Error("similarity weights must sum to 1");
}

SimilarityWeights SimilarityWeights::preset(const std::string& name) {
  if (name == "full" || name == "default") return {};
  if (name == "distributional_only") {
    const SimilarityWeights d;
    const double kept = d.ks + d.w1 + d.feat + d.var;
    return {d.ks / kept, d.w1 / kept, d.feat / kept, d.var / kept, 0.0, 0.0};
  }
  throw Error("unknown weights preset '" + name + "'");
}

FeatureScale FeatureScale::unit() {
  FeatureScale s;
  s.scale.fill(1.0);
  return s;
}

FeatureScale FeatureScale::from_library(const RegimeLibrary& lib) {
  FeatureScale s;
  s.scale.fill(1.0);
  const std::size_t n = lib.records.size();
  if (n == 0) return s;
  for (std::size_t d = 0; d < SummaryFeatures::kDims; ++d) {
    double mean = 0.0;
    for (const auto& r : lib.records) mean += r.features.as_vector()[d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : lib.records) {
      const double x = r.features.as_vector()[d] - mean;
      var += x * x;
    }
    s.scale[d] = std::max(std::sqrt(var / static_cast<double>(n)), kFeatureScaleFloor);
  }
  return s;
}

QueryContext QueryContext::from_block(const RegimeBlock& block) {
  return {block.demand_series, block.features, block.events, block.metadata,
          MatchMode::full};
}

QueryContext QueryContext::from_prefix(std::span<const double> observed,
                                       const BlockMetadata& metadata,
                                       const IngestConfig& config) {
  if (observed.empty()) throw Error("prefix query needs at least one bin");
  QueryContext qc;
  qc.series.assign(observed.begin(), observed.end());
  qc.features = compute_features(observed);
  qc.events = detect_events(observed, config.mad_threshold, config.mad_window);
  qc.metadata = metadata;
  qc.mode = MatchMode::prefix;
  return qc;
}

// ------------------------------------------------------------------ distances

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  // Integrate |F - G| over the merged breakpoints.
  std::size_t i = 0, j = 0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j]))
      v = x[i];
    else
      v = y[j];
    const double fx = static_cast<double>(i) / nx;
    const double gy = static_cast<double>(j) / ny;
    total += std::fabs(fx - gy) * (v - prev);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    prev = v;
  }
  return total;
}

// ---------------------------------------------------------------- metrics

double sim_ks(std::span<const double> q, std::span<const double> r) {
  if (q.empty() || r.empty()) throw Error("sim_ks: empty series");
  return std::clamp(1.0 - ks_statistic(q, r), 0.0, 1.0);
}

double sim_w1(std::span<const double> q, std::span<const double> r) {
  if (q.empty() || r.empty()) throw Error("sim_w1: empty series");
  const auto [qlo, qhi] = std::minmax_element(q.begin(), q.end());
  const auto [rlo, rhi] = std::minmax_element(r.begin(), r.end());
  double range = std::max(*qhi, *rhi) - std::min(*qlo, *rlo);
  if (range <= 0.0) range = 1.0;
  return 1.0 / (1.0 + wasserstein1(q, r) / range);
}

double sim_feat(const SummaryFeatures& fq, const SummaryFeatures& fr,
                const FeatureScale& scale) {
  const auto a = fq.as_vector();
  const auto b = fr.as_vector();
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = (a[i] - b[i]) / std::max(scale.scale[i], kFeatureScaleFloor);
    d2 += z * z;
  }
  return 1.0 / (1.0 + std::sqrt(d2));
}

double sim_var(double sigma_q, double sigma_r) {
  const double hi = std::max(sigma_q, sigma_r);
  if (hi <= 0.0) return 1.0;
  return std::min(sigma_q, sigma_r) / hi;
}

double sim_event(std::span<const SurgeEvent> eq, std::span<const SurgeEvent> er) {
  if (eq.empty() && er.empty()) return 1.0;
  if (eq.empty() || er.empty()) return 0.0;

  std::vector<double> iq, ir, dq, dr;
  for (const auto& e : eq) {
    iq.push_back(e.peak_intensity);
    dq.push_back(e.duration_bins);
  }
  for (const auto& e : er) {
    ir.push_back(e.peak_intensity);
    dr.push_back(e.duration_bins);
  }
  const double s_intensity = 1.0 / (1.0 + wasserstein1(iq, ir));
  const double s_duration = 1.0 / (1.0 + wasserstein1(dq, dr));

  // Query events walk the record's events in chronological order.
  const std::size_t pairs = std::min(eq.size(), er.size());
  double s_prefix = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto& a = eq[i].pre_surge_features;
    const auto& b = er[i].pre_surge_features;
    double d2 = 0.0;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
      d2 += (a[k] - b[k]) * (a[k] - b[k]);
    s_prefix += 1.0 / (1.0 + std::sqrt(d2));
  }
  s_prefix /= static_cast<double>(pairs);

  const double s_count = static_cast<double>(pairs) /
                         static_cast<double>(std::max(eq.size(), er.size()));
  return 0.25 * (s_intensity + s_duration + s_prefix + s_count);
}

double sim_temporal(const BlockMetadata& mq, const BlockMetadata& mr) {
  int hits = 0;
  hits += mq.month == mr.month;
  hits += mq.day_type == mr.day_type;
  hits += mq.hour_block == mr.hour_block;
  return hits / 3.0;
}

SimilarityWeights gate_weights(const SimilarityWeights& w, bool query_has_events,
                               bool record_has_events) {
  if (query_has_events == record_has_events) return w;
  SimilarityWeights g = w;
  g.ks += w.event / 2.0;
  g.w1 += w.event / 2.0;
  g.event = 0.0;
  return g;
}

MatchResult ensemble_score(const QueryContext& qc, const RegimeBlock& record,
                           const SimilarityWeights& w, const FeatureScale& scale,
                           const IngestConfig& config) {
  std::span<const double> rs = record.demand_series;
  const SummaryFeatures* rf = &record.features;
  const std::vector<SurgeEvent>* rev = &record.events;

  SummaryFeatures prefix_features;
  std::vector<SurgeEvent> prefix_events;
  if (qc.mode == MatchMode::prefix && qc.series.size() < rs.size()) {
    rs = rs.first(qc.series.size());
    prefix_features = compute_features(rs);
    prefix_events = detect_events(rs, config.mad_threshold, config.mad_window);
    rf = &prefix_features;
    rev = &prefix_events;
  }

  MatchResult m;
  m.block_id = record.block_id;
  m.effective_weights = gate_weights(w, !qc.events.empty(), !rev->empty());
  m.components = {sim_ks(qc.series, rs),
                  sim_w1(qc.series, rs),
                  sim_feat(qc.features, *rf, scale),
                  sim_var(qc.features.std, rf->std),
                  sim_event(qc.events, *rev),
                  sim_temporal(qc.metadata, record.metadata)};
  const auto ew = m.effective_weights.as_array();
  double total = 0.0;
  for (std::size_t i = 0; i < kMetricCount; ++i) total += ew[i] * m.components[i];
  m.total_score = std::clamp(total, 0.0, 1.0);
  return m;
}

// --------------------------------------------------------------- library scan

namespace {

std::vector<const RegimeBlock*> candidates(const RegimeLibrary& lib,
                                           const std::set<std::string>& exclude) {
  std::vector<const RegimeBlock*> out;
  out.reserve(lib.records.size());
  for (const auto& r : lib.records)
    if (!exclude.contains(r.block_id)) out.push_back(&r);
  return out;
}

}  // namespace

std::vector<MatchResult> score_library_serial(const QueryContext& qc,
                                              const RegimeLibrary& lib,
                                              const SimilarityWeights& w,
                                              const FeatureScale& scale,
                                              const std::set<std::string>& exclude) {
  std::vector<MatchResult> out;
  for (const RegimeBlock* r : candidates(lib, exclude))
    out.push_back(ensemble_score(qc, *r, w, scale, lib.build_config));
  return out;
}

std::vector<MatchResult> score_library(const QueryContext& qc,
                                       const RegimeLibrary& lib,
                                       const SimilarityWeights& w,
                                       const FeatureScale& scale,
                                       const std::set<std::string>& exclude) {
  const auto recs = candidates(lib, exclude);
  std::vector<MatchResult> out(recs.size());
  const auto n = static_cast<std::ptrdiff_t>(recs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[i] = ensemble_score(qc, *recs[i], w, scale, lib.build_config);
  return out;
}

void rank_matches(std::vector<MatchResult>& matches) {
  std::stable_sort(matches.begin(), matches.end(),
                   [](const MatchResult& a, const MatchResult& b) {
                     if (a.total_score != b.total_score)
                       return a.total_score > b.total_score;
                     return a.block_id < b.block_id;
                   });
}

std::vector<MatchResult> top_k(const QueryContext& qc, const RegimeLibrary& lib,
                               const SimilarityWeights& w, const FeatureScale& scale,
                               int k, const std::set<std::string>& exclude) {
  if (k < 1) throw Error("top_k: k must be >= 1");
  w.validate();
  auto scored = score_library(qc, lib, w, scale, exclude);
  if (scored.empty()) throw Error("no candidate regimes");
  rank_matches(scored);
  if (scored.size() > static_cast<std::size_t>(k)) scored.resize(k);
  return scored;
}

std::vector<MatchResult> top_k(const QueryContext& qc, const RegimeLibrary& lib,
                               const SimilarityWeights& w, int k,
                               const std::set<std::string>& exclude) {
  return top_k(qc, lib, w, FeatureScale::from_library(lib), k, exclude);
}

}  // namespace rcd
