#pragma once

#include <array>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rcd/ingestion.hpp"

namespace rcd {

enum class Metric { ks, w1, feat, var, event, temporal };
inline constexpr std::size_t kMetricCount = 6;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {
    "ks", "w1", "feat", "var", "event", "temporal"};

struct SimilarityWeights {
  double ks = 0.20;
  double w1 = 0.20;
  double feat = 0.15;
  double var = 0.10;
  double event = 0.20;
  double temporal = 0.15;

  std::array<double, kMetricCount> as_array() const {
    return {ks, w1, feat, var, event, temporal};
  }
  double sum() const;
  /// Throws rcd::Error unless every weight is >= 0 and they sum to 1.
  void validate() const;

  /// Named presets: "full" (defaults) and "distributional_only"
  /// (event/temporal zeroed, the remaining four renormalized).
  static SimilarityWeights preset(const std::string& name);

  friend bool operator==(const SimilarityWeights&,
                         const SimilarityWeights&) = default;
};

/// Per-dimension spread of the 7 summary features across a library,
/// floored at kFeatureScaleFloor.
struct FeatureScale {
  std::array<double, SummaryFeatures::kDims> scale;

  static FeatureScale unit();
  static FeatureScale from_library(const RegimeLibrary& lib);
};
inline constexpr double kFeatureScaleFloor = 1e-9;

enum class MatchMode { full, prefix };

struct QueryContext {
  std::vector<double> series;
  SummaryFeatures features;
  std::vector<SurgeEvent> events;
  BlockMetadata metadata;
  MatchMode mode = MatchMode::full;

  /// Full-mode query built from a complete block.
  static QueryContext from_block(const RegimeBlock& block);
  /// Prefix-mode query; features and events are computed on the observed
  /// prefix itself.
  static QueryContext from_prefix(std::span<const double> observed,
                                  const BlockMetadata& metadata,
                                  const IngestConfig& config);
};

struct MatchResult {
  std::string block_id;
  double total_score = 0.0;
  std::array<double, kMetricCount> components{};
  SimilarityWeights effective_weights;
};

// ------------------------------------------------------ distribution distances

/// Two-sample Kolmogorov-Smirnov statistic between empirical value
/// distributions.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// 1-D earth mover's distance between empirical value distributions.
double wasserstein1(std::span<const double> a, std::span<const double> b);

// ------------------------------------------------------------- six metrics

double sim_ks(std::span<const double> q, std::span<const double> r);
double sim_w1(std::span<const double> q, std::span<const double> r);
double sim_feat(const SummaryFeatures& fq, const SummaryFeatures& fr,
                const FeatureScale& scale);
double sim_var(double sigma_q, double sigma_r);
double sim_event(std::span<const SurgeEvent> eq, std::span<const SurgeEvent> er);
double sim_temporal(const BlockMetadata& mq, const BlockMetadata& mr);

/// Applies the adaptive event gate: when exactly one side has no events
/// the event weight moves, half each, onto KS and W1.
SimilarityWeights gate_weights(const SimilarityWeights& w, bool query_has_events,
                               bool record_has_events);

/// Weighted six-metric score of a query against one record. In prefix
/// mode the record is truncated to the query length and its features and
/// events are recomputed with `config`.
MatchResult ensemble_score(const QueryContext& qc, const RegimeBlock& record,
                           const SimilarityWeights& w, const FeatureScale& scale,
                           const IngestConfig& config = {});

// ------------------------------------------------------------ library scan

/// Scores every record not in `exclude`, in library order. OpenMP-parallel
/// over records; the output is identical to score_library_serial.
std::vector<MatchResult> score_library(const QueryContext& qc,
                                       const RegimeLibrary& lib,
                                       const SimilarityWeights& w,
                                       const FeatureScale& scale,
                                       const std::set<std::string>& exclude = {});

std::vector<MatchResult> score_library_serial(
    const QueryContext& qc, const RegimeLibrary& lib, const SimilarityWeights& w,
    const FeatureScale& scale, const std::set<std::string>& exclude = {});

/// Orders by descending score, ties by ascending block_id.
void rank_matches(std::vector<MatchResult>& matches);

/// The k best matches (fewer when the library is smaller). Throws
/// rcd::Error("no candidate regimes") if nothing survives the exclusion.
std::vector<MatchResult> top_k(const QueryContext& qc, const RegimeLibrary& lib,
                               const SimilarityWeights& w, int k = 5,
                               const std::set<std::string>& exclude = {});

std::vector<MatchResult> top_k(const QueryContext& qc, const RegimeLibrary& lib,
                               const SimilarityWeights& w, const FeatureScale& scale,
                               int k, const std::set<std::string>& exclude);

}  // namespace rcd
