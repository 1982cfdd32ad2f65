#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcd/metrics.hpp"
#include "rcd/stats.hpp"

namespace rcd {

/// Summary of one (scenario, policy, seed) cell.
struct RunRecord {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  SimResult result;
  int n_drivers = 0;
  int reposition_moves = 0;
  int clipped_moves = 0;
};

struct StatOptions {
  std::string baseline = "replay_batch";
  std::string method = "cal_lp";
  std::string cal_only = "cal_only";
  // Methods ranked by the Friedman test; missing ones are skipped.
  std::vector<std::string> friedman_methods = {"replay_batch", "cal_only", "cal_lp"};
  int bonferroni_m = 8;
  int bootstrap_resamples = 10000;
  std::uint64_t bootstrap_seed = 42;
};

struct ScenarioComparison {
  std::string scenario;
  std::size_t n_seeds = 0;
  double base_mean = 0.0, base_sd = 0.0;
  double ours_mean = 0.0, ours_sd = 0.0;
  double improvement = 0.0;  // mean over seeds of (base - ours) / base
  Interval ci;               // bootstrap over seeds
  double p_raw = 1.0;        // one-sided Wilcoxon, base > ours
  double p_adjusted = 1.0;
  std::optional<double> cohens_d;
  double base_p95 = 0.0, ours_p95 = 0.0, p95_improvement = 0.0;
  double base_gini = 0.0, ours_gini = 0.0;
};

struct Decomposition {
  double a = 0.0;         // calibration alone: (base - cal_only) / base
  double b = 0.0;         // repositioning on top: (cal_only - ours) / cal_only
  double compound = 0.0;  // measured (base - ours) / base
  double predicted = 0.0; // 1 - (1 - a)(1 - b)
};

struct StatReport {
  StatOptions options;
  std::vector<ScenarioComparison> scenarios;
  double grand_base = 0.0;
  double grand_ours = 0.0;
  double grand_improvement = 0.0;
  Interval grand_ci;
  double grand_p95_improvement = 0.0;
  double mean_gini_base = 0.0;
  double mean_gini_ours = 0.0;
  std::optional<FriedmanResult> friedman;
  std::vector<std::string> friedman_methods;
  std::optional<Decomposition> decomposition;
  // policy -> scenario-averaged mean wait
  std::map<std::string, double> policy_mean_wait;
};

/// Pairs baseline and method runs by (scenario, seed). Scenarios missing
/// either side are skipped.
StatReport make_stat_report(const std::vector<RunRecord>& runs, const StatOptions& opt = {});

nlohmann::ordered_json to_json(const StatReport& r);
/// Text table: scenario, base, ours, improvement, CI, d, p.
std::string to_table(const StatReport& r);

nlohmann::ordered_json to_json(const SimResult& r);

}  // namespace rcd
