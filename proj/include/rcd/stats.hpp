#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rcd {

// -------------------------------------------------------------- ranking

/// 1-based ranks with ties assigned their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Spearman rank correlation (Pearson on average ranks). Two-sided p from
/// the t approximation for n >= 30; below that an exact permutation test
/// (n <= 8) or a seeded Monte Carlo permutation test.
Correlation spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------- descriptive

/// Linear interpolation between order statistics, q in [0, 1].
double percentile(std::span<const double> values, double q);
double percentile_sorted(std::span<const double> sorted, double q);

/// sum_ij |w_i - w_j| / (2 n^2 mean); 0 for n < 2 or zero mean.
double gini(std::span<const double> values);

double mean_of(std::span<const double> values);

// ------------------------------------------------------------ hypothesis

enum class Alternative { two_sided, greater, less };

/// Paired Wilcoxon signed-rank test on a - b. Zero differences are
/// dropped; exact null distribution (tie-aware) for n <= 20, normal
/// approximation with tie and continuity correction above. `greater`
/// tests a > b. Returns 1 when every difference is zero.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                            Alternative alt = Alternative::two_sided);

inline double wilcoxon_signed_rank(std::span<const double> a,
                                   std::span<const double> b, bool one_sided) {
  return wilcoxon_signed_rank(a, b,
                              one_sided ? Alternative::greater : Alternative::two_sided);
}

inline double bonferroni(double p, int comparisons) {
  const double adj = p * comparisons;
  return adj < 1.0 ? adj : 1.0;
}

struct FriedmanResult {
  double chi2 = 0.0;
  double p_value = 1.0;
  std::vector<double> mean_ranks;  // rank 1 = smallest value in a block
  double critical_difference = 0.0;
};

/// Friedman test over an n_blocks x k_methods matrix (row-major blocks),
/// followed by the Nemenyi critical difference at alpha = 0.05.
FriedmanResult friedman_nemenyi(const std::vector<std::vector<double>>& blocks);

/// Studentized-range based q_{0.05,k} / sqrt(2) for 2 <= k <= 10.
double nemenyi_q05(int k);

/// Cohen's d with the pooled (n-1 weighted) standard deviation; nullopt
/// when the pooled deviation is zero.
std::optional<double> cohens_d(std::span<const double> a, std::span<const double> b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// scenario -> per-seed values.
using HierarchicalSample = std::map<std::string, std::vector<double>>;

/// Percentile CI (2.5 / 97.5) of the grand mean under hierarchical
/// resampling: scenarios with replacement, then seeds within each.
/// Resamples run in parallel on per-resample seeded substreams.
Interval bootstrap_ci(const HierarchicalSample& sample, int n_resamples = 10000,
                      std::uint64_t seed = 42);
Interval bootstrap_ci_serial(const HierarchicalSample& sample,
                             int n_resamples = 10000, std::uint64_t seed = 42);

/// Grand mean: per-scenario means averaged over scenarios.
double grand_mean(const HierarchicalSample& sample);

}  // namespace rcd
