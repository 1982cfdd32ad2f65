#include "rcd/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "rcd/common.hpp"
#include "rcd/random.hpp"

namespace rcd {
namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("spearman: length mismatch");
  if (x.size() < 3) throw Error("spearman: need at least 3 observations");
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  Correlation c;
  c.rho = pearson(rx, ry);
  const std::size_t n = x.size();
  if (n >= 30) {
    if (std::fabs(c.rho) >= 1.0) {
      c.p_value = 0.0;
    } else {
      const double df = static_cast<double>(n) - 2.0;
      const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
      const boost::math::students_t dist(df);
      c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    }
    return c;
  }
  const double observed = std::fabs(c.rho) - 1e-12;
  if (n <= 8) {
    std::vector<double> perm = ry;
    std::sort(perm.begin(), perm.end());
    std::size_t hits = 0, total = 0;
    do {
      ++total;
      if (std::fabs(pearson(rx, perm)) >= observed) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // next_permutation skips duplicate arrangements of tied ranks, which
    // are equiprobable classes of equal size, so the ratio is unchanged.
    c.p_value = static_cast<double>(hits) / static_cast<double>(total);
  } else {
    constexpr int kPermutations = 20000;
    Rng rng(0x5eedULL);
    std::vector<double> perm = ry;
    int hits = 0;
    for (int k = 0; k < kPermutations; ++k) {
      for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.below(i + 1)]);
      if (std::fabs(pearson(rx, perm)) >= observed) ++hits;
    }
    c.p_value = (hits + 1.0) / (kPermutations + 1.0);
  }
  return c;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double percentile_sorted(std::span<const double> s, double q) {
  if (s.empty()) return 0.0;
  const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

double percentile(std::span<const double> values, double q) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return percentile_sorted(s, q);
}

double gini(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double mean = mean_of(s);
  if (mean <= 0.0) return 0.0;
  // sum_ij |s_i - s_j| = 2 * sum_i (2i - n + 1) s_i over sorted values.
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += (2.0 * static_cast<double>(i) - static_cast<double>(n) + 1.0) * s[i];
  const double nn = static_cast<double>(n);
  return 2.0 * acc / (2.0 * nn * nn * mean);
}

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                            Alternative alt) {
  if (a.size() != b.size() || a.empty())
    throw Error("wilcoxon: samples must be paired and non-empty");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diffs.push_back(a[i] - b[i]);
  const std::size_t n = diffs.size();
  if (n == 0) return 1.0;

  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::fabs(diffs[i]);
  const auto ranks = average_ranks(mags);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0.0) w_plus += ranks[i];

  double p_ge = 0.0, p_le = 0.0;
  if (n <= 20) {
    // Doubled ranks are integers even with ties, so the null distribution
    // of 2W+ is a subset-sum count.
    std::vector<int> r2(n);
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += r2[i];
    }
    std::vector<double> count(total + 1, 0.0);
    count[0] = 1.0;
    for (int r : r2)
      for (int s = total; s >= r; --s) count[s] += count[s - r];
    const double all = std::ldexp(1.0, static_cast<int>(n));
    const int obs = static_cast<int>(std::lround(2.0 * w_plus));
    for (int s = 0; s <= total; ++s) {
      if (s >= obs) p_ge += count[s];
      if (s <= obs) p_le += count[s];
    }
    p_ge /= all;
    p_le /= all;
  } else {
    const double nn = static_cast<double>(n);
    double tie_term = 0.0;
    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double mu = nn * (nn + 1.0) / 4.0;
    const double sigma =
        std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0);
    p_ge = 1.0 - normal_cdf((w_plus - mu - 0.5) / sigma);
    p_le = normal_cdf((w_plus - mu + 0.5) / sigma);
  }
  switch (alt) {
    case Alternative::greater: return std::min(1.0, p_ge);
    case Alternative::less: return std::min(1.0, p_le);
    case Alternative::two_sided: break;
  }
  return std::min(1.0, 2.0 * std::min(p_ge, p_le));
}

double nemenyi_q05(int k) {
  static constexpr double kTable[] = {1.960, 2.343, 2.569, 2.728, 2.850,
                                      2.949, 3.031, 3.102, 3.164};
  if (k < 2 || k > 10) throw Error("nemenyi: k must be in [2, 10]");
  return kTable[k - 2];
}

FriedmanResult friedman_nemenyi(const std::vector<std::vector<double>>& blocks) {
  const std::size_t n = blocks.size();
  if (n < 2) throw Error("friedman: need at least 2 blocks");
  const std::size_t k = blocks.front().size();
  if (k < 3) throw Error("friedman: need at least 3 methods");
  FriedmanResult res;
  res.mean_ranks.assign(k, 0.0);
  for (const auto& row : blocks) {
    if (row.size() != k) throw Error("friedman: ragged block matrix");
    const auto r = average_ranks(row);
    for (std::size_t j = 0; j < k; ++j) res.mean_ranks[j] += r[j];
  }
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  double ss = 0.0;
  for (auto& r : res.mean_ranks) {
    r /= nn;
    ss += (r - (kk + 1.0) / 2.0) * (r - (kk + 1.0) / 2.0);
  }
  res.chi2 = 12.0 * nn / (kk * (kk + 1.0)) * ss;
  res.p_value = res.chi2 > 0.0 ? boost::math::gamma_q((kk - 1.0) / 2.0, res.chi2 / 2.0)
                               : 1.0;
  res.critical_difference =
      nemenyi_q05(static_cast<int>(k)) * std::sqrt(kk * (kk + 1.0) / (6.0 * nn));
  return res;
}

std::optional<double> cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("cohens_d: need >= 2 samples per group");
  const double ma = mean_of(a), mb = mean_of(b);
  double va = 0.0, vb = 0.0;
  for (double x : a) va += (x - ma) * (x - ma);
  for (double x : b) vb += (x - mb) * (x - mb);
  const double dof = static_cast<double>(a.size() + b.size() - 2);
  const double pooled = std::sqrt((va + vb) / dof);
  if (pooled <= 0.0) return std::nullopt;
  return (ma - mb) / pooled;
}

double grand_mean(const HierarchicalSample& sample) {
  if (sample.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& [name, values] : sample) acc += mean_of(values);
  return acc / static_cast<double>(sample.size());
}

namespace {

double one_resample(const std::vector<const std::vector<double>*>& groups,
                    std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t s = groups.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    const auto& g = *groups[rng.below(s)];
    double inner = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) inner += g[rng.below(g.size())];
    acc += inner / static_cast<double>(g.size());
  }
  return acc / static_cast<double>(s);
}

std::vector<const std::vector<double>*> bootstrap_groups(const HierarchicalSample& sample) {
  std::vector<const std::vector<double>*> groups;
  for (const auto& [name, values] : sample) {
    if (values.empty()) throw Error("bootstrap: scenario '" + name + "' has no seeds");
    groups.push_back(&values);
  }
  if (groups.empty()) throw Error("bootstrap: need at least one scenario");
  return groups;
}

Interval percentile_interval(std::vector<double>& means) {
  std::sort(means.begin(), means.end());
  return {percentile_sorted(means, 0.025), percentile_sorted(means, 0.975)};
}

}  // namespace

Interval bootstrap_ci_serial(const HierarchicalSample& sample, int n_resamples,
                             std::uint64_t seed) {
  const auto groups = bootstrap_groups(sample);
  std::vector<double> means(static_cast<std::size_t>(std::max(n_resamples, 1)));
  for (std::size_t r = 0; r < means.size(); ++r)
    means[r] = one_resample(groups, substream_seed(seed, r));
  return percentile_interval(means);
}

Interval bootstrap_ci(const HierarchicalSample& sample, int n_resamples,
                      std::uint64_t seed) {
  const auto groups = bootstrap_groups(sample);
  std::vector<double> means(static_cast<std::size_t>(std::max(n_resamples, 1)));
  const auto n = static_cast<std::ptrdiff_t>(means.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r)
    means[r] = one_resample(groups, substream_seed(seed, static_cast<std::uint64_t>(r)));
  return percentile_interval(means);
}

}  // namespace rcd
