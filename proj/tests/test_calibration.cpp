#include <cmath>
#include <numeric>

#include "doctest.h"
#include "rcd/calibration.hpp"
#include "rcd/stats.hpp"
#include "support.hpp"

using namespace rcd;

namespace {

RegimeBlock block(const std::string& id, std::vector<double> s, std::size_t pool = 3) {
  std::vector<OdPair> od;
  for (std::size_t i = 0; i < pool; ++i)
    od.push_back({{40.75 + 0.001 * i, -73.98}, {40.76, -73.97 - 0.001 * i}, 0});
  return make_block(id, std::move(s), std::move(od), {}, IngestConfig{});
}

MatchResult match(const std::string& id, double score) {
  MatchResult m;
  m.block_id = id;
  m.total_score = score;
  return m;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("build_prior: single source is the rescaled series") {
  RegimeLibrary lib;
  std::vector<double> s(48);
  for (int t = 0; t < 48; ++t) s[t] = 1 + t % 5;
  lib.records = {block("a", s)};
  const std::vector<MatchResult> m = {match("a", 0.7)};
  const auto p = build_prior(m, lib, 500.0);
  CHECK(sum(p.rate_profile) == doctest::Approx(500.0).epsilon(1e-12));
  for (int t = 0; t < 48; ++t) CHECK(p.rate_profile[t] == doctest::Approx(s[t] * 500.0 / sum(s)));
  CHECK(p.weights == std::vector<double>{1.0});
  CHECK(p.source_ids == std::vector<std::string>{"a"});
}

TEST_CASE("build_prior: weighted average before volume matching") {
  RegimeLibrary lib;
  lib.records = {block("a", std::vector<double>(48, 10.0)), block("b", std::vector<double>(48, 20.0))};
  const std::vector<MatchResult> m = {match("a", 0.6), match("b", 0.4)};
  // target equal to the raw weighted sum leaves the profile unscaled
  const auto p = build_prior(m, lib, 14.0 * 48);
  for (double v : p.rate_profile) CHECK(v == doctest::Approx(14.0));
  CHECK(p.weights[0] == doctest::Approx(0.6));
  CHECK(p.weights[1] == doctest::Approx(0.4));
  CHECK(p.od_pool.size() == 6);
  CHECK(p.source_offsets == std::vector<std::size_t>{0, 3, 6});

  const std::vector<MatchResult> eq = {match("a", 0.5), match("b", 0.5)};
  const auto u = build_prior(eq, lib, 15.0 * 48);
  for (double v : u.rate_profile) CHECK(v == doctest::Approx(15.0));

  const std::vector<MatchResult> zero = {match("a", 0.0), match("b", 0.0)};
  const auto z = build_prior(zero, lib, 15.0 * 48);
  CHECK(z.weights[0] == doctest::Approx(0.5));
  CHECK(z.weights[1] == doctest::Approx(0.5));

  // zero-score matches are dropped when others are positive
  const std::vector<MatchResult> mixed = {match("a", 0.8), match("b", 0.0)};
  const auto mx = build_prior(mixed, lib, 100.0);
  CHECK(mx.source_ids == std::vector<std::string>{"a"});
}

TEST_CASE("build_prior: errors") {
  RegimeLibrary lib;
  lib.records = {block("a", std::vector<double>(48, 1.0)), block("e", std::vector<double>(48, 1.0), 0)};
  const std::vector<MatchResult> m = {match("a", 1.0)};
  CHECK_THROWS_AS(build_prior(m, lib, -1.0), Error);
  const std::vector<MatchResult> empty = {match("e", 1.0)};
  CHECK_THROWS_AS(build_prior(empty, lib, 10.0), Error);
  const std::vector<MatchResult> none;
  CHECK_THROWS_AS(build_prior(none, lib, 10.0), Error);
  const std::vector<MatchResult> missing = {match("zz", 1.0)};
  CHECK_THROWS_AS(build_prior(missing, lib, 10.0), Error);
}

TEST_CASE("build_prior: invariants on random inputs") {
  Rng rng(21);
  for (int it = 0; it < 200; ++it) {
    RegimeLibrary lib;
    std::vector<MatchResult> m;
    const int k = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < k; ++i) {
      const std::string id = "b" + std::to_string(i);
      lib.records.push_back(block(id, test::random_series(rng), 1 + rng.below(5)));
      m.push_back(match(id, rng.uniform(0.01, 1.0)));
    }
    const double target = rng.uniform(0.0, 5000.0);
    const auto p = build_prior(m, lib, target);
    double asum = 0;
    for (double a : p.weights) asum += a;
    CHECK(asum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m.size(); ++j)
        if (m[i].total_score > m[j].total_score) CHECK(p.weights[i] >= p.weights[j]);
    if (sum(p.rate_profile) > 0 || target == 0)
      CHECK(sum(p.rate_profile) == doctest::Approx(target).epsilon(1e-9));
    for (double v : p.rate_profile) CHECK(v >= 0.0);
    double pp = 0;
    for (std::size_t i = 0; i < p.od_pool.size(); ++i) pp += p.pair_probability(i);
    CHECK(pp == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pair probabilities follow the sampling mode") {
  RegimeLibrary lib;
  lib.records = {block("a", std::vector<double>(48, 1.0), 1), block("b", std::vector<double>(48, 1.0), 3)};
  const std::vector<MatchResult> m = {match("a", 0.75), match("b", 0.25)};
  const auto sw = build_prior(m, lib, 48.0);
  CHECK(sw.pair_probability(0) == doctest::Approx(0.75));
  CHECK(sw.pair_probability(1) == doctest::Approx(0.25 / 3));
  const auto up = build_prior(m, lib, 48.0, OdSampling::uniform_pool);
  for (std::size_t i = 0; i < 4; ++i) CHECK(up.pair_probability(i) == doctest::Approx(0.25));
}

TEST_CASE("sample_requests: zero rate, determinism, bins") {
  RegimeLibrary lib;
  std::vector<double> s(48, 0.0);
  for (int t = 10; t < 20; ++t) s[t] = 6.0;
  lib.records = {block("a", s)};
  const std::vector<MatchResult> m = {match("a", 1.0)};
  auto p = build_prior(m, lib, 60.0);

  const auto a = sample_requests(p, 99);
  const auto b = sample_requests(p, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].time_s == b[i].time_s);
    CHECK(a[i].pickup == b[i].pickup);
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].time_s >= 10 * 300);
    CHECK(a[i].time_s < 20 * 300);
    if (i) CHECK(a[i - 1].time_s <= a[i].time_s);
  }

  std::fill(p.rate_profile.begin(), p.rate_profile.end(), 0.0);
  CHECK(sample_requests(p, 1).empty());
}

TEST_CASE("sample_requests: Poisson volume over 1000 seeds") {
  RegimeLibrary lib;
  lib.records = {block("a", std::vector<double>(48, 4.0))};
  const std::vector<MatchResult> m = {match("a", 1.0)};
  const auto p = build_prior(m, lib, 192.0);
  double total = 0;
  const int runs = 1000;
  for (int seed = 0; seed < runs; ++seed) total += static_cast<double>(sample_requests(p, seed).size());
  const double mean = total / runs;
  CHECK(std::abs(mean - 192.0) <= 3.0 * std::sqrt(192.0 / runs));
}

TEST_CASE("sample_requests: OD draws follow source weights") {
  RegimeLibrary lib;
  lib.records = {block("a", std::vector<double>(48, 1.0), 1), block("b", std::vector<double>(48, 1.0), 1)};
  lib.records[1].od_pool[0].pickup = {40.80, -73.95};
  const std::vector<MatchResult> m = {match("a", 0.8), match("b", 0.2)};
  const auto p = build_prior(m, lib, 48.0 * 50);
  const auto rs = sample_requests(p, 5);
  double from_b = 0;
  for (const auto& r : rs) from_b += r.pickup == LatLon{40.80, -73.95};
  const double n = static_cast<double>(rs.size());
  CHECK(std::abs(from_b / n - 0.2) <= 4.0 * std::sqrt(0.2 * 0.8 / n));
}

TEST_CASE("calibration_error") {
  const std::vector<double> a(48, 3.0);
  CHECK(calibration_error(a, a) == 0.0);
  std::vector<double> b = a;
  b[0] += 3;
  b[1] += 4;
  CHECK(calibration_error(b, a) == doctest::Approx(5.0));
  CHECK_THROWS_AS(calibration_error(a, std::vector<double>(47, 0.0)), Error);
  Rng rng(30);
  for (int it = 0; it < 100; ++it) {
    const auto x = test::random_values(rng, 48, 0, 100), y = test::random_values(rng, 48, 0, 100);
    double ss = 0;
    for (int t = 0; t < 48; ++t) ss += (x[t] - y[t]) * (x[t] - y[t]);
    CHECK(calibration_error(x, y) == doctest::Approx(std::sqrt(ss)).epsilon(1e-12));
  }
}

TEST_CASE("weighted prior never does worse than the weighted error, nor the mean error") {
  Rng rng(31);
  for (int it = 0; it < 500; ++it) {
    const int k = 5;
    std::vector<double> truth = test::random_values(rng, 48, 50, 100);
    std::vector<double> eps(k);
    for (auto& e : eps) e = rng.uniform(0.5, 10.0);
    std::sort(eps.begin(), eps.end());
    RegimeLibrary lib;
    std::vector<MatchResult> m;
    for (int i = 0; i < k; ++i) {
      auto dir = test::random_values(rng, 48, -1, 1);
      double nrm = 0;
      for (double v : dir) nrm += v * v;
      nrm = std::sqrt(nrm);
      std::vector<double> s(48);
      for (int t = 0; t < 48; ++t) s[t] = truth[t] + eps[i] * dir[t] / nrm;
      lib.records.push_back(block("b" + std::to_string(i), s));
      // consistent ranking: smaller error, higher score
      m.push_back(match("b" + std::to_string(i), 1.0 - 0.1 * i - 0.01 * rng.uniform()));
    }
    double s_sum = 0;
    for (const auto& x : m) s_sum += x.total_score;
    double raw = 0, weighted_eps = 0;
    for (int i = 0; i < k; ++i) {
      const double a = m[i].total_score / s_sum;
      raw += a * sum(lib.records[i].demand_series);
      weighted_eps += a * eps[i];
    }
    const auto p = build_prior(m, lib, raw);
    const double err = l2(p.rate_profile, truth);
    const double mean_eps = sum(eps) / k;
    CHECK(err <= weighted_eps + 1e-9);
    CHECK(weighted_eps <= mean_eps + 1e-12);
  }
}

TEST_CASE("the bound is tight when every source has the same error along one direction") {
  Rng rng(32);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> truth = test::random_values(rng, 48, 50, 100);
    auto dir = test::random_values(rng, 48, -1, 1);
    double nrm = 0;
    for (double v : dir) nrm += v * v;
    nrm = std::sqrt(nrm);
    const double eps = rng.uniform(1, 10);
    RegimeLibrary lib;
    std::vector<MatchResult> m;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> s(48);
      for (int t = 0; t < 48; ++t) s[t] = truth[t] + eps * dir[t] / nrm;
      lib.records.push_back(block("b" + std::to_string(i), s));
      m.push_back(match("b" + std::to_string(i), rng.uniform(0.1, 1.0)));
    }
    const auto p = build_prior(m, lib, sum(lib.records[0].demand_series));
    CHECK(l2(p.rate_profile, truth) == doctest::Approx(eps).epsilon(1e-9));
  }
}

TEST_CASE("consistency_check: parallel equals serial; small libraries are rejected") {
  Rng rng(33);
  RegimeLibrary lib;
  for (int i = 0; i < 40; ++i)
    lib.records.push_back(block("b" + std::to_string(100 + i), test::random_series(rng)));
  const auto& truth = lib.records[3];
  const auto a = consistency_check(lib, truth, {}, "x");
  const auto b = consistency_check_serial(lib, truth, {}, "x");
  CHECK(a.n_records == 39);
  CHECK(a.rho == b.rho);
  CHECK(a.p_value == b.p_value);
  CHECK(a.similarities == b.similarities);
  CHECK(a.errors == b.errors);
  CHECK(a.rho >= -1.0);
  CHECK(a.rho <= 1.0);
  // errors are the raw profile distances to the truth block
  std::size_t j = 0;
  for (const auto& r : lib.records) {
    if (r.block_id == truth.block_id) continue;
    CHECK(a.errors[j++] == doctest::Approx(calibration_error(r.demand_series, truth.demand_series)));
  }
  const auto spearman_rho = spearman(a.similarities, [&] {
    std::vector<double> neg;
    for (double e : a.errors) neg.push_back(-e);
    return neg;
  }()).rho;
  CHECK(a.rho == doctest::Approx(spearman_rho));

  RegimeLibrary tiny;
  tiny.records = {block("a", test::random_series(rng)), block("b", test::random_series(rng)),
                  block("c", test::random_series(rng))};
  CHECK_THROWS_AS(consistency_check(tiny, tiny.records[0], {}), Error);

  const std::vector<ConsistencyReport> reps = {a};
  const auto csv = consistency_csv(reps);
  CHECK(csv.rfind("scenario,n,rho,p_value,top5_error_ratio\n", 0) == 0);
}
