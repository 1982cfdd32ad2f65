#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "rcd/similarity.hpp"
#include "support.hpp"

using namespace rcd;

namespace {

// sup_x |F_a(x) - F_b(x)| evaluated at every observed value.
double ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double best = 0.0;
  for (double x : pts) {
    const double fa = std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; }) /
                      static_cast<double>(a.size());
    const double fb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; }) /
                      static_cast<double>(b.size());
    best = std::max(best, std::abs(fa - fb));
  }
  return best;
}

// Integral of |F_a - F_b| between consecutive pooled values.
double w1_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double x = pts[i];
    const double fa = std::count_if(a.begin(), a.end(), [&](double v) { return v <= x; }) /
                      static_cast<double>(a.size());
    const double fb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= x; }) /
                      static_cast<double>(b.size());
    area += std::abs(fa - fb) * (pts[i + 1] - x);
  }
  return area;
}

SurgeEvent event(int start, int dur, double peak, std::vector<double> pre = {10.0, 0.0}) {
  SurgeEvent e;
  e.start_bin = start;
  e.end_bin = start + dur;
  e.duration_bins = dur;
  e.peak_intensity = peak;
  e.pre_surge_features = std::move(pre);
  return e;
}

std::vector<SurgeEvent> random_events(Rng& rng) {
  std::vector<SurgeEvent> ev;
  const int n = static_cast<int>(rng.below(4));
  int t = 0;
  for (int i = 0; i < n; ++i) {
    t += 1 + static_cast<int>(rng.below(8));
    const int d = 1 + static_cast<int>(rng.below(4));
    ev.push_back(event(t, d, rng.uniform(3.0, 40.0), {rng.uniform(0, 50), rng.uniform(-5, 5)}));
    t += d;
  }
  return ev;
}

SummaryFeatures random_features(Rng& rng) {
  return compute_features(test::random_series(rng));
}

BlockMetadata random_meta(Rng& rng) {
  BlockMetadata m;
  m.month = 1 + static_cast<int>(rng.below(12));
  m.day_type = static_cast<DayType>(rng.below(3));
  m.hour_block = static_cast<int>(rng.below(6));
  return m;
}

RegimeBlock block(const std::string& id, std::vector<double> s, BlockMetadata m = {}) {
  return make_block(id, std::move(s), {}, m, IngestConfig{});
}

}  // namespace

TEST_CASE("weights: defaults, presets and validation") {
  SimilarityWeights w;
  CHECK(w.as_array() == std::array<double, 6>{0.20, 0.20, 0.15, 0.10, 0.20, 0.15});
  CHECK(w.sum() == doctest::Approx(1.0));
  const auto d = SimilarityWeights::preset("distributional_only");
  CHECK(d.ks == doctest::Approx(0.20 / 0.65));
  CHECK(d.w1 == doctest::Approx(0.20 / 0.65));
  CHECK(d.feat == doctest::Approx(0.15 / 0.65));
  CHECK(d.var == doctest::Approx(0.10 / 0.65));
  CHECK(d.event == 0.0);
  CHECK(d.temporal == 0.0);
  CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(SimilarityWeights::preset("nope"), Error);
  SimilarityWeights bad;
  bad.ks = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.var = -0.1;
  bad.ks = 0.4;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("sim_ks: examples and brute-force oracle") {
  CHECK(sim_ks(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
  CHECK(sim_ks(std::vector<double>(10, 0.0), std::vector<double>(10, 100.0)) == 0.0);
  CHECK(sim_ks(std::vector<double>{0, 0, 1, 1}, std::vector<double>{0, 1, 1, 1}) ==
        doctest::Approx(0.75));
  Rng rng(1);
  for (int it = 0; it < 500; ++it) {
    const auto a = test::random_series(rng, 1 + rng.below(48), 8);
    const auto b = test::random_series(rng, 1 + rng.below(48), 8);
    CHECK(ks_statistic(a, b) == doctest::Approx(ks_oracle(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("sim_w1: examples and brute-force oracle") {
  CHECK(sim_w1(std::vector<double>{4, 5}, std::vector<double>{4, 5}) == 1.0);
  CHECK(sim_w1(std::vector<double>(6, 0.0), std::vector<double>(6, 10.0)) == doctest::Approx(0.5));
  CHECK(sim_w1(std::vector<double>(6, 3.0), std::vector<double>(4, 3.0)) == 1.0);
  Rng rng(2);
  for (int it = 0; it < 500; ++it) {
    const auto a = test::random_series(rng, 1 + rng.below(48), 8);
    const auto b = test::random_series(rng, 1 + rng.below(48), 8);
    CHECK(wasserstein1(a, b) == doctest::Approx(w1_oracle(a, b)).epsilon(1e-9));
    double lo = a[0], hi = a[0];
    for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
    const double range = hi > lo ? hi - lo : 1.0;
    CHECK(sim_w1(a, b) == doctest::Approx(1.0 / (1.0 + w1_oracle(a, b) / range)).epsilon(1e-9));
  }
}

TEST_CASE("sim_feat, sim_var, sim_temporal: formula examples") {
  SummaryFeatures f;
  f.mean = 3;
  CHECK(sim_feat(f, f, FeatureScale::unit()) == 1.0);
  SummaryFeatures g = f;
  g.mean = 4;
  CHECK(sim_feat(f, g, FeatureScale::unit()) == doctest::Approx(0.5));
  g.mean = 6;
  CHECK(sim_feat(f, g, FeatureScale::unit()) == doctest::Approx(0.25));
  FeatureScale half = FeatureScale::unit();
  half.scale[0] = 3.0;  // z-scaling divides the difference
  CHECK(sim_feat(f, g, half) == doctest::Approx(0.5));

  CHECK(sim_var(2, 2) == 1.0);
  CHECK(sim_var(2, 4) == 0.5);
  CHECK(sim_var(0, 0) == 1.0);
  CHECK(sim_var(0, 3) == 0.0);

  BlockMetadata a{3, DayType::weekday, 2};
  CHECK(sim_temporal(a, a) == 1.0);
  CHECK(sim_temporal(a, {4, DayType::weekend, 1}) == 0.0);
  CHECK(sim_temporal(a, {4, DayType::weekday, 1}) == doctest::Approx(1.0 / 3));
  CHECK(sim_temporal(a, {3, DayType::weekday, 1}) == doctest::Approx(2.0 / 3));
}

TEST_CASE("sim_event: examples") {
  CHECK(sim_event({}, {}) == 1.0);
  const std::vector<SurgeEvent> one = {event(10, 2, 8.0)};
  CHECK(sim_event(one, one) == 1.0);
  const std::vector<SurgeEvent> two = {event(10, 2, 8.0), event(30, 2, 8.0)};
  CHECK(sim_event(one, two) == doctest::Approx(0.875));
  CHECK(sim_event(two, one) == doctest::Approx(0.875));
  // one side empty: every term is at its floor except the count ratio 0
  CHECK(sim_event(one, {}) >= 0.0);
  CHECK(sim_event(one, {}) <= 1.0);
}

TEST_CASE("sim_event: four equal-weight terms") {
  const std::vector<SurgeEvent> a = {event(5, 2, 10.0, {4, 0})};
  const std::vector<SurgeEvent> b = {event(9, 4, 13.0, {7, 4}), event(30, 1, 20.0)};
  // intensities {10} vs {13, 20}: W1 = (3 + 10) / 2
  const double ti = 1.0 / (1.0 + 6.5);
  // durations {2} vs {4, 1}: W1 = (2 + 1) / 2
  const double td = 1.0 / (1.0 + 1.5);
  // first events paired chronologically: |(4,0)-(7,4)| = 5
  const double tp = 1.0 / (1.0 + 5.0);
  const double tc = 0.5;
  CHECK(sim_event(a, b) == doctest::Approx(0.25 * (ti + td + tp + tc)).epsilon(1e-12));
}

TEST_CASE("metric suite: boundedness, reflexivity, symmetry") {
  Rng rng(4);
  const auto scale = FeatureScale::unit();
  double worst_event_asym = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const auto x = test::random_series(rng);
    const auto y = test::random_series(rng);
    const auto fx = compute_features(x), fy = compute_features(y);
    const auto ex = random_events(rng), ey = random_events(rng);
    const auto mx = random_meta(rng), my = random_meta(rng);
    const double s[] = {sim_ks(x, y),          sim_w1(x, y),     sim_feat(fx, fy, scale),
                        sim_var(fx.std, fy.std), sim_event(ex, ey), sim_temporal(mx, my)};
    for (double v : s) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(sim_ks(x, x) == 1.0);
    CHECK(sim_w1(x, x) == 1.0);
    CHECK(sim_feat(fx, fx, scale) == 1.0);
    CHECK(sim_var(fx.std, fx.std) == 1.0);
    CHECK(sim_event(ex, ex) == 1.0);
    CHECK(sim_temporal(mx, mx) == 1.0);

    CHECK(std::abs(sim_ks(x, y) - sim_ks(y, x)) <= 1e-12);
    CHECK(std::abs(sim_w1(x, y) - sim_w1(y, x)) <= 1e-12);
    CHECK(std::abs(sim_feat(fx, fy, scale) - sim_feat(fy, fx, scale)) <= 1e-12);
    CHECK(std::abs(sim_var(fx.std, fy.std) - sim_var(fy.std, fx.std)) <= 1e-12);
    CHECK(std::abs(sim_temporal(mx, my) - sim_temporal(my, mx)) <= 1e-12);
    worst_event_asym = std::max(worst_event_asym, std::abs(sim_event(ex, ey) - sim_event(ey, ex)));
  }
  CHECK(worst_event_asym <= 0.25);
}

TEST_CASE("gate_weights: redistribution rule and conservation") {
  const SimilarityWeights w;
  const auto g = gate_weights(w, true, false);
  CHECK(g.as_array()[0] == doctest::Approx(0.30));
  CHECK(g.as_array()[1] == doctest::Approx(0.30));
  CHECK(g.feat == doctest::Approx(0.15));
  CHECK(g.var == doctest::Approx(0.10));
  CHECK(g.event == 0.0);
  CHECK(g.temporal == doctest::Approx(0.15));
  CHECK(gate_weights(w, false, true) == g);
  CHECK(gate_weights(w, true, true) == w);
  CHECK(gate_weights(w, false, false) == w);

  Rng rng(8);
  for (int it = 0; it < 200; ++it) {
    std::array<double, 6> raw;
    double s = 0;
    for (auto& v : raw) s += (v = rng.uniform());
    SimilarityWeights r{raw[0] / s, raw[1] / s, raw[2] / s, raw[3] / s, raw[4] / s, raw[5] / s};
    const auto e = gate_weights(r, rng.uniform() < 0.5, rng.uniform() < 0.5);
    CHECK(e.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ensemble_score: reflexive, gated, convex") {
  std::vector<double> s(48, 10.0);
  s[20] = 90;
  const auto b = block("2024-01-04_08-12", s, {1, DayType::weekday, 2});
  REQUIRE(!b.events.empty());
  const auto qc = QueryContext::from_block(b);
  const auto self = ensemble_score(qc, b, {}, FeatureScale::unit());
  CHECK(self.total_score == doctest::Approx(1.0));

  const auto flat = block("2024-01-05_08-12", std::vector<double>(48, 10.0), {1, DayType::weekday, 2});
  REQUIRE(flat.events.empty());
  const auto m = ensemble_score(qc, flat, {}, FeatureScale::unit());
  CHECK(m.effective_weights.ks == doctest::Approx(0.30));
  CHECK(m.effective_weights.w1 == doctest::Approx(0.30));
  CHECK(m.effective_weights.event == 0.0);

  Rng rng(10);
  for (int it = 0; it < 200; ++it) {
    const auto q = block("q", test::random_series(rng), random_meta(rng));
    const auto r = block("r", test::random_series(rng), random_meta(rng));
    const auto res = ensemble_score(QueryContext::from_block(q), r, {}, FeatureScale::unit());
    double sum = 0.0;
    const auto ew = res.effective_weights.as_array();
    for (std::size_t i = 0; i < kMetricCount; ++i) {
      CHECK(res.components[i] >= 0.0);
      CHECK(res.components[i] <= 1.0);
      sum += ew[i] * res.components[i];
    }
    CHECK(res.total_score == doctest::Approx(sum).epsilon(1e-12));
    CHECK(res.total_score >= 0.0);
    CHECK(res.total_score <= 1.0 + 1e-12);
  }
}

TEST_CASE("ensemble_score: all components one half gives one half") {
  // convex combination with weights summing to one
  const SimilarityWeights w;
  double total = 0.0;
  for (double x : w.as_array()) total += x * 0.5;
  CHECK(total == doctest::Approx(0.5));
}

TEST_CASE("prefix mode compares only the observed bins") {
  std::vector<double> a(48, 5.0), b(48, 5.0);
  for (int t = 24; t < 48; ++t) b[t] = 50.0;  // differs only after the prefix
  RegimeLibrary lib;
  lib.records = {block("a", a), block("b", b)};
  const auto qc = QueryContext::from_prefix(std::span<const double>(a).first(12), {}, IngestConfig{});
  CHECK(qc.mode == MatchMode::prefix);
  CHECK(qc.series.size() == 12);
  const auto ma = ensemble_score(qc, lib.records[0], {}, FeatureScale::unit());
  const auto mb = ensemble_score(qc, lib.records[1], {}, FeatureScale::unit());
  CHECK(ma.total_score == doctest::Approx(mb.total_score).epsilon(1e-12));
  const auto full = QueryContext::from_block(lib.records[0]);
  CHECK(ensemble_score(full, lib.records[1], {}, FeatureScale::unit()).total_score <
        ma.total_score);
}

TEST_CASE("top_k: twin, truncation, ties, exclusion, errors") {
  Rng rng(14);
  RegimeLibrary lib;
  const auto q = test::random_series(rng);
  lib.records.push_back(block("c_twin", q));
  for (int i = 0; i < 6; ++i) lib.records.push_back(block("r" + std::to_string(i), test::random_series(rng)));
  std::sort(lib.records.begin(), lib.records.end(),
            [](const auto& a, const auto& b) { return a.block_id < b.block_id; });
  const auto qc = QueryContext::from_block(block("q", q));

  auto best = top_k(qc, lib, {}, 1);
  REQUIRE(best.size() == 1);
  CHECK(best[0].block_id == "c_twin");
  CHECK(best[0].total_score == doctest::Approx(1.0));

  CHECK(top_k(qc, lib, {}, 100).size() == lib.records.size());

  auto ex = top_k(qc, lib, {}, 100, {"c_twin"});
  CHECK(ex.size() == lib.records.size() - 1);
  for (const auto& m : ex) CHECK(m.block_id != "c_twin");
  for (std::size_t i = 1; i < ex.size(); ++i) CHECK(ex[i - 1].total_score >= ex[i].total_score);

  RegimeLibrary twins;
  twins.records = {block("a2", q), block("a1", q)};
  auto t = top_k(qc, twins, {}, 2);
  CHECK(t[0].block_id == "a1");
  CHECK(t[1].block_id == "a2");

  try {
    top_k(qc, twins, {}, 2, {"a1", "a2"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "no candidate regimes");
  }
}

TEST_CASE("library scan: parallel equals serial, repeated runs agree") {
  Rng rng(15);
  RegimeLibrary lib;
  for (int i = 0; i < 150; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "b%03d", i);
    lib.records.push_back(block(id, test::random_series(rng), random_meta(rng)));
  }
  const auto qc = QueryContext::from_block(block("q", test::random_series(rng), random_meta(rng)));
  const auto scale = FeatureScale::from_library(lib);
  const auto par = score_library(qc, lib, {}, scale, {"b007"});
  const auto ser = score_library_serial(qc, lib, {}, scale, {"b007"});
  REQUIRE(par.size() == ser.size());
  CHECK(par.size() == 149);
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].block_id == ser[i].block_id);
    CHECK(par[i].total_score == ser[i].total_score);
    CHECK(par[i].components == ser[i].components);
  }
  const auto a = top_k(qc, lib, {}, 10);
  const auto b = top_k(qc, lib, {}, 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].block_id == b[i].block_id);
    CHECK(a[i].total_score == b[i].total_score);
  }
}
