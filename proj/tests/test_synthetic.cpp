#include <algorithm>
#include <map>

#include "doctest.h"
#include "rcd/similarity.hpp"
#include "rcd/synthetic.hpp"
#include "support.hpp"

using namespace rcd;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("profiles: defaults validate, bad profiles are rejected") {
  for (const auto& p : default_profiles()) CHECK_NOTHROW(p.validate());
  CHECK(family_from_string("surge") == Family::surge);
  CHECK(to_string(Family::night) == "night");
  CHECK_THROWS_AS(family_from_string("dawn"), Error);
  auto bad = default_profile(Family::rush);
  bad.base_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = default_profile(Family::rush);
  bad.spatial[0].weight += 0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = default_profile(Family::rush);
  bad.background = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(generate_synthetic_library(default_profiles(), 0, 1), Error);
}

TEST_CASE("rush blocks peak above twice the off-peak median") {
  const auto lib = generate_synthetic_library({default_profile(Family::rush)}, 30, 7);
  REQUIRE(lib.records.size() == 30);
  for (const auto& b : lib.records) {
    CHECK(family_of(b) == Family::rush);
    std::vector<double> off;
    double peak = 0.0;
    for (std::size_t i = 0; i < b.demand_series.size(); ++i) {
      if (i >= 6 && i <= 18)
        peak = std::max(peak, b.demand_series[i]);
      else
        off.push_back(b.demand_series[i]);
    }
    CHECK(peak > 2.0 * median(off));
  }
}

TEST_CASE("synthetic library: metadata, determinism, conservation") {
  const auto one = generate_synthetic_library({default_profile(Family::surge)}, 3, 5);
  REQUIRE(one.records.size() == 3);
  for (const auto& b : one.records) {
    CHECK(b.metadata == one.records[0].metadata);
    CHECK(b.metadata.day_type == DayType::weekend);
  }

  const auto a = generate_synthetic_library(default_profiles(), 6, 7);
  const auto b = generate_synthetic_library(default_profiles(), 6, 7);
  CHECK(a.records == b.records);
  const auto c = generate_synthetic_library(default_profiles(), 6, 8);
  CHECK(a.records != c.records);
  CHECK(std::is_sorted(a.records.begin(), a.records.end(),
                       [](const RegimeBlock& x, const RegimeBlock& y) { return x.block_id < y.block_id; }));
  std::map<Family, int> per_family;
  for (const auto& r : a.records) {
    ++per_family[family_of(r)];
    double total = 0.0;
    for (double v : r.demand_series) total += v;
    CHECK(total == static_cast<double>(r.od_pool.size()));
    for (const auto& od : r.od_pool) {
      CHECK(kManhattanBox.contains(od.pickup));
      CHECK(kManhattanBox.contains(od.dropoff));
      const auto bin = static_cast<std::size_t>(od.offset_s / 300);
      REQUIRE(bin < r.demand_series.size());
    }
  }
  for (Family f : {Family::rush, Family::flat, Family::surge, Family::night}) CHECK(per_family[f] == 6);
}

TEST_CASE("within-family similarity exceeds cross-family similarity") {
  const auto lib = generate_synthetic_library(default_profiles(), 10, 7);
  const auto w = SimilarityWeights::preset("full");
  const auto scale = FeatureScale::from_library(lib);
  double within = 0.0, cross = 0.0;
  int nw = 0, nc = 0, top_hits = 0;
  for (const auto& q : lib.records) {
    const auto qc = QueryContext::from_block(q);
    const auto scores = score_library(qc, lib, w, scale, {q.block_id});
    std::map<std::string, const RegimeBlock*> by_id;
    for (const auto& r : lib.records) by_id[r.block_id] = &r;
    for (const auto& m : scores) {
      if (family_of(*by_id.at(m.block_id)) == family_of(q)) {
        within += m.total_score;
        ++nw;
      } else {
        cross += m.total_score;
        ++nc;
      }
    }
    const auto best = top_k(qc, lib, w, 1, {q.block_id});
    if (family_of(*by_id.at(best[0].block_id)) == family_of(q)) ++top_hits;
  }
  CHECK(within / nw > cross / nc);
  CHECK(top_hits == static_cast<int>(lib.records.size()));
}

TEST_CASE("family_shape: structure per family") {
  const auto rush = family_shape(default_profile(Family::rush), 48, 1);
  CHECK(*std::max_element(rush.begin(), rush.end()) == doctest::Approx(60.0 * 2.4).epsilon(1e-3));
  const auto flat = family_shape(default_profile(Family::flat), 48, 1);
  CHECK(std::all_of(flat.begin(), flat.end(), [](double v) { return v == 102.0; }));
  const auto night = family_shape(default_profile(Family::night), 48, 1);
  CHECK(night.back() / night.front() == doctest::Approx(1.5));
  double mean = 0.0;
  for (double v : night) mean += v / 48.0;
  CHECK(mean == doctest::Approx(27.0));
  const auto surge = family_shape(default_profile(Family::surge), 48, 1);
  CHECK(std::count(surge.begin(), surge.end(), 36.0 * 1.4) == 6);
}
