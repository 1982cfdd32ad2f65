#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rcd/experiments.hpp"
#include "support.hpp"

using namespace rcd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents, for every file below `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

// Two short scenarios, two policies, three seeds.
json small_config() {
  return json::parse(R"({
    "name": "small",
    "policies": ["replay_batch", "cal_lp"],
    "seeds": [1, 2, 3],
    "sim": {"horizon_s": 3600},
    "synthetic": {"seed": 7, "blocks_per_profile": 6},
    "stats": {"bootstrap_resamples": 500},
    "scenarios": [
      {"name": "r", "source": {"kind": "synthetic", "family": "rush", "index": 2}},
      {"name": "n", "source": {"kind": "synthetic", "family": "night", "index": 1},
       "overrides": {"sim": {"batch_window_s": 90}, "top_k": 3}}
    ]
  })");
}

}  // namespace

TEST_CASE("parse_experiment: defaults, overrides and strict keys") {
  const auto spec = parse_experiment(small_config());
  CHECK(spec.name == "small");
  CHECK(spec.policies == std::vector<Policy>{Policy::replay_batch, Policy::cal_lp});
  CHECK(spec.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(spec.sim.horizon_s == 3600);
  CHECK(spec.sim.batch_window_s == 60);
  CHECK(spec.top_k == 5);
  REQUIRE(spec.scenarios.size() == 2);
  CHECK(spec.scenarios[1].source.family == Family::night);

  const auto defaults = parse_experiment(json::object());
  CHECK(defaults.seeds == kMainSeeds);
  CHECK(defaults.policies.size() == 5);
  CHECK(defaults.sim.step_s == 30);
  CHECK(defaults.sim.lp.move_fraction == 0.5);

  auto bad = small_config();
  bad["sedes"] = json::array({1});
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["sim"]["horizon"] = 10;
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["scenarios"][0]["overrides"] = {{"lp", {{"move_frac", 0.2}}}};
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["scenarios"][1]["name"] = "r";
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["scenarios"][1]["name"] = "a/b";
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["policies"] = json::array({"best"});
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["sim"]["batch_window_s"] = 45;
  CHECK_THROWS_AS(parse_experiment(bad), Error);
  bad = small_config();
  bad["scenarios"][0]["overrides"] = {{"sim", {{"fleet_scale", -1}}}};
  CHECK_THROWS_AS(parse_experiment(bad), Error);
}

TEST_CASE("config hash: stable, sensitive, round-trips through JSON") {
  const auto spec = parse_experiment(small_config());
  CHECK(config_hash(spec) == config_hash(parse_experiment(small_config())));
  CHECK(config_hash(parse_experiment(json::parse(to_json(spec).dump()))) == config_hash(spec));
  CHECK(config_hash(spec).size() == 64);
  auto changed = small_config();
  changed["sim"]["max_wait_s"] = 300;
  CHECK(config_hash(parse_experiment(changed)) != config_hash(spec));
  changed = small_config();
  changed["scenarios"][0]["source"]["index"] = 3;
  CHECK(config_hash(parse_experiment(changed)) != config_hash(spec));
}

TEST_CASE("suite_spec: six scenarios over four families") {
  const auto s = suite_spec();
  REQUIRE(s.scenarios.size() == 6);
  CHECK(s.seeds == std::vector<std::uint64_t>{42, 142, 242});
  std::set<std::string> names;
  std::map<Family, int> fam;
  for (const auto& sc : s.scenarios) {
    names.insert(sc.name);
    ++fam[sc.source.family];
  }
  CHECK(names.size() == 6);
  CHECK(fam.size() == 4);
}

TEST_CASE("prepare: truth block excluded, prior volume matched") {
  const auto spec = parse_experiment(small_config());
  const auto prepared = prepare(spec);
  REQUIRE(prepared.size() == 2);
  for (const auto& p : prepared) {
    double volume = 0.0;
    for (double v : p.prior.rate_profile) volume += v;
    CHECK(volume == doctest::Approx(static_cast<double>(p.demand.size())));
    for (const auto& id : p.prior.source_ids) CHECK(id != p.truth_block);
  }
  CHECK(prepared[0].prior.source_ids.size() == 5);
  CHECK(prepared[1].prior.source_ids.size() == 3);
  CHECK(prepared[1].sim.batch_window_s == 90);
  CHECK(prepared[0].sim.batch_window_s == 60);
}

TEST_CASE("run_experiment: layout, manifest, determinism") {
  rcd::test::TempDir a("exp_a"), b("exp_b");
  const auto spec = parse_experiment(small_config());
  const auto out = run_experiment(spec, a.path);
  CHECK(out.failures.empty());
  CHECK(out.runs.size() == 12);
  int cells = 0;
  for (const auto& sc : {"r", "n"})
    for (const auto& pol : {"replay_batch", "cal_lp"})
      for (int seed : {1, 2, 3}) {
        const auto f = a.path / "small" / sc / pol / (std::to_string(seed) + ".json");
        REQUIRE(fs::exists(f));
        CHECK(fs::exists(fs::path(f).replace_extension(".jsonl")));
        const auto cell = json::parse(slurp(f));
        CHECK(cell["scenario"] == sc);
        CHECK(cell["policy"] == pol);
        CHECK(cell["seed"] == seed);
        ++cells;
      }
  CHECK(cells == 12);
  for (const char* f : {"aggregate.csv", "stats.json", "stats.txt", "manifest.json"})
    CHECK(fs::exists(a.path / "small" / f));

  const auto manifest = json::parse(slurp(a.path / "small" / "manifest.json"));
  CHECK(manifest["config_sha256"] == config_hash(spec));
  CHECK(manifest["n_cells"] == 12);
  CHECK(manifest["n_failed"] == 0);
  CHECK(manifest["scenarios"].size() == 2);
  CHECK(manifest["outputs"].contains("aggregate.csv"));
  CHECK(manifest.contains("git_revision"));

  // serial rerun into a fresh directory is byte-identical
  const auto again = run_experiment(spec, b.path, false);
  CHECK(again.manifest_sha256 == out.manifest_sha256);
  CHECK(tree(a.path) == tree(b.path));

  // rerun in place also reproduces the manifest
  CHECK(run_experiment(spec, a.path).manifest_sha256 == out.manifest_sha256);
}

TEST_CASE("run_experiment: empty scenario list gives an empty manifest") {
  rcd::test::TempDir d("exp_empty");
  auto cfg = small_config();
  cfg["scenarios"] = json::array();
  const auto out = run_experiment(parse_experiment(cfg), d.path);
  CHECK(out.runs.empty());
  const auto manifest = json::parse(slurp(d.path / "small" / "manifest.json"));
  CHECK(manifest["n_cells"] == 0);
  CHECK(manifest["scenarios"].empty());
}

TEST_CASE("aggregate csv round trip") {
  rcd::test::TempDir d("exp_csv");
  auto cfg = small_config();
  cfg["scenarios"].erase(1);
  cfg["write_traces"] = false;
  const auto out = run_experiment(parse_experiment(cfg), d.path);
  const std::string csv = slurp(d.path / "small" / "aggregate.csv");
  CHECK(csv == aggregate_csv(out.runs));
  const auto back = parse_aggregate_csv(csv);
  REQUIRE(back.size() == out.runs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].scenario == out.runs[i].scenario);
    CHECK(back[i].policy == out.runs[i].policy);
    CHECK(back[i].seed == out.runs[i].seed);
    CHECK(back[i].result.n_completed == out.runs[i].result.n_completed);
    CHECK(back[i].result.mean == doctest::Approx(out.runs[i].result.mean).epsilon(1e-6));
  }
  CHECK(aggregate_csv(back) == csv);
  CHECK(!fs::exists(d.path / "small" / "r" / "cal_lp" / "1.jsonl"));
  CHECK_THROWS_AS(parse_aggregate_csv("scenario,policy\nx,y\n"), Error);
}

TEST_CASE("cli overrides take precedence over the file") {
  auto spec = parse_experiment(small_config());
  CliOverrides o;
  o.seeds = std::vector<std::uint64_t>{9};
  o.policies = std::vector<Policy>{Policy::cal_only};
  o.batch_window_s = 120;
  o.fleet_scale = 2.0;
  o.top_k = 2;
  apply_cli_overrides(spec, o);
  CHECK(spec.seeds == std::vector<std::uint64_t>{9});
  CHECK(spec.sim.batch_window_s == 120);
  const auto prepared = prepare(spec);
  for (const auto& p : prepared) {
    CHECK(p.seeds == std::vector<std::uint64_t>{9});
    CHECK(p.policies == std::vector<Policy>{Policy::cal_only});
    CHECK(p.sim.batch_window_s == 120);  // beats the scenario's own 90
    CHECK(p.sim.fleet_scale == 2.0);
    CHECK(p.prior.source_ids.size() == 2);
  }
  CliOverrides bad;
  bad.batch_window_s = 45;
  CHECK_THROWS_AS(apply_cli_overrides(spec, bad), Error);
}

TEST_CASE("ablation: axis values, labels and long csv") {
  CHECK(ablation_axis_from_string("top_k") == AblationAxis::top_k);
  CHECK_THROWS_AS(ablation_axis_from_string("speed"), Error);
  CHECK(default_ablation_values(AblationAxis::batch_window_s).size() == 4);
  CHECK(default_ablation_values(AblationAxis::move_fraction_lookahead).size() == 12);
  CHECK(default_ablation_values(AblationAxis::fleet_scale) ==
        std::vector<json>{0.5, 1.0, 2.0});

  const auto spec = parse_experiment(small_config());
  CHECK(with_axis_value(spec, AblationAxis::fleet_scale, 2.0).sim.fleet_scale == 2.0);
  const auto lp = with_axis_value(spec, AblationAxis::move_fraction_lookahead, json::array({0.25, 10}));
  CHECK(lp.sim.lp.move_fraction == 0.25);
  CHECK(lp.sim.lp.lookahead_min == 10.0);
  CHECK(with_axis_value(spec, AblationAxis::weights_preset, "distributional_only").weights_preset ==
        "distributional_only");
  CHECK_THROWS_AS(with_axis_value(spec, AblationAxis::top_k, "many"), Error);

  rcd::test::TempDir d("exp_ablate");
  auto cfg = small_config();
  cfg["write_traces"] = false;
  const auto ab = run_ablation(parse_experiment(cfg), {AblationAxis::top_k, {1, 3}}, d.path);
  CHECK(ab.runs.size() == 2);
  CHECK(fs::exists(d.path / "small" / "ablation_top_k" / "1" / "manifest.json"));
  CHECK(fs::exists(d.path / "small" / "ablation_top_k" / "3" / "manifest.json"));
  const std::string csv = slurp(ab.csv);
  std::istringstream lines(csv);
  std::string header, line;
  std::getline(lines, header);
  CHECK(header ==
        "axis,value,scenario,policy,n_seeds,mean_wait_s,p95_wait_s,gini,completion_rate,"
        "improvement_vs_baseline");
  int rows = 0;
  while (std::getline(lines, line)) {
    CHECK(line.rfind("top_k,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 2 * 2 * 2);  // values x scenarios x policies
}
