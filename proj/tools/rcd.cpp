// rcd: command-line front end for the dispatch pipeline.
//
// Settings resolve as flags > --config file > built-in defaults.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcd/calibration.hpp"
#include "rcd/experiments.hpp"
#include "rcd/io_util.hpp"
#include "rcd/random.hpp"
#include "rcd/synthetic.hpp"

using namespace rcd;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct GridFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> policies;
  double fleet_scale = 0.0;
  std::string router;
  std::string osrm_url;
  int top_k = 0;
  int batch_window = 0;
  std::string out = "results";

  void add(CLI::App* app) {
    app->add_option("--config", config, "Experiment file (JSON); default is the desk-scale suite");
    app->add_option("--seed", seed, "Single seed (replaces the seed list)");
    app->add_option("--seeds", seeds, "Seed list, e.g. 42,142,242")->delimiter(',');
    app->add_option("--policy", policies, "Policy name(s), comma separated")->delimiter(',');
    app->add_option("--fleet-scale", fleet_scale, "Fleet multiplier");
    app->add_option("--router", router, "haversine, scaled or osrm")
        ->check(CLI::IsMember({"haversine", "scaled", "osrm"}));
    app->add_option("--osrm-url", osrm_url, "OSRM base URL");
    app->add_option("--top-k", top_k, "Number of matched regimes");
    app->add_option("--batch-window", batch_window, "Batch window in seconds");
    app->add_option("--out", out, "Output root directory");
  }

  ExperimentSpec spec(CLI::App* app) const {
    ExperimentSpec s = config.empty() ? suite_spec() : load_experiment(config);
    CliOverrides o;
    if (app->count("--seed")) o.seeds = std::vector<std::uint64_t>{seed};
    if (app->count("--seeds")) o.seeds = seeds;
    if (app->count("--policy")) {
      std::vector<Policy> ps;
      for (const auto& p : policies) ps.push_back(policy_from_string(p));
      o.policies = ps;
    }
    if (app->count("--fleet-scale")) o.fleet_scale = fleet_scale;
    if (app->count("--router")) o.router = router_kind_from_string(router);
    if (app->count("--osrm-url")) o.osrm_url = osrm_url;
    if (app->count("--top-k")) o.top_k = top_k;
    if (app->count("--batch-window")) o.batch_window_s = batch_window;
    apply_cli_overrides(s, o);
    return s;
  }
};

std::vector<TripRecord> read_trips(const std::string& path, const std::string& format,
                                   const std::string& zones, const BoundingBox& bbox,
                                   IngestSummary& summary) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  if (!zones.empty()) {
    std::ifstream zin(zones);
    if (!zin) throw Error("cannot open " + zones);
    return parse_zone_trips(in, parse_zone_centroids(zin), bbox, &summary);
  }
  TripFormat f = TripFormat::csv;
  if (format == "columnar" ||
      (format == "auto" && std::filesystem::path(path).extension() != ".csv"))
    f = TripFormat::columnar;
  return parse_trips(in, f, bbox, &summary);
}

ordered_json summary_json(const IngestSummary& s) {
  ordered_json j;
  j["rows_read"] = s.rows_read;
  j["accepted"] = s.accepted;
  j["malformed"] = s.malformed;
  j["out_of_bbox"] = s.out_of_bbox;
  j["bad_time_order"] = s.bad_time_order;
  return j;
}

void emit(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-")
    std::cout << body;
  else
    write_file_atomic(path, body);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regime-calibrated dispatch: ingestion, matching, simulation, experiments"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate trips and write the columnar container");
  std::string in_path, in_format = "auto", zones_path, ingest_out;
  ingest->add_option("--input", in_path, "Trip file (CSV or columnar)")->required();
  ingest->add_option("--format", in_format)->check(CLI::IsMember({"auto", "csv", "columnar"}));
  ingest->add_option("--zones", zones_path, "Zone centroid table for zone-ID feeds");
  ingest->add_option("--out", ingest_out, "Columnar output path")->required();

  // build-library
  auto* build = app.add_subcommand("build-library", "Segment trips into a regime library");
  std::string lib_out;
  std::vector<std::string> holidays;
  double mad_threshold = 3.0;
  build->add_option("--input", in_path, "Trip file (CSV or columnar)")->required();
  build->add_option("--format", in_format)->check(CLI::IsMember({"auto", "csv", "columnar"}));
  build->add_option("--zones", zones_path, "Zone centroid table for zone-ID feeds");
  build->add_option("--holidays", holidays, "Holiday dates YYYY-MM-DD")->delimiter(',');
  build->add_option("--mad-threshold", mad_threshold, "Surge threshold on robust z-scores");
  build->add_option("--out", lib_out, "Library output path")->required();

  // match
  auto* match = app.add_subcommand("match", "Top-k similar regimes for one block (JSONL)");
  std::string lib_path, block_id, weights_preset = "full", match_out;
  int match_k = 5, prefix_bins = 0;
  match->add_option("--library", lib_path)->required();
  match->add_option("--block", block_id, "Query block id (excluded from candidates)")->required();
  match->add_option("--top-k", match_k);
  match->add_option("--weights", weights_preset, "full or distributional_only");
  match->add_option("--prefix-bins", prefix_bins, "Match on the first N bins only");
  match->add_option("--out", match_out, "Output path (default stdout)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run one scenario / policy / seed");
  GridFlags sim_flags;
  sim_flags.out = "";
  std::string scenario_name, trace_path;
  sim_flags.add(simulate);
  simulate->add_option("--scenario", scenario_name, "Scenario name (default: first)");
  simulate->add_option("--trace", trace_path, "Per-request JSONL trace path");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run the scenario x policy x seed grid");
  GridFlags exp_flags;
  bool serial = false;
  exp_flags.add(experiment);
  experiment->add_flag("--serial", serial, "Run cells sequentially");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Sweep one axis over the experiment grid");
  GridFlags ab_flags;
  std::string axis;
  std::string values_json;
  ab_flags.add(ablate);
  ablate->add_option("--axis", axis,
                     "fleet_scale, weights_preset, top_k, batch_window_s, move_fraction_lookahead")
      ->required();
  ablate->add_option("--values", values_json, "JSON list of values (default: standard sweep)");
  ablate->add_flag("--serial", serial, "Run cells sequentially");

  // stats
  auto* stats = app.add_subcommand("stats", "Statistics from an aggregate.csv");
  std::string csv_path, stats_out;
  StatOptions stat_opt;
  stats->add_option("--input", csv_path, "aggregate.csv")->required();
  stats->add_option("--baseline", stat_opt.baseline);
  stats->add_option("--method", stat_opt.method);
  stats->add_option("--bonferroni-m", stat_opt.bonferroni_m);
  stats->add_option("--resamples", stat_opt.bootstrap_resamples);
  stats->add_option("--out", stats_out, "stats.json path (default: table on stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic regime library");
  std::uint64_t synth_seed = 7;
  int synth_blocks = 30;
  std::string synth_out, consistency_out;
  synth->add_option("--seed", synth_seed);
  synth->add_option("--blocks", synth_blocks, "Blocks per family");
  synth->add_option("--out", synth_out, "Library output path")->required();
  synth->add_option("--consistency", consistency_out, "Also write the per-block consistency CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      IngestSummary s;
      const auto trips = read_trips(in_path, in_format, zones_path, kManhattanBox, s);
      std::ostringstream os;
      write_columnar(os, trips);
      write_file_atomic(ingest_out, os.str());
      std::cout << summary_json(s).dump(2) << "\n";
    } else if (build->parsed()) {
      IngestConfig cfg;
      cfg.holidays = holidays;
      cfg.mad_threshold = mad_threshold;
      IngestSummary s;
      const auto trips = read_trips(in_path, in_format, zones_path, cfg.bbox, s);
      const auto lib = segment_blocks(trips, cfg);
      save_library(lib, lib_out);
      auto j = summary_json(s);
      j["blocks"] = lib.records.size();
      std::cout << j.dump(2) << "\n";
    } else if (match->parsed()) {
      const auto lib = load_library(lib_path);
      const RegimeBlock* q = lib.find(block_id);
      if (!q) throw Error("block '" + block_id + "' not in " + lib_path);
      const auto qc =
          prefix_bins > 0
              ? QueryContext::from_prefix(
                    std::span<const double>(q->demand_series)
                        .first(std::min<std::size_t>(prefix_bins, q->demand_series.size())),
                    q->metadata, lib.build_config)
              : QueryContext::from_block(*q);
      const auto w = SimilarityWeights::preset(weights_preset);
      std::string body;
      for (const auto& m : top_k(qc, lib, w, match_k, {block_id})) {
        ordered_json j;
        j["block_id"] = m.block_id;
        j["score"] = m.total_score;
        for (std::size_t i = 0; i < kMetricCount; ++i) {
          j["components"][kMetricNames[i]] = m.components[i];
          j["weights"][kMetricNames[i]] = m.effective_weights.as_array()[i];
        }
        body += j.dump() + "\n";
      }
      emit(match_out, body);
    } else if (simulate->parsed()) {
      const auto spec = sim_flags.spec(simulate);
      const auto prepared = prepare(spec);
      if (prepared.empty()) throw Error("the experiment has no scenarios");
      const PreparedScenario* ps = &prepared.front();
      if (!scenario_name.empty()) {
        ps = nullptr;
        for (const auto& p : prepared)
          if (p.name == scenario_name) ps = &p;
        if (!ps) throw Error("no scenario named '" + scenario_name + "'");
      }
      SimConfig cfg = ps->sim;
      cfg.policy = ps->policies.front();
      cfg.seed = ps->seeds.front();
      const auto demand = cfg.demand_from_prior && is_calibrated(cfg.policy)
                              ? prior_demand(ps->prior, substream_seed(cfg.seed, 2))
                              : ps->demand;
      const auto r = run(cfg, demand, &ps->prior);
      ordered_json j;
      j["scenario"] = ps->name;
      j["policy"] = to_string(cfg.policy);
      j["seed"] = cfg.seed;
      j["truth_block"] = ps->truth_block;
      j["n_drivers"] = r.n_drivers;
      j["reposition_moves"] = r.reposition_moves;
      j["clipped_moves"] = r.clipped_moves;
      j["result"] = to_json(r.result);
      emit(sim_flags.out, j.dump(2) + "\n");
      if (!trace_path.empty()) write_file_atomic(trace_path, trace_jsonl(r.outcomes));
    } else if (experiment->parsed()) {
      const auto spec = exp_flags.spec(experiment);
      const auto o = run_experiment(spec, exp_flags.out, !serial);
      std::cout << to_table(o.stats);
      std::cout << "results: " << o.dir.string() << "\nmanifest sha256: " << o.manifest_sha256
                << "\n";
      for (const auto& f : o.failures) std::cerr << "FAILED " << f << "\n";
      return o.failures.empty() ? 0 : 1;
    } else if (ablate->parsed()) {
      const auto spec = ab_flags.spec(ablate);
      AblationSpec ab;
      ab.axis = ablation_axis_from_string(axis);
      if (!values_json.empty()) {
        const auto v = json::parse(values_json);
        if (!v.is_array()) throw Error("--values must be a JSON list");
        ab.values.assign(v.begin(), v.end());
      }
      const auto o = run_ablation(spec, ab, ab_flags.out, !serial);
      std::cout << read_file(o.csv);
      std::size_t failed = 0;
      for (const auto& r : o.runs) failed += r.failures.size();
      std::cout << "csv: " << o.csv.string() << "\n";
      return failed == 0 ? 0 : 1;
    } else if (stats->parsed()) {
      const auto runs = parse_aggregate_csv(read_file(csv_path));
      const auto rep = make_stat_report(runs, stat_opt);
      if (stats_out.empty())
        std::cout << to_table(rep);
      else
        write_file_atomic(stats_out, to_json(rep).dump(2) + "\n");
    } else if (synth->parsed()) {
      const auto lib = generate_synthetic_library(default_profiles(), synth_blocks, synth_seed);
      save_library(lib, synth_out);
      std::cout << "blocks: " << lib.records.size() << "\n";
      if (!consistency_out.empty()) {
        std::vector<ConsistencyReport> reps;
        for (const auto& b : lib.records)
          reps.push_back(consistency_check(lib, b, SimilarityWeights{}, b.block_id));
        write_file_atomic(consistency_out, consistency_csv(reps));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
