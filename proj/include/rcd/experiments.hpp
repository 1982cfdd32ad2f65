#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcd/report.hpp"
#include "rcd/similarity.hpp"
#include "rcd/simulator.hpp"
#include "rcd/synthetic.hpp"

namespace rcd {

const char* git_revision();

inline const std::vector<std::uint64_t> kMainSeeds = {42, 142, 242, 342, 442};
inline const std::vector<std::uint64_t> kSensitivitySeeds = {42, 123, 456};

struct DemandSource {
  enum class Kind { synthetic, library_block };
  Kind kind = Kind::synthetic;
  Family family = Family::rush;  // synthetic: which family
  int index = 3;                 // synthetic: block index within the family
  std::string block_id;          // library_block
  std::string library_path;      // library_block
};

struct Scenario {
  std::string name;
  DemandSource source;
  std::vector<Policy> policies;       // empty: experiment default
  std::vector<std::uint64_t> seeds;   // empty: experiment default
  // Partial config: {"sim": {...}, "lp": {...}, "router": {...},
  // "weights": preset name or object, "top_k": k}.
  nlohmann::json overrides = nlohmann::json::object();
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::vector<Policy> policies = {Policy::replay_greedy, Policy::replay_batch, Policy::cal_only,
                                  Policy::cal_heuristic, Policy::cal_lp};
  std::vector<std::uint64_t> seeds = kMainSeeds;
  SimConfig sim;
  std::string weights_preset = "full";
  SimilarityWeights weights;
  int top_k = 5;
  std::uint64_t synthetic_seed = 7;
  int synthetic_blocks = 30;
  StatOptions stats;
  bool write_traces = true;
  std::vector<Scenario> scenarios;
};

/// Unknown keys are errors. Missing keys keep their defaults.
ExperimentSpec parse_experiment(const nlohmann::json& j);
ExperimentSpec load_experiment(const std::filesystem::path& path);
/// Fully resolved spec; its dump is what the config hash covers.
nlohmann::ordered_json to_json(const ExperimentSpec& spec);
std::string config_hash(const ExperimentSpec& spec);

void apply_sim_overrides(SimConfig& cfg, const nlohmann::json& j);
void apply_lp_overrides(LpConfig& cfg, const nlohmann::json& j);
void apply_router_overrides(RouterConfig& cfg, const nlohmann::json& j);
nlohmann::ordered_json to_json(const SimConfig& cfg);

/// The 6-scenario desk-scale suite: rush x2, flat x2, surge, night.
ExperimentSpec suite_spec(std::vector<std::uint64_t> seeds = {42, 142, 242});

struct PreparedScenario {
  std::string name;
  SimConfig sim;
  std::vector<Policy> policies;
  std::vector<std::uint64_t> seeds;
  std::string truth_block;
  std::vector<Request> demand;
  CalibratedPrior prior;
};

/// Resolves demand and the calibrated prior (top-k excluding the truth
/// block, target volume = truth request count).
std::vector<PreparedScenario> prepare(const ExperimentSpec& spec);

struct ExperimentOutcome {
  std::filesystem::path dir;
  std::vector<RunRecord> runs;  // grid order: scenario, policy, seed
  std::vector<std::string> failures;
  StatReport stats;
  std::string manifest_sha256;
};

/// Runs the scenario x policy x seed grid and writes
/// <out>/<name>/<scenario>/<policy>/<seed>.json (+ .jsonl traces),
/// aggregate.csv, stats.json, stats.txt and manifest.json, each
/// atomically. A failing cell is recorded and the rest continue.
ExperimentOutcome run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out,
                                 bool parallel = true);

std::string aggregate_csv(const std::vector<RunRecord>& runs);
/// Inverse of aggregate_csv (per-request waits are not recoverable).
std::vector<RunRecord> parse_aggregate_csv(const std::string& csv);

/// Command-line flags. Applied on top of the experiment file, including
/// per-scenario overrides: flags > file > defaults.
struct CliOverrides {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::vector<Policy>> policies;
  std::optional<double> fleet_scale;
  std::optional<RouterKind> router;
  std::optional<std::string> osrm_url;
  std::optional<int> top_k;
  std::optional<int> batch_window_s;
};

void apply_cli_overrides(ExperimentSpec& spec, const CliOverrides& o);

enum class AblationAxis { fleet_scale, weights_preset, top_k, batch_window_s, move_fraction_lookahead };

std::string to_string(AblationAxis a);
AblationAxis ablation_axis_from_string(const std::string& s);

struct AblationSpec {
  AblationAxis axis = AblationAxis::fleet_scale;
  // Numbers, preset names, or [move_fraction, lookahead_min] pairs.
  std::vector<nlohmann::json> values;
};

/// Default values per axis (the standard sweep sets).
std::vector<nlohmann::json> default_ablation_values(AblationAxis axis);

/// Spec with `value` applied along `axis`.
ExperimentSpec with_axis_value(const ExperimentSpec& spec, AblationAxis axis,
                               const nlohmann::json& value);

struct AblationOutcome {
  std::filesystem::path csv;
  std::vector<ExperimentOutcome> runs;  // one per value
};

/// One experiment per value under <out>/<name>/ablation_<axis>/<label>,
/// plus a long-format <out>/<name>/ablation_<axis>.csv.
AblationOutcome run_ablation(const ExperimentSpec& spec, const AblationSpec& ab,
                             const std::filesystem::path& out, bool parallel = true);

}  // namespace rcd
