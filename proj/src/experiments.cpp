#include "rcd/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "rcd/hash.hpp"
#include "rcd/io_util.hpp"
#include "rcd/random.hpp"

#ifndef RCD_GIT_REVISION
#define RCD_GIT_REVISION "unknown"
#endif

namespace rcd {

using nlohmann::json;
using nlohmann::ordered_json;

const char* git_revision() { return RCD_GIT_REVISION; }

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(where_ + ": expected an object");
  }

  template <class T>
  bool get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(where_ + "." + key + ": " + e.what());
    }
    return true;
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw Error(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::vector<Policy> parse_policies(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error(where + ": expected a list of policy names");
  std::vector<Policy> out;
  for (const auto& p : j) {
    if (!p.is_string()) throw Error(where + ": policy names must be strings");
    out.push_back(policy_from_string(p.get<std::string>()));
  }
  return out;
}

std::vector<std::string> policy_names(const std::vector<Policy>& ps) {
  std::vector<std::string> out;
  for (auto p : ps) out.push_back(to_string(p));
  return out;
}

SimilarityWeights parse_weights(const json& j, SimilarityWeights w, std::string& preset) {
  if (j.is_string()) {
    preset = j.get<std::string>();
    return SimilarityWeights::preset(preset);
  }
  ObjectReader r(j, "weights");
  r.get("ks", w.ks);
  r.get("w1", w.w1);
  r.get("feat", w.feat);
  r.get("var", w.var);
  r.get("event", w.event);
  r.get("temporal", w.temporal);
  r.finish();
  w.validate();
  // An explicit object equal to the named preset keeps the name.
  if (preset == "custom" || !(w == SimilarityWeights::preset(preset))) preset = "custom";
  return w;
}

ordered_json weights_json(const SimilarityWeights& w) {
  ordered_json j;
  j["ks"] = w.ks;
  j["w1"] = w.w1;
  j["feat"] = w.feat;
  j["var"] = w.var;
  j["event"] = w.event;
  j["temporal"] = w.temporal;
  return j;
}

DemandSource parse_source(const json& j, const std::string& where) {
  DemandSource s;
  ObjectReader r(j, where);
  std::string kind = "synthetic";
  r.get("kind", kind);
  if (kind == "synthetic") {
    s.kind = DemandSource::Kind::synthetic;
    std::string fam = to_string(s.family);
    r.get("family", fam);
    s.family = family_from_string(fam);
    r.get("index", s.index);
    if (s.index < 0) throw Error(where + ".index must be >= 0");
  } else if (kind == "library_block") {
    s.kind = DemandSource::Kind::library_block;
    r.get("block_id", s.block_id);
    r.get("library_path", s.library_path);
    if (s.block_id.empty()) throw Error(where + ": library_block needs block_id");
    if (s.library_path.empty()) throw Error(where + ": library_block needs library_path");
  } else {
    throw Error(where + ": unknown source kind '" + kind + "'");
  }
  r.finish();
  return s;
}

ordered_json to_json(const DemandSource& s) {
  ordered_json j;
  if (s.kind == DemandSource::Kind::synthetic) {
    j["kind"] = "synthetic";
    j["family"] = to_string(s.family);
    j["index"] = s.index;
  } else {
    j["kind"] = "library_block";
    j["block_id"] = s.block_id;
    j["library_path"] = s.library_path;
  }
  return j;
}

StatOptions parse_stats(const json& j) {
  StatOptions o;
  ObjectReader r(j, "stats");
  r.get("baseline", o.baseline);
  r.get("method", o.method);
  r.get("cal_only", o.cal_only);
  r.get("friedman_methods", o.friedman_methods);
  r.get("bonferroni_m", o.bonferroni_m);
  r.get("bootstrap_resamples", o.bootstrap_resamples);
  r.get("bootstrap_seed", o.bootstrap_seed);
  r.finish();
  if (o.bonferroni_m < 1) throw Error("stats.bonferroni_m must be >= 1");
  if (o.bootstrap_resamples < 1) throw Error("stats.bootstrap_resamples must be >= 1");
  return o;
}

ordered_json to_json(const StatOptions& o) {
  ordered_json j;
  j["baseline"] = o.baseline;
  j["method"] = o.method;
  j["cal_only"] = o.cal_only;
  j["friedman_methods"] = o.friedman_methods;
  j["bonferroni_m"] = o.bonferroni_m;
  j["bootstrap_resamples"] = o.bootstrap_resamples;
  j["bootstrap_seed"] = o.bootstrap_seed;
  return j;
}

// Scenario-level effective settings.
struct Resolved {
  SimConfig sim;
  SimilarityWeights weights;
  int top_k = 5;
};

Resolved resolve(const ExperimentSpec& spec, const Scenario& sc) {
  Resolved r{spec.sim, spec.weights, spec.top_k};
  const std::string where = "scenario '" + sc.name + "' overrides";
  ObjectReader o(sc.overrides, where);
  if (const json* s = o.find("sim")) apply_sim_overrides(r.sim, *s);
  if (const json* s = o.find("lp")) apply_lp_overrides(r.sim.lp, *s);
  if (const json* s = o.find("router")) apply_router_overrides(r.sim.router, *s);
  if (const json* s = o.find("weights")) {
    std::string preset;
    r.weights = parse_weights(*s, r.weights, preset);
  }
  o.get("top_k", r.top_k);
  o.finish();
  r.sim.validate();
  r.weights.validate();
  if (r.top_k < 1) throw Error(where + ": top_k must be >= 1");
  return r;
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string label_of(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array() && v.size() == 2)
    return "f" + label_of(v[0]) + "_la" + label_of(v[1]);
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v.get<double>());
    return buf;
  }
  throw Error("ablation value must be a number, string or pair: " + v.dump());
}

}  // namespace

void apply_lp_overrides(LpConfig& cfg, const json& j) {
  ObjectReader r(j, "lp");
  r.get("move_fraction", cfg.move_fraction);
  r.get("lookahead_min", cfg.lookahead_min);
  r.get("interval_steps", cfg.interval_steps);
  r.finish();
  cfg.validate();
}

void apply_router_overrides(RouterConfig& cfg, const json& j) {
  ObjectReader r(j, "router");
  std::string kind = to_string(cfg.kind);
  if (r.get("kind", kind)) cfg.kind = router_kind_from_string(kind);
  r.get("speed_kmh", cfg.speed_kmh);
  r.get("scale_factor", cfg.scale_factor);
  r.get("osrm_base_url", cfg.osrm_base_url);
  r.get("osrm_fallback", cfg.osrm_fallback);
  r.get("osrm_max_concurrency", cfg.osrm_max_concurrency);
  r.finish();
  cfg.validate();
}

void apply_sim_overrides(SimConfig& cfg, const json& j) {
  ObjectReader r(j, "sim");
  r.get("step_s", cfg.step_s);
  r.get("horizon_s", cfg.horizon_s);
  r.get("batch_window_s", cfg.batch_window_s);
  r.get("max_wait_s", cfg.max_wait_s);
  r.get("fleet_fraction", cfg.fleet_fraction);
  r.get("fleet_scale", cfg.fleet_scale);
  r.get("hex_resolution", cfg.hex_resolution);
  r.get("cal_dispatch_bias", cfg.cal_dispatch_bias);
  r.get("demand_from_prior", cfg.demand_from_prior);
  if (const json* b = r.find("bbox")) {
    if (!b->is_array() || b->size() != 4)
      throw Error("sim.bbox: expected [min_lat, min_lon, max_lat, max_lon]");
    cfg.bbox = {(*b)[0].get<double>(), (*b)[1].get<double>(), (*b)[2].get<double>(),
                (*b)[3].get<double>()};
  }
  if (const json* l = r.find("lp")) apply_lp_overrides(cfg.lp, *l);
  if (const json* l = r.find("router")) apply_router_overrides(cfg.router, *l);
  r.finish();
  cfg.validate();
}

ordered_json to_json(const SimConfig& cfg) {
  ordered_json j;
  j["step_s"] = cfg.step_s;
  j["horizon_s"] = cfg.horizon_s;
  j["batch_window_s"] = cfg.batch_window_s;
  j["max_wait_s"] = cfg.max_wait_s;
  j["fleet_fraction"] = cfg.fleet_fraction;
  j["fleet_scale"] = cfg.fleet_scale;
  j["hex_resolution"] = cfg.hex_resolution;
  j["cal_dispatch_bias"] = cfg.cal_dispatch_bias;
  j["demand_from_prior"] = cfg.demand_from_prior;
  j["bbox"] = {cfg.bbox.min_lat, cfg.bbox.min_lon, cfg.bbox.max_lat, cfg.bbox.max_lon};
  ordered_json lp;
  lp["move_fraction"] = cfg.lp.move_fraction;
  lp["lookahead_min"] = cfg.lp.lookahead_min;
  lp["interval_steps"] = cfg.lp.interval_steps;
  j["lp"] = lp;
  ordered_json rt;
  rt["kind"] = to_string(cfg.router.kind);
  rt["speed_kmh"] = cfg.router.speed_kmh;
  rt["scale_factor"] = cfg.router.scale_factor;
  rt["osrm_base_url"] = cfg.router.osrm_base_url;
  rt["osrm_fallback"] = cfg.router.osrm_fallback;
  rt["osrm_max_concurrency"] = cfg.router.osrm_max_concurrency;
  j["router"] = rt;
  return j;
}

ExperimentSpec parse_experiment(const json& j) {
  ExperimentSpec s;
  ObjectReader r(j, "experiment");
  r.get("name", s.name);
  if (s.name.empty() || s.name.find('/') != std::string::npos)
    throw Error("experiment.name must be a non-empty path component");
  if (const json* p = r.find("policies")) s.policies = parse_policies(*p, "experiment.policies");
  r.get("seeds", s.seeds);
  if (const json* v = r.find("sim")) apply_sim_overrides(s.sim, *v);
  if (const json* v = r.find("lp")) apply_lp_overrides(s.sim.lp, *v);
  if (const json* v = r.find("router")) apply_router_overrides(s.sim.router, *v);
  if (r.get("weights_preset", s.weights_preset))
    s.weights = SimilarityWeights::preset(s.weights_preset);
  if (const json* v = r.find("weights")) s.weights = parse_weights(*v, s.weights, s.weights_preset);
  r.get("top_k", s.top_k);
  if (s.top_k < 1) throw Error("experiment.top_k must be >= 1");
  if (const json* v = r.find("synthetic")) {
    ObjectReader sr(*v, "synthetic");
    sr.get("seed", s.synthetic_seed);
    sr.get("blocks_per_profile", s.synthetic_blocks);
    sr.finish();
    if (s.synthetic_blocks < 1) throw Error("synthetic.blocks_per_profile must be >= 1");
  }
  if (const json* v = r.find("stats")) s.stats = parse_stats(*v);
  r.get("write_traces", s.write_traces);
  if (const json* v = r.find("scenarios")) {
    if (!v->is_array()) throw Error("experiment.scenarios: expected a list");
    std::set<std::string> names;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string where = "scenarios[" + std::to_string(i) + "]";
      Scenario sc;
      ObjectReader sr((*v)[i], where);
      sr.get("name", sc.name);
      if (sc.name.empty() || sc.name.find('/') != std::string::npos)
        throw Error(where + ".name must be a non-empty path component");
      if (!names.insert(sc.name).second) throw Error("duplicate scenario name '" + sc.name + "'");
      const json* src = sr.find("source");
      if (!src) throw Error(where + ": missing source");
      sc.source = parse_source(*src, where + ".source");
      if (const json* p = sr.find("policies")) sc.policies = parse_policies(*p, where + ".policies");
      sr.get("seeds", sc.seeds);
      if (const json* o = sr.find("overrides")) sc.overrides = *o;
      sr.finish();
      s.scenarios.push_back(std::move(sc));
    }
  }
  r.finish();
  s.weights.validate();
  if (s.policies.empty()) throw Error("experiment.policies must not be empty");
  if (s.seeds.empty()) throw Error("experiment.seeds must not be empty");
  for (const auto& sc : s.scenarios) (void)resolve(s, sc);
  return s;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

ordered_json to_json(const ExperimentSpec& spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["policies"] = policy_names(spec.policies);
  j["seeds"] = spec.seeds;
  j["sim"] = to_json(spec.sim);
  j["weights_preset"] = spec.weights_preset;
  j["weights"] = weights_json(spec.weights);
  j["top_k"] = spec.top_k;
  j["synthetic"] = {{"seed", spec.synthetic_seed}, {"blocks_per_profile", spec.synthetic_blocks}};
  j["stats"] = to_json(spec.stats);
  j["write_traces"] = spec.write_traces;
  ordered_json scs = ordered_json::array();
  for (const auto& sc : spec.scenarios) {
    ordered_json s;
    s["name"] = sc.name;
    s["source"] = to_json(sc.source);
    if (!sc.policies.empty()) s["policies"] = policy_names(sc.policies);
    if (!sc.seeds.empty()) s["seeds"] = sc.seeds;
    s["overrides"] = sc.overrides;
    scs.push_back(std::move(s));
  }
  j["scenarios"] = scs;
  return j;
}

std::string config_hash(const ExperimentSpec& spec) { return sha256_hex(to_json(spec).dump()); }

ExperimentSpec suite_spec(std::vector<std::uint64_t> seeds) {
  ExperimentSpec s;
  s.name = "suite";
  s.seeds = std::move(seeds);
  const struct {
    const char* name;
    Family family;
    int index;
  } slots[] = {{"rush_a", Family::rush, 3},   {"rush_b", Family::rush, 4},
               {"flat_a", Family::flat, 3},   {"flat_b", Family::flat, 4},
               {"surge", Family::surge, 3},   {"night", Family::night, 3}};
  for (const auto& sl : slots) {
    Scenario sc;
    sc.name = sl.name;
    sc.source.family = sl.family;
    sc.source.index = sl.index;
    s.scenarios.push_back(std::move(sc));
  }
  return s;
}

std::vector<PreparedScenario> prepare(const ExperimentSpec& spec) {
  std::optional<RegimeLibrary> synthetic;
  std::map<std::string, RegimeLibrary> loaded;
  std::vector<PreparedScenario> out;
  for (const auto& sc : spec.scenarios) {
    const Resolved r = resolve(spec, sc);
    const RegimeLibrary* lib = nullptr;
    const RegimeBlock* truth = nullptr;
    if (sc.source.kind == DemandSource::Kind::synthetic) {
      if (!synthetic)
        synthetic = generate_synthetic_library(default_profiles(), spec.synthetic_blocks,
                                               spec.synthetic_seed);
      lib = &*synthetic;
      int seen = 0;
      for (const auto& b : lib->records) {
        if (family_of(b) != sc.source.family) continue;
        if (seen++ == sc.source.index) {
          truth = &b;
          break;
        }
      }
      if (!truth)
        throw Error("scenario '" + sc.name + "': family " + to_string(sc.source.family) +
                    " has no block " + std::to_string(sc.source.index));
    } else {
      auto it = loaded.find(sc.source.library_path);
      if (it == loaded.end())
        it = loaded.emplace(sc.source.library_path, load_library(sc.source.library_path)).first;
      lib = &it->second;
      for (const auto& b : lib->records)
        if (b.block_id == sc.source.block_id) truth = &b;
      if (!truth)
        throw Error("scenario '" + sc.name + "': block '" + sc.source.block_id + "' not in " +
                    sc.source.library_path);
    }
    PreparedScenario p;
    p.name = sc.name;
    p.sim = r.sim;
    p.policies = sc.policies.empty() ? spec.policies : sc.policies;
    p.seeds = sc.seeds.empty() ? spec.seeds : sc.seeds;
    p.truth_block = truth->block_id;
    p.demand = replay_demand(*truth);
    const auto matches =
        top_k(QueryContext::from_block(*truth), *lib, r.weights, r.top_k, {truth->block_id});
    p.prior = build_prior(matches, *lib, static_cast<double>(truth->od_pool.size()));
    out.push_back(std::move(p));
  }
  return out;
}

std::string aggregate_csv(const std::vector<RunRecord>& runs) {
  std::string s =
      "scenario,policy,seed,n_drivers,n_created,n_completed,n_expired,mean_wait_s,p50_wait_s,"
      "p95_wait_s,p99_wait_s,completion_rate,gini,throughput_per_h,reposition_moves,"
      "clipped_moves\n";
  for (const auto& r : runs) {
    const auto& x = r.result;
    s += r.scenario + "," + r.policy + "," + std::to_string(r.seed) + "," +
         std::to_string(r.n_drivers) + "," + std::to_string(x.n_created) + "," +
         std::to_string(x.n_completed) + "," + std::to_string(x.n_expired) + "," +
         fmt(x.mean, 4) + "," + fmt(x.p50, 4) + "," + fmt(x.p95, 4) + "," + fmt(x.p99, 4) +
         "," + fmt(x.completion_rate, 6) + "," + fmt(x.gini, 6) + "," +
         fmt(x.throughput_per_h, 4) + "," + std::to_string(r.reposition_moves) + "," +
         std::to_string(r.clipped_moves) + "\n";
  }
  return s;
}

std::vector<RunRecord> parse_aggregate_csv(const std::string& csv) {
  std::vector<RunRecord> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::string line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no++ == 0 || line.empty()) continue;
    std::vector<std::string> f;
    std::size_t a = 0;
    for (;;) {
      const std::size_t b = line.find(',', a);
      f.push_back(line.substr(a, b == std::string::npos ? std::string::npos : b - a));
      if (b == std::string::npos) break;
      a = b + 1;
    }
    if (f.size() != 16)
      throw Error("aggregate.csv line " + std::to_string(line_no) + ": expected 16 fields");
    try {
      RunRecord r;
      r.scenario = f[0];
      r.policy = f[1];
      r.seed = std::stoull(f[2]);
      r.n_drivers = std::stoi(f[3]);
      r.result.n_created = std::stoll(f[4]);
      r.result.n_completed = std::stoll(f[5]);
      r.result.n_expired = std::stoll(f[6]);
      r.result.mean = std::stod(f[7]);
      r.result.p50 = std::stod(f[8]);
      r.result.p95 = std::stod(f[9]);
      r.result.p99 = std::stod(f[10]);
      r.result.completion_rate = std::stod(f[11]);
      r.result.gini = std::stod(f[12]);
      r.result.throughput_per_h = std::stod(f[13]);
      r.reposition_moves = std::stoi(f[14]);
      r.clipped_moves = std::stoi(f[15]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error("aggregate.csv line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

void apply_cli_overrides(ExperimentSpec& spec, const CliOverrides& o) {
  if (o.seeds) {
    if (o.seeds->empty()) throw Error("--seeds must not be empty");
    spec.seeds = *o.seeds;
  }
  if (o.policies) {
    if (o.policies->empty()) throw Error("--policy must not be empty");
    spec.policies = *o.policies;
  }
  if (o.fleet_scale) spec.sim.fleet_scale = *o.fleet_scale;
  if (o.router) spec.sim.router.kind = *o.router;
  if (o.osrm_url) spec.sim.router.osrm_base_url = *o.osrm_url;
  if (o.top_k) spec.top_k = *o.top_k;
  if (o.batch_window_s) spec.sim.batch_window_s = *o.batch_window_s;
  for (auto& sc : spec.scenarios) {
    if (o.seeds) sc.seeds.clear();
    if (o.policies) sc.policies.clear();
    auto& ov = sc.overrides;
    if (o.fleet_scale) ov["sim"]["fleet_scale"] = *o.fleet_scale;
    if (o.batch_window_s) ov["sim"]["batch_window_s"] = *o.batch_window_s;
    if (o.router) ov["router"]["kind"] = to_string(*o.router);
    if (o.osrm_url) ov["router"]["osrm_base_url"] = *o.osrm_url;
    if (o.top_k) ov["top_k"] = *o.top_k;
  }
  spec.sim.validate();
  if (spec.top_k < 1) throw Error("--top-k must be >= 1");
  for (const auto& sc : spec.scenarios) (void)resolve(spec, sc);
}

ExperimentOutcome run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out,
                                 bool parallel) {
  ExperimentOutcome res;
  res.dir = out / spec.name;
  std::filesystem::create_directories(res.dir);

  const auto scenarios = prepare(spec);
  struct Cell {
    std::size_t scenario;
    Policy policy;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < scenarios.size(); ++i)
    for (auto p : scenarios[i].policies)
      for (auto seed : scenarios[i].seeds) cells.push_back({i, p, seed});

  struct CellResult {
    std::optional<RunRecord> record;
    std::string error;
    std::vector<std::pair<std::string, std::string>> files;  // relpath, sha256
  };
  std::vector<CellResult> results(cells.size());

  auto run_cell = [&](std::size_t c) {
    const Cell& cell = cells[c];
    const PreparedScenario& ps = scenarios[cell.scenario];
    const std::string policy = to_string(cell.policy);
    CellResult& cr = results[c];
    try {
      SimConfig cfg = ps.sim;
      cfg.policy = cell.policy;
      cfg.seed = cell.seed;
      SimRun sr;
      if (cfg.demand_from_prior && is_calibrated(cell.policy)) {
        const auto demand = prior_demand(ps.prior, substream_seed(cell.seed, 2));
        sr = run(cfg, demand, &ps.prior);
      } else {
        sr = run(cfg, ps.demand, &ps.prior);
      }
      RunRecord rec{ps.name, policy, cell.seed, sr.result, sr.n_drivers, sr.reposition_moves,
                    sr.clipped_moves};
      ordered_json j;
      j["scenario"] = rec.scenario;
      j["policy"] = rec.policy;
      j["seed"] = rec.seed;
      j["truth_block"] = ps.truth_block;
      j["n_drivers"] = rec.n_drivers;
      j["reposition_moves"] = rec.reposition_moves;
      j["clipped_moves"] = rec.clipped_moves;
      j["result"] = to_json(rec.result);
      const std::string rel = ps.name + "/" + policy + "/" + std::to_string(cell.seed);
      const std::string body = j.dump(2) + "\n";
      write_file_atomic(res.dir / (rel + ".json"), body);
      cr.files.emplace_back(rel + ".json", sha256_hex(body));
      if (spec.write_traces) {
        const std::string trace = trace_jsonl(sr.outcomes);
        write_file_atomic(res.dir / (rel + ".jsonl"), trace);
        cr.files.emplace_back(rel + ".jsonl", sha256_hex(trace));
      }
      cr.record = std::move(rec);
    } catch (const std::exception& e) {
      cr.error = ps.name + "/" + policy + "/" + std::to_string(cell.seed) + ": " + e.what();
    }
  };

  const auto n = static_cast<std::int64_t>(cells.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < n; ++c) run_cell(static_cast<std::size_t>(c));
  } else {
    for (std::int64_t c = 0; c < n; ++c) run_cell(static_cast<std::size_t>(c));
  }

  std::map<std::string, std::string> outputs;
  for (auto& cr : results) {
    if (cr.record) res.runs.push_back(std::move(*cr.record));
    if (!cr.error.empty()) res.failures.push_back(cr.error);
    for (auto& [rel, sha] : cr.files) outputs[rel] = sha;
  }

  auto emit = [&](const std::string& name, const std::string& body) {
    write_file_atomic(res.dir / name, body);
    outputs[name] = sha256_hex(body);
  };
  emit("aggregate.csv", aggregate_csv(res.runs));
  res.stats = make_stat_report(res.runs, spec.stats);
  emit("stats.json", to_json(res.stats).dump(2) + "\n");
  emit("stats.txt", to_table(res.stats));

  ordered_json m;
  m["experiment"] = spec.name;
  m["config_sha256"] = config_hash(spec);
  m["git_revision"] = git_revision();
  m["seeds"] = spec.seeds;
  m["policies"] = policy_names(spec.policies);
  ordered_json scs = ordered_json::array();
  for (const auto& ps : scenarios)
    scs.push_back({{"name", ps.name},
                   {"truth_block", ps.truth_block},
                   {"n_requests", ps.demand.size()},
                   {"prior_sources", ps.prior.source_ids},
                   {"seeds", ps.seeds},
                   {"policies", policy_names(ps.policies)}});
  m["scenarios"] = scs;
  m["zoning_backend"] = kZoningBackend;
  m["router"] = to_string(spec.sim.router.kind);
  m["n_cells"] = cells.size();
  m["n_failed"] = res.failures.size();
  m["failures"] = res.failures;
  m["config"] = to_json(spec);
  m["outputs"] = outputs;
  const std::string manifest = m.dump(2) + "\n";
  write_file_atomic(res.dir / "manifest.json", manifest);
  res.manifest_sha256 = sha256_hex(manifest);
  return res;
}

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::fleet_scale: return "fleet_scale";
    case AblationAxis::weights_preset: return "weights_preset";
    case AblationAxis::top_k: return "top_k";
    case AblationAxis::batch_window_s: return "batch_window_s";
    case AblationAxis::move_fraction_lookahead: return "move_fraction_lookahead";
  }
  return "?";
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  for (auto a : {AblationAxis::fleet_scale, AblationAxis::weights_preset, AblationAxis::top_k,
                 AblationAxis::batch_window_s, AblationAxis::move_fraction_lookahead})
    if (to_string(a) == s) return a;
  throw Error("unknown ablation axis '" + s + "'");
}

std::vector<json> default_ablation_values(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::fleet_scale: return {0.5, 1.0, 2.0};
    case AblationAxis::weights_preset: return {"full", "distributional_only"};
    case AblationAxis::top_k: return {1, 3, 5, 10, 20};
    case AblationAxis::batch_window_s: return {30, 60, 90, 120};
    case AblationAxis::move_fraction_lookahead: {
      std::vector<json> v;
      for (double f : {0.25, 0.50, 0.75, 1.00})
        for (double la : {5.0, 10.0, 15.0}) v.push_back(json::array({f, la}));
      return v;
    }
  }
  return {};
}

ExperimentSpec with_axis_value(const ExperimentSpec& spec, AblationAxis axis, const json& value) {
  ExperimentSpec s = spec;
  try {
    switch (axis) {
      case AblationAxis::fleet_scale: s.sim.fleet_scale = value.get<double>(); break;
      case AblationAxis::weights_preset:
        s.weights_preset = value.get<std::string>();
        s.weights = SimilarityWeights::preset(s.weights_preset);
        break;
      case AblationAxis::top_k: s.top_k = value.get<int>(); break;
      case AblationAxis::batch_window_s: s.sim.batch_window_s = value.get<int>(); break;
      case AblationAxis::move_fraction_lookahead:
        if (!value.is_array() || value.size() != 2)
          throw Error("move_fraction_lookahead values are [move_fraction, lookahead_min] pairs");
        s.sim.lp.move_fraction = value[0].get<double>();
        s.sim.lp.lookahead_min = value[1].get<double>();
        break;
    }
  } catch (const json::exception& e) {
    throw Error("ablation " + to_string(axis) + " value " + value.dump() + ": " + e.what());
  }
  s.sim.validate();
  if (s.top_k < 1) throw Error("top_k must be >= 1");
  return s;
}

AblationOutcome run_ablation(const ExperimentSpec& spec, const AblationSpec& ab,
                             const std::filesystem::path& out, bool parallel) {
  const auto values = ab.values.empty() ? default_ablation_values(ab.axis) : ab.values;
  const std::string axis = to_string(ab.axis);
  AblationOutcome res;
  const auto root = out / spec.name / ("ablation_" + axis);
  std::string csv =
      "axis,value,scenario,policy,n_seeds,mean_wait_s,p95_wait_s,gini,completion_rate,"
      "improvement_vs_baseline\n";
  for (const auto& v : values) {
    ExperimentSpec s = with_axis_value(spec, ab.axis, v);
    const std::string label = label_of(v);
    s.name = label;
    auto outcome = run_experiment(s, root, parallel);

    // (scenario, policy) -> per-seed results, in grid order
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<const SimResult*>> groups;
    for (const auto& r : outcome.runs) {
      auto key = std::make_pair(r.scenario, r.policy);
      if (!groups.count(key)) order.push_back(key);
      groups[key].push_back(&r.result);
    }
    auto mean_of = [](const std::vector<const SimResult*>& rs, double SimResult::*f) {
      double s = 0.0;
      for (const auto* r : rs) s += r->*f;
      return rs.empty() ? 0.0 : s / static_cast<double>(rs.size());
    };
    for (const auto& key : order) {
      const auto& rs = groups[key];
      const double mean = mean_of(rs, &SimResult::mean);
      std::string impr;
      auto base = groups.find({key.first, spec.stats.baseline});
      if (base != groups.end()) {
        const double b = mean_of(base->second, &SimResult::mean);
        if (b > 0.0) impr = fmt((b - mean) / b, 6);
      }
      csv += axis + "," + label + "," + key.first + "," + key.second + "," +
             std::to_string(rs.size()) + "," + fmt(mean, 4) + "," +
             fmt(mean_of(rs, &SimResult::p95), 4) + "," + fmt(mean_of(rs, &SimResult::gini), 6) +
             "," + fmt(mean_of(rs, &SimResult::completion_rate), 6) + "," + impr + "\n";
    }
    res.runs.push_back(std::move(outcome));
  }
  res.csv = out / spec.name / ("ablation_" + axis + ".csv");
  write_file_atomic(res.csv, csv);
  return res;
}

}  // namespace rcd
