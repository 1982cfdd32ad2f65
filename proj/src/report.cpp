#include "rcd/report.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "rcd/common.hpp"

namespace rcd {

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double rel(double base, double ours) { return base > 0.0 ? (base - ours) / base : 0.0; }

using Key = std::pair<std::string, std::uint64_t>;  // scenario, seed

std::map<Key, const RunRecord*> index_policy(const std::vector<RunRecord>& runs,
                                             const std::string& policy) {
  std::map<Key, const RunRecord*> out;
  for (const auto& r : runs)
    if (r.policy == policy) out[{r.scenario, r.seed}] = &r;
  return out;
}

double grand_over_scenarios(const std::map<std::string, std::vector<double>>& by_scenario) {
  if (by_scenario.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [_, v] : by_scenario) s += mean_of(v);
  return s / static_cast<double>(by_scenario.size());
}

}  // namespace

StatReport make_stat_report(const std::vector<RunRecord>& runs, const StatOptions& opt) {
  if (opt.bonferroni_m < 1) throw Error("bonferroni_m must be >= 1");
  StatReport rep;
  rep.options = opt;

  std::set<std::string> policies;
  for (const auto& r : runs) policies.insert(r.policy);
  for (const auto& p : policies) {
    std::map<std::string, std::vector<double>> by;
    for (const auto& r : runs)
      if (r.policy == p) by[r.scenario].push_back(r.result.mean);
    rep.policy_mean_wait[p] = grand_over_scenarios(by);
  }

  const auto base = index_policy(runs, opt.baseline);
  const auto ours = index_policy(runs, opt.method);

  // scenario -> paired per-seed values, seeds ascending
  std::map<std::string, std::vector<std::pair<const RunRecord*, const RunRecord*>>> paired;
  for (const auto& [key, b] : base) {
    auto it = ours.find(key);
    if (it != ours.end()) paired[key.first].emplace_back(b, it->second);
  }

  HierarchicalSample improvements;
  std::map<std::string, std::vector<double>> base_means, ours_means, p95_impr;
  for (const auto& [scenario, pairs] : paired) {
    ScenarioComparison sc;
    sc.scenario = scenario;
    sc.n_seeds = pairs.size();
    std::vector<double> bw, ow, bp, op, bg, og, impr, pimpr;
    for (const auto& [b, o] : pairs) {
      bw.push_back(b->result.mean);
      ow.push_back(o->result.mean);
      bp.push_back(b->result.p95);
      op.push_back(o->result.p95);
      bg.push_back(b->result.gini);
      og.push_back(o->result.gini);
      impr.push_back(rel(b->result.mean, o->result.mean));
      pimpr.push_back(rel(b->result.p95, o->result.p95));
    }
    sc.base_mean = mean_of(bw);
    sc.ours_mean = mean_of(ow);
    sc.base_sd = sample_sd(bw);
    sc.ours_sd = sample_sd(ow);
    sc.improvement = mean_of(impr);
    sc.ci = bootstrap_ci(HierarchicalSample{{scenario, impr}}, opt.bootstrap_resamples,
                         opt.bootstrap_seed);
    sc.p_raw = wilcoxon_signed_rank(bw, ow, Alternative::greater);
    sc.p_adjusted = bonferroni(sc.p_raw, opt.bonferroni_m);
    if (bw.size() >= 2) sc.cohens_d = cohens_d(bw, ow);
    sc.base_p95 = mean_of(bp);
    sc.ours_p95 = mean_of(op);
    sc.p95_improvement = mean_of(pimpr);
    sc.base_gini = mean_of(bg);
    sc.ours_gini = mean_of(og);
    improvements[scenario] = impr;
    base_means[scenario] = bw;
    ours_means[scenario] = ow;
    p95_impr[scenario] = pimpr;
    rep.scenarios.push_back(std::move(sc));
  }

  if (!rep.scenarios.empty()) {
    rep.grand_base = grand_over_scenarios(base_means);
    rep.grand_ours = grand_over_scenarios(ours_means);
    rep.grand_improvement = grand_mean(improvements);
    rep.grand_ci = bootstrap_ci(improvements, opt.bootstrap_resamples, opt.bootstrap_seed);
    rep.grand_p95_improvement = grand_mean(p95_impr);
    double gb = 0.0, go = 0.0;
    for (const auto& sc : rep.scenarios) {
      gb += sc.base_gini;
      go += sc.ours_gini;
    }
    rep.mean_gini_base = gb / static_cast<double>(rep.scenarios.size());
    rep.mean_gini_ours = go / static_cast<double>(rep.scenarios.size());
  }

  // Friedman over every (scenario, seed) block where all methods ran.
  std::vector<std::map<Key, const RunRecord*>> cols;
  for (const auto& m : opt.friedman_methods)
    if (policies.count(m)) {
      rep.friedman_methods.push_back(m);
      cols.push_back(index_policy(runs, m));
    }
  if (cols.size() >= 3) {
    std::vector<std::vector<double>> blocks;
    for (const auto& [key, _] : cols.front()) {
      std::vector<double> row;
      for (const auto& c : cols) {
        auto it = c.find(key);
        if (it == c.end()) break;
        row.push_back(it->second->result.mean);
      }
      if (row.size() == cols.size()) blocks.push_back(std::move(row));
    }
    if (blocks.size() >= 2) rep.friedman = friedman_nemenyi(blocks);
  }
  if (rep.friedman_methods.size() < 3 || !rep.friedman) rep.friedman_methods.clear();

  // Decomposition baseline -> cal_only -> method.
  const auto mid = index_policy(runs, opt.cal_only);
  if (!mid.empty()) {
    std::map<std::string, std::vector<double>> as, bs, cs;
    for (const auto& [key, b] : base) {
      auto m = mid.find(key);
      auto o = ours.find(key);
      if (m == mid.end() || o == ours.end()) continue;
      as[key.first].push_back(rel(b->result.mean, m->second->result.mean));
      bs[key.first].push_back(rel(m->second->result.mean, o->second->result.mean));
      cs[key.first].push_back(rel(b->result.mean, o->second->result.mean));
    }
    if (!as.empty()) {
      Decomposition d;
      d.a = grand_over_scenarios(as);
      d.b = grand_over_scenarios(bs);
      d.compound = grand_over_scenarios(cs);
      d.predicted = 1.0 - (1.0 - d.a) * (1.0 - d.b);
      rep.decomposition = d;
    }
  }
  return rep;
}

nlohmann::ordered_json to_json(const StatReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["baseline"] = r.options.baseline;
  j["method"] = r.options.method;
  j["bonferroni_m"] = r.options.bonferroni_m;
  j["bootstrap_resamples"] = r.options.bootstrap_resamples;
  j["bootstrap_seed"] = r.options.bootstrap_seed;
  ordered_json sc = ordered_json::array();
  for (const auto& s : r.scenarios) {
    ordered_json e;
    e["scenario"] = s.scenario;
    e["n_seeds"] = s.n_seeds;
    e["base_mean"] = s.base_mean;
    e["base_sd"] = s.base_sd;
    e["ours_mean"] = s.ours_mean;
    e["ours_sd"] = s.ours_sd;
    e["improvement"] = s.improvement;
    e["ci"] = {s.ci.lo, s.ci.hi};
    e["wilcoxon_p_raw"] = s.p_raw;
    e["wilcoxon_p_adjusted"] = s.p_adjusted;
    e["cohens_d"] = s.cohens_d ? ordered_json(*s.cohens_d) : ordered_json("undefined");
    e["base_p95"] = s.base_p95;
    e["ours_p95"] = s.ours_p95;
    e["p95_improvement"] = s.p95_improvement;
    e["base_gini"] = s.base_gini;
    e["ours_gini"] = s.ours_gini;
    sc.push_back(std::move(e));
  }
  j["scenarios"] = std::move(sc);
  j["grand"] = {{"base_mean", r.grand_base},
                {"ours_mean", r.grand_ours},
                {"improvement", r.grand_improvement},
                {"ci", {r.grand_ci.lo, r.grand_ci.hi}},
                {"p95_improvement", r.grand_p95_improvement},
                {"mean_gini_base", r.mean_gini_base},
                {"mean_gini_ours", r.mean_gini_ours}};
  if (r.friedman) {
    ordered_json ranks;
    for (std::size_t i = 0; i < r.friedman_methods.size(); ++i)
      ranks[r.friedman_methods[i]] = r.friedman->mean_ranks[i];
    j["friedman"] = {{"methods", r.friedman_methods},
                     {"chi2", r.friedman->chi2},
                     {"p_value", r.friedman->p_value},
                     {"mean_ranks", ranks},
                     {"critical_difference", r.friedman->critical_difference}};
  } else {
    j["friedman"] = nullptr;
  }
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    j["decomposition"] = {{"a", d.a}, {"b", d.b}, {"compound", d.compound}, {"predicted", d.predicted}};
  } else {
    j["decomposition"] = nullptr;
  }
  ordered_json pw;
  for (const auto& [p, w] : r.policy_mean_wait) pw[p] = w;
  j["policy_mean_wait"] = std::move(pw);
  return j;
}

std::string to_table(const StatReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %10s %10s %8s %17s %8s %8s %8s\n", "scenario",
                r.options.baseline.c_str(), r.options.method.c_str(), "improv", "95% CI", "d",
                "p_raw", "p_adj");
  out += buf;
  for (const auto& s : r.scenarios) {
    char d[16];
    if (s.cohens_d)
      std::snprintf(d, sizeof d, "%.2f", *s.cohens_d);
    else
      std::snprintf(d, sizeof d, "undef");
    std::snprintf(buf, sizeof buf,
                  "%-20s %5.1f+-%-4.1f %5.1f+-%-4.1f %7.1f%% [%6.1f, %6.1f] %8s %8.4f %8.4f\n",
                  s.scenario.c_str(), s.base_mean, s.base_sd, s.ours_mean, s.ours_sd,
                  100.0 * s.improvement, 100.0 * s.ci.lo, 100.0 * s.ci.hi, d, s.p_raw,
                  s.p_adjusted);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-20s %10.1f %10.1f %7.1f%% [%6.1f, %6.1f]\n", "grand mean",
                r.grand_base, r.grand_ours, 100.0 * r.grand_improvement, 100.0 * r.grand_ci.lo,
                100.0 * r.grand_ci.hi);
  out += buf;
  std::snprintf(buf, sizeof buf, "p95 improvement %.1f%%, gini %.3f -> %.3f\n",
                100.0 * r.grand_p95_improvement, r.mean_gini_base, r.mean_gini_ours);
  out += buf;
  if (r.friedman) {
    std::snprintf(buf, sizeof buf, "friedman chi2 %.3f p %.3g CD %.3f; ranks", r.friedman->chi2,
                  r.friedman->p_value, r.friedman->critical_difference);
    out += buf;
    for (std::size_t i = 0; i < r.friedman_methods.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %s=%.2f", r.friedman_methods[i].c_str(),
                    r.friedman->mean_ranks[i]);
      out += buf;
    }
    out += "\n";
  }
  if (r.decomposition) {
    const auto& d = *r.decomposition;
    std::snprintf(buf, sizeof buf,
                  "decomposition a %.1f%% b %.1f%% compound %.1f%% predicted %.1f%%\n",
                  100.0 * d.a, 100.0 * d.b, 100.0 * d.compound, 100.0 * d.predicted);
    out += buf;
  }
  return out;
}

nlohmann::ordered_json to_json(const SimResult& r) {
  nlohmann::ordered_json j;
  j["n_created"] = r.n_created;
  j["n_completed"] = r.n_completed;
  j["n_expired"] = r.n_expired;
  j["n_in_flight"] = r.n_in_flight;
  j["horizon_s"] = r.horizon_s;
  j["mean"] = r.mean;
  j["p50"] = r.p50;
  j["p95"] = r.p95;
  j["p99"] = r.p99;
  j["completion_rate"] = r.completion_rate;
  j["gini"] = r.gini;
  j["throughput_per_h"] = r.throughput_per_h;
  j["waits_s"] = r.waits_s;
  return j;
}

}  // namespace rcd
