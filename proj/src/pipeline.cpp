#include "tsln/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "tsln/csv.hpp"
#include "tsln/graph.hpp"
#include "tsln/metrics.hpp"
#include "tsln/rng.hpp"
#include "tsln/summaries.hpp"
#include "tsln/util.hpp"

namespace tsln::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

json get_obj(const json& cfg, const std::string& key) {
  if (cfg.contains(key)) return cfg.at(key);
  return json::object();
}

std::uint64_t get_seed(const json& cfg) {
  return cfg.value("seed", std::uint64_t{1});
}

SampleConfig mcmc_config(const json& mcmc, const std::string& stage,
                         std::uint64_t seed, const std::string& label) {
  json s = get_obj(mcmc, stage);
  SampleConfig c;
  c.chains = s.value("chains", stage == "stage2" ? 4 : 4);
  c.warmup = s.value("warmup", stage == "stage2" ? 3000 : 1000);
  c.draws = s.value("draws", stage == "stage2" ? 3000 : 1000);
  c.thin = s.value("thin", 1);
  c.target_accept = mcmc.value("target_accept", 0.8);
  c.seed = Rng::stream(seed, label);
  return c;
}

struct LoadedAreas {
  AreaFrame frame;
  std::map<std::string, int> index;
  std::vector<std::string> bench_columns;
  std::vector<double> true_mu;  // NaN when absent
};

LoadedAreas load_areas(const std::string& path,
                       const std::vector<std::string>& bench_systems) {
  csv::Table t = csv::read_file(path);
  int c_id = t.require_column("area_id");
  int c_pop = t.require_column("population");
  int c_rem = t.column("remote_class");
  int c_ses = t.column("ses_decile");
  int c_nest = t.column("nest_id");
  int c_ext = t.column("ext_est");
  int c_extse = t.column("ext_se");
  int c_true = t.column("true_mu");

  std::set<std::string> reserved = {"area_id", "population", "remote_class",
                                    "ses_decile", "nest_id", "ext_est",
                                    "ext_se", "true_mu"};
  std::vector<int> bench_cols;
  for (const auto& b : bench_systems) {
    bench_cols.push_back(t.require_column(b));
    reserved.insert(b);
  }
  // any column starting with bench_ is never a covariate
  std::vector<int> cont_cols;
  for (std::size_t k = 0; k < t.header.size(); ++k) {
    if (reserved.count(t.header[k])) continue;
    if (t.header[k].rfind("bench_", 0) == 0) continue;
    cont_cols.push_back(static_cast<int>(k));
  }

  LoadedAreas out;
  std::vector<std::map<std::string, int>> bench_levels(bench_systems.size());
  for (const auto& row : t.rows) {
    AreaRow a;
    a.id = row[c_id];
    if (!out.index.emplace(a.id, out.frame.M()).second)
      throw ConfigError("duplicate area id " + a.id);
    a.population = csv::to_double(row[c_pop]);
    if (c_rem >= 0 && !row[c_rem].empty())
      a.remote_class = static_cast<int>(csv::to_long(row[c_rem]));
    if (c_ses >= 0 && !row[c_ses].empty())
      a.ses_decile = static_cast<int>(csv::to_long(row[c_ses]));
    if (c_nest >= 0 && !row[c_nest].empty())
      a.nest = static_cast<int>(csv::to_long(row[c_nest]));
    for (int k : cont_cols) a.g.push_back(csv::to_double(row[k]));
    if (c_ext >= 0 && !row[c_ext].empty()) {
      a.ext_est = csv::to_double(row[c_ext]);
      if (c_extse < 0 || row[c_extse].empty())
        throw ConfigError("ext_est without ext_se for area " + a.id);
      a.ext_se = csv::to_double(row[c_extse]);
    }
    for (std::size_t s = 0; s < bench_systems.size(); ++s) {
      const std::string& v = row[bench_cols[s]];
      if (v.empty()) {
        a.bench.push_back(-1);
      } else {
        auto [it, added] =
            bench_levels[s].emplace(v, static_cast<int>(bench_levels[s].size()));
        a.bench.push_back(it->second);
        (void)added;
      }
    }
    out.true_mu.push_back(c_true >= 0 && !row[c_true].empty()
                              ? csv::to_double(row[c_true])
                              : std::nan(""));
    out.frame.rows.push_back(std::move(a));
  }
  for (const auto& a : out.frame.rows) {
    out.frame.n_remote = std::max(out.frame.n_remote, a.remote_class + 1);
    out.frame.n_ses = std::max(out.frame.n_ses, a.ses_decile + 1);
    out.frame.n_nest = std::max(out.frame.n_nest, a.nest + 1);
  }
  out.frame.bench_names = bench_systems;
  for (const auto& lv : bench_levels)
    out.frame.bench_group_counts.push_back(static_cast<int>(lv.size()));
  out.bench_columns = bench_systems;
  return out;
}

struct LoadedSurvey {
  SurveyDataset data;
  Stage1Spec spec;
};

LoadedSurvey load_survey(const std::string& path, const json& s1cfg,
                         const std::map<std::string, int>& area_index) {
  csv::Table t = csv::read_file(path);
  int c_id = t.require_column("area_id");
  int c_y = t.require_column("y");
  int c_w = t.require_column("w_raw");

  std::vector<int> cont_cols;
  if (s1cfg.contains("continuous"))
    for (const auto& name : s1cfg.at("continuous"))
      cont_cols.push_back(t.require_column(name.get<std::string>()));

  struct CatCol {
    int col;
    int cardinality;
    int reference;
    bool random;
  };
  std::vector<CatCol> cats;
  if (s1cfg.contains("categorical"))
    for (const auto& c : s1cfg.at("categorical"))
      cats.push_back({t.require_column(c.at("name").get<std::string>()),
                      c.at("cardinality").get<int>(), c.value("reference", 0),
                      c.value("random", false)});

  LoadedSurvey out;
  out.data.M = static_cast<int>(area_index.size());
  for (const auto& row : t.rows) {
    SurveyRecord r;
    auto it = area_index.find(row[c_id]);
    if (it == area_index.end())
      throw ConfigError("survey references unknown area " + row[c_id]);
    r.area = it->second;
    r.y = static_cast<int>(csv::to_long(row[c_y]));
    if (r.y != 0 && r.y != 1) throw ConfigError("outcome must be 0/1");
    r.w_raw = csv::to_double(row[c_w]);
    for (int k : cont_cols) r.x.push_back(csv::to_double(row[k]));
    for (const auto& c : cats) {
      int v = static_cast<int>(csv::to_long(row[c.col]));
      if (v < 0 || v >= c.cardinality)
        throw ConfigError("categorical level out of range");
      r.cat.push_back(v);
    }
    out.data.records.push_back(std::move(r));
  }
  for (const auto& c : cats) out.data.cat_cardinality.push_back(c.cardinality);

  for (std::size_t k = 0; k < cont_cols.size(); ++k)
    out.spec.continuous.push_back(static_cast<int>(k));
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k].random)
      out.spec.re_factors.push_back(static_cast<int>(k));
    else
      out.spec.fixed_factors.push_back(
          {static_cast<int>(k), cats[k].cardinality, cats[k].reference});
  }
  out.spec.include_area_effect = s1cfg.value("area_effect", true);
  out.spec.residual_sd = s1cfg.value("residual_sd", 2.0);
  if (!(out.spec.residual_sd > 0.0))
    throw ConfigError("residual_sd must be positive");
  out.spec.qr_whiten = s1cfg.value("qr_whiten", false);
  return out;
}

AreaGraph load_graph(const std::string& edges_path, const json& gcfg,
                     const std::vector<std::string>& ids,
                     const std::map<std::string, int>& index) {
  csv::Table t = csv::read_file(edges_path);
  int ca = t.require_column("area_a");
  int cb = t.require_column("area_b");
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& row : t.rows) edges.emplace_back(row[ca], row[cb]);
  AreaGraph g = build_graph(edges, ids);
  std::vector<std::pair<int, int>> bridges;
  if (gcfg.contains("bridges"))
    for (const auto& b : gcfg.at("bridges")) {
      auto ia = index.find(b.at(0).get<std::string>());
      auto ib = index.find(b.at(1).get<std::string>());
      if (ia == index.end() || ib == index.end())
        throw ConfigError("bridge references unknown area");
      bridges.emplace_back(ia->second, ib->second);
    }
  bool augment = gcfg.value("augment_singletons", false);
  if (!bridges.empty() || augment || !g.connected())
    g = repair_graph(g, bridges, augment);
  return g;
}

void write_chain_csvs(const DrawMatrix& dm, const std::string& dir,
                      const std::string& prefix) {
  for (int c = 0; c < dm.chains; ++c) {
    std::ofstream out(dir + "/" + prefix + "_chain_" + std::to_string(c) + ".csv");
    for (int k = 0; k < dm.dim; ++k)
      out << dm.names[k] << (k + 1 == dm.dim ? '\n' : ',');
    for (int d = 0; d < dm.draws; ++d)
      for (int k = 0; k < dm.dim; ++k)
        out << num(dm.at(c, d, k)) << (k + 1 == dm.dim ? '\n' : ',');
  }
}

json diagnostics_json(const std::map<std::string, double>& rhat,
                      const std::map<std::string, double>& ess,
                      const DrawMatrix& dm) {
  json j;
  for (const auto& [k, v] : rhat)
    j["rhat"][k] = std::isnan(v) ? json() : json(v);
  for (const auto& [k, v] : ess) j["ess"][k] = std::isnan(v) ? json() : json(v);
  j["divergences"] = dm.total_divergences();
  json steps = json::array();
  for (const auto& cd : dm.chain_diag) steps.push_back(cd.step_size);
  j["step_size"] = steps;
  return j;
}

AreaGraph path_graph(int M) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < M; ++i) e.emplace_back(i, i + 1);
  return build_graph_indexed(M, std::move(e));
}

}  // namespace

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const json& cfg, const std::string& out) {
  json sim = get_obj(cfg, "simulate");
  CensusConfig cc;
  cc.seed = Rng::stream(get_seed(cfg), "census-root");
  cc.areas = sim.value("areas", 100);
  cc.u_lo = sim.value("u_lo", 0.1);
  cc.u_hi = sim.value("u_hi", 0.4);
  if (sim.contains("pop_choices"))
    cc.pop_choices = sim.at("pop_choices").get<std::vector<double>>();
  cc.g_sd = sim.value("g_sd", 0.01);
  cc.sampling_fraction = sim.value("sampling_fraction", 0.004);
  cc.sampled_areas = sim.value("sampled_areas", 60);
  int reps = sim.value("replicates", 1);
  if (reps < 1) throw ConfigError("replicates must be >= 1");
  if (!(cc.u_lo > 0.0 && cc.u_hi < 1.0 && cc.u_lo < cc.u_hi))
    throw ConfigError("invalid U range");

  fs::create_directories(out);
  SyntheticCensus census = generate_census(cc);

  {
    std::ofstream f(out + "/census_survey.csv");
    f << "area_id,y,w_raw,k\n";
    for (int j = 0; j < census.total(); ++j)
      f << "A" << census.area[j] << ',' << census.y[j] << ','
        << num(census.w[j]) << ',' << num(census.k[census.area[j]]) << '\n';
  }
  {
    std::ofstream f(out + "/census_areas.csv");
    f << "area_id,population,remote_class,ses_decile,nest_id,bench_state,"
         "bench_major,k,ext_est,ext_se,true_mu\n";
    for (int i = 0; i < census.M(); ++i)
      f << "A" << i << ',' << num(census.N[i]) << ",0,0,0,,," << num(census.k[i])
        << ",,," << num(census.mu[i]) << '\n';
  }
  {
    std::ofstream f(out + "/edges.csv");
    f << "area_a,area_b\n";
    for (int i = 0; i + 1 < census.M(); ++i)
      f << "A" << i << ",A" << i + 1 << '\n';
  }
  for (int r = 0; r < reps; ++r) {
    SurveyDataset s = draw_sample(census, Rng::stream(get_seed(cfg), "rep", r));
    std::ofstream f(out + "/sample_" + std::to_string(r) + ".csv");
    f << "area_id,y,w_raw,k\n";
    for (const auto& rec : s.records)
      f << "A" << rec.area << ',' << rec.y << ',' << num(rec.w_raw) << ','
        << num(rec.x[0]) << '\n';
  }
  write_text(out + "/config_used.json", cfg.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_fit(const json& cfg, const std::string& out) {
  json paths = get_obj(cfg, "paths");
  for (const char* key : {"survey", "areas", "edges"})
    if (!paths.contains(key))
      throw ConfigError(std::string("paths.") + key + " missing");

  json bench_cfg = get_obj(cfg, "benchmark");
  std::vector<std::string> systems;
  if (bench_cfg.contains("systems"))
    systems = bench_cfg.at("systems").get<std::vector<std::string>>();

  LoadedAreas areas = load_areas(paths.at("areas"), systems);
  std::vector<std::string> ids;
  for (const auto& a : areas.frame.rows) ids.push_back(a.id);
  AreaGraph graph =
      load_graph(paths.at("edges"), get_obj(cfg, "graph"), ids, areas.index);
  LoadedSurvey survey =
      load_survey(paths.at("survey"), get_obj(cfg, "stage1"), areas.index);

  std::vector<double> populations;
  for (const auto& a : areas.frame.rows) populations.push_back(a.population);

  fs::create_directories(out);
  std::uint64_t seed = get_seed(cfg);
  json mcmc = get_obj(cfg, "mcmc");
  int t_tilde = mcmc.value("t_tilde", 500);

  WeightSet ws = rescale_weights(survey.data);
  auto sampled = survey.data.sampled_areas();
  std::vector<DirectEstimate> direct;
  for (int a : sampled)
    direct.push_back(hajek(survey.data, ws, a, populations[a]));
  double pop_all = 0.0;
  for (double p : populations) pop_all += p;
  DirectEstimate overall = pooled_direct(survey.data, sampled, pop_all);

  {
    csv::Table t;
    t.header = {"area_id", "mu_d", "psi_d", "n_i", "stable"};
    for (std::size_t k = 0; k < sampled.size(); ++k)
      t.rows.push_back({ids[sampled[k]], num(direct[k].mu_d),
                        std::isnan(direct[k].psi_d) ? "" : num(direct[k].psi_d),
                        num(direct[k].n_i), direct[k].stable ? "1" : "0"});
    csv::write_file(out + "/direct.csv", t);
    json nat;
    nat["overall_mu"] = overall.mu_d;
    nat["overall_psi"] = overall.psi_d;
    write_text(out + "/national.json", nat.dump(2) + "\n");
  }

  SampleConfig s1cfg = mcmc_config(mcmc, "stage1", seed, "s1");
  Stage1Fit s1 = fit_stage1(survey.data, ws, survey.spec, s1cfg);
  Eigen::MatrixXd pi = pi_draws(s1);
  int T = static_cast<int>(pi.rows());
  if (t_tilde > T) t_tilde = T;
  auto summaries = aggregate_stage1(pi, survey.data, ws, populations, t_tilde,
                                    Rng::stream(seed, "agg"));
  SmoothingMetrics sm =
      smoothing_metrics(pi, survey.data, ws, direct, sampled, overall.mu_d);

  write_chain_csvs(s1.dm, out, "stage1");
  {
    json d = diagnostics_json(s1.rhat, s1.ess, s1.dm);
    d["sr_median"] = sm.sr_median;
    d["alc"] = sm.alc;
    write_text(out + "/stage1_diagnostics.json", d.dump(2) + "\n");

    csv::Table th;
    th.header = {"area_id", "draw", "theta_s1"};
    csv::Table side;
    side.header = {"area_id", "tau_bar", "var_theta", "psi_d", "psi_b_mean", "n_i"};
    for (const auto& s : summaries) {
      for (std::size_t t = 0; t < s.theta_s1.size(); ++t)
        th.rows.push_back(
            {ids[s.area], std::to_string(t), num(s.theta_s1[t])});
      side.rows.push_back({ids[s.area], num(s.tau_bar), num(s.var_theta),
                           num(s.psi_d), num(s.psi_b_mean), num(s.n_i)});
    }
    csv::write_file(out + "/stage1_theta.csv", th);
    csv::write_file(out + "/stage1_summary.csv", side);
  }

  json s2json = get_obj(cfg, "stage2");
  Stage2Spec spec;
  spec.use_ses = s2json.value("use_ses", areas.frame.n_ses > 1);
  spec.use_remote = s2json.value("use_remote", areas.frame.n_remote > 1);
  spec.use_g = s2json.value("use_g", true);
  spec.varying_g = s2json.value("varying_g", areas.frame.n_remote > 1);
  spec.use_external = s2json.value("use_external", true);
  spec.spatial = s2json.value("spatial", true);
  spec.use_nesting = s2json.value("use_nesting", areas.frame.n_nest > 1);
  spec.joint_gvf = s2json.value("joint_gvf", true);
  spec.benchmark_p = bench_cfg.value("p", 0.5);
  if (!(spec.benchmark_p > 0.0)) throw ConfigError("benchmark p must be > 0");

  std::vector<BenchmarkGroup> groups;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    int ng = areas.frame.bench_group_counts[s];
    std::vector<int> gmap(areas.frame.M());
    for (int i = 0; i < areas.frame.M(); ++i)
      gmap[i] = areas.frame.rows[i].bench[s];
    auto est = aggregate_direct(survey.data, gmap, ng, populations);
    for (int g = 0; g < ng; ++g) {
      BenchmarkGroup bg;
      for (int i = 0; i < areas.frame.M(); ++i)
        if (gmap[i] == g) bg.areas.push_back(i);
      bg.target = est[g].mu_d;
      bg.var = est[g].psi_d;
      groups.push_back(std::move(bg));
    }
  }

  SampleConfig s2cfg = mcmc_config(mcmc, "stage2", seed, "s2");
  Stage2Fit s2 =
      fit_stage2(summaries, areas.frame, graph, spec, s2cfg, groups);

  write_chain_csvs(s2.dm, out, "stage2");
  {
    json d = diagnostics_json(s2.rhat, s2.ess, s2.dm);
    d["max_mu_rhat"] = s2.max_mu_rhat;
    write_text(out + "/stage2_diagnostics.json", d.dump(2) + "\n");
  }
  {
    Eigen::MatrixXd mu = s2.mu();
    std::ofstream f(out + "/mu_draws.csv");
    for (std::size_t k = 0; k < ids.size(); ++k)
      f << ids[k] << (k + 1 == ids.size() ? '\n' : ',');
    for (Eigen::Index t = 0; t < mu.rows(); ++t)
      for (Eigen::Index i = 0; i < mu.cols(); ++i)
        f << num(mu(t, i)) << (i + 1 == mu.cols() ? '\n' : ',');
  }
  write_text(out + "/config_used.json", cfg.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_summarize(const json& cfg, const std::string& out) {
  json paths = get_obj(cfg, "paths");
  std::string fit_dir = paths.value("fit_dir", out);
  for (const char* key : {"areas", "edges"})
    if (!paths.contains(key))
      throw ConfigError(std::string("paths.") + key + " missing");

  LoadedAreas areas = load_areas(paths.at("areas"), {});
  std::vector<std::string> ids;
  for (const auto& a : areas.frame.rows) ids.push_back(a.id);
  AreaGraph graph =
      load_graph(paths.at("edges"), get_obj(cfg, "graph"), ids, areas.index);

  json diag = load_config(fit_dir + "/stage2_diagnostics.json");
  double max_rhat = diag.value("max_mu_rhat", 2.0);
  if (!(max_rhat < 1.03)) {
    std::cerr << "diagnostics bar failed: max mu R-hat " << max_rhat << "\n";
    return kExitDiagnostics;
  }
  json nat = load_config(fit_dir + "/national.json");
  double national = nat.at("overall_mu").get<double>();

  csv::Table mt = csv::read_file(fit_dir + "/mu_draws.csv");
  if (mt.header != ids) throw ConfigError("mu_draws header disagrees with areas");
  Eigen::MatrixXd mu(mt.rows.size(), ids.size());
  for (std::size_t t = 0; t < mt.rows.size(); ++t)
    for (std::size_t i = 0; i < ids.size(); ++i)
      mu(t, i) = csv::to_double(mt.rows[t][i]);

  SummaryTable table = summarize_mu(mu, areas.frame, graph, national);
  fs::create_directories(out);
  csv::Table t;
  t.header = {"area_id", "median", "hpdi_lo", "hpdi_hi", "cv_pct",
              "or_median", "or_lo", "or_hi", "ep", "evidence"};
  for (const auto& r : table.rows)
    t.rows.push_back({r.id, num(r.median), num(r.hpdi_lo), num(r.hpdi_hi),
                      num(r.cv_pct), num(r.or_median), num(r.or_lo),
                      num(r.or_hi), num(r.ep), evidence_label(r.evidence)});
  csv::write_file(out + "/summaries.csv", t);
  json roll;
  roll["national_rollup"] = table.national_rollup;
  write_text(out + "/rollup.json", roll.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

CellResult run_cell(const SyntheticCensus& census, const SurveyDataset& sample,
                    double sigma_e, bool area_re, const SampleConfig& s1_cfg,
                    const SampleConfig& s2_cfg, int t_tilde) {
  CellResult r;
  r.sigma_e = sigma_e;
  r.area_re = area_re;
  try {
    WeightSet ws = rescale_weights(sample);
    auto sampled = sample.sampled_areas();
    std::vector<double> populations(census.N.begin(), census.N.end());
    std::vector<DirectEstimate> direct;
    for (int a : sampled)
      direct.push_back(hajek(sample, ws, a, populations[a]));
    double pop_all = 0.0;
    for (double p : populations) pop_all += p;
    DirectEstimate overall = pooled_direct(sample, sampled, pop_all);

    Stage1Spec spec;
    spec.include_area_effect = area_re;
    spec.residual_sd = sigma_e;

    Stage1Fit s1 = fit_stage1(sample, ws, spec, s1_cfg);
    Eigen::MatrixXd pi = pi_draws(s1);
    int tt = std::min<int>(t_tilde, static_cast<int>(pi.rows()));
    auto summaries = aggregate_stage1(pi, sample, ws, populations, tt,
                                      Rng::stream(s1_cfg.seed, "agg"));
    SmoothingMetrics sm =
        smoothing_metrics(pi, sample, ws, direct, sampled, overall.mu_d);
    r.sr_median = sm.sr_median;
    r.alc = sm.alc;

    AreaFrame frame = census_frame(census);
    AreaGraph graph = path_graph(census.M());
    Stage2Spec s2spec;
    s2spec.use_ses = false;
    s2spec.use_remote = false;
    s2spec.use_g = true;
    s2spec.varying_g = false;
    s2spec.use_external = false;
    s2spec.spatial = false;
    s2spec.use_nesting = false;
    Stage2Fit s2 = fit_stage2(summaries, frame, graph, s2spec, s2_cfg);
    r.max_mu_rhat = s2.max_mu_rhat;
    r.divergences = s2.divergences;

    Eigen::MatrixXd mu = s2.mu();
    int T = static_cast<int>(mu.rows());
    for (int i = 0; i < census.M(); ++i) {
      std::vector<double> draws(T);
      for (int t = 0; t < T; ++t) draws[t] = mu(t, i);
      AreaMetrics am = area_metrics(draws, census.mu[i]);
      r.marb += am.arb;
      r.mrrmse += am.rrmse;
      r.mean_width += am.width;
      if (am.covered) ++r.covered_count;
      ++r.areas_evaluated;
    }
    r.marb /= r.areas_evaluated;
    r.mrrmse /= r.areas_evaluated;
    r.mean_width /= r.areas_evaluated;
    r.coverage =
        static_cast<double>(r.covered_count) / r.areas_evaluated;
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

int cmd_experiment(const json& cfg, const std::string& out) {
  json exp = get_obj(cfg, "experiment");
  std::vector<double> sigma_grid =
      exp.value("sigma_e", std::vector<double>{0.25, 1.0, 2.0, 3.5});
  std::vector<bool> re_grid;
  if (exp.contains("area_re"))
    for (const auto& b : exp.at("area_re")) re_grid.push_back(b.get<bool>());
  else
    re_grid = {true, false};
  int reps = exp.value("replicates", 20);
  if (reps < 1 || sigma_grid.empty() || re_grid.empty())
    throw ConfigError("empty experiment grid");
  for (double s : sigma_grid)
    if (!(s > 0.0)) throw ConfigError("sigma_e values must be > 0");

  json sim = get_obj(cfg, "simulate");
  CensusConfig cc;
  std::uint64_t seed = get_seed(cfg);
  cc.seed = Rng::stream(seed, "census-root");
  cc.areas = sim.value("areas", 100);
  cc.u_lo = sim.value("u_lo", 0.1);
  cc.u_hi = sim.value("u_hi", 0.4);
  cc.g_sd = sim.value("g_sd", 0.01);
  cc.sampling_fraction = sim.value("sampling_fraction", 0.004);
  cc.sampled_areas = sim.value("sampled_areas", 60);
  SyntheticCensus census = generate_census(cc);

  json mcmc = get_obj(exp, "mcmc");
  int t_tilde = mcmc.value("t_tilde", 500);

  fs::create_directories(out);
  std::string tmp = out + "/experiment_results.csv.tmp";
  std::string final_path = out + "/experiment_results.csv";
  std::ofstream f(tmp);
  f << "sigma_e,area_re,replicate,sr_median,alc,marb,mrrmse,coverage,"
       "mean_width,max_mu_rhat,divergences,failed,error\n";

  for (int rep = 0; rep < reps; ++rep) {
    SurveyDataset sample = draw_sample(census, Rng::stream(seed, "rep", rep));
    for (double sig : sigma_grid)
      for (bool re : re_grid) {
        std::uint64_t cell_seed = Rng::mix(
            Rng::stream(seed, "cell", rep) ^
            (static_cast<std::uint64_t>(re) * 977) ^
            static_cast<std::uint64_t>(sig * 4096.0));
        SampleConfig s1c = mcmc_config(mcmc, "stage1", cell_seed, "s1");
        s1c.chains = get_obj(mcmc, "stage1").value("chains", 2);
        s1c.warmup = get_obj(mcmc, "stage1").value("warmup", 500);
        s1c.draws = get_obj(mcmc, "stage1").value("draws", 500);
        SampleConfig s2c = mcmc_config(mcmc, "stage2", cell_seed, "s2");
        s2c.chains = get_obj(mcmc, "stage2").value("chains", 2);
        s2c.warmup = get_obj(mcmc, "stage2").value("warmup", 500);
        s2c.draws = get_obj(mcmc, "stage2").value("draws", 500);

        CellResult r = run_cell(census, sample, sig, re, s1c, s2c, t_tilde);
        r.replicate = rep;
        f << num(r.sigma_e) << ',' << (r.area_re ? 1 : 0) << ',' << r.replicate
          << ',' << num(r.sr_median) << ',' << num(r.alc) << ',' << num(r.marb)
          << ',' << num(r.mrrmse) << ',' << num(r.coverage) << ','
          << num(r.mean_width) << ',' << num(r.max_mu_rhat) << ','
          << r.divergences << ',' << (r.failed ? 1 : 0) << ',' << r.error
          << '\n';
        f.flush();
      }
  }
  f.close();
  fs::rename(tmp, final_path);
  write_text(out + "/config_used.json", cfg.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_command(const std::string& command, const std::string& config_path,
                const std::string& out_override,
                std::optional<std::uint64_t> seed_override) {
  try {
    json cfg = load_config(config_path);
    if (seed_override) cfg["seed"] = *seed_override;
    std::string out = out_override;
    if (out.empty())
      out = get_obj(cfg, "paths").value("out", std::string("out"));

    if (command == "simulate") return cmd_simulate(cfg, out);
    if (command == "fit") return cmd_fit(cfg, out);
    if (command == "summarize") return cmd_summarize(cfg, out);
    if (command == "experiment") return cmd_experiment(cfg, out);
    std::cerr << "unknown command " << command << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Stage1Error& e) {
    std::cerr << "stage 1 failure: " << e.what() << "\n";
    return std::string(e.what()).find("DivergentChains") != std::string::npos
               ? kExitDiagnostics
               : kExitConfig;
  } catch (const Stage2Error& e) {
    std::cerr << "stage 2 failure: " << e.what() << "\n";
    return std::string(e.what()).find("DivergentChains") != std::string::npos
               ? kExitDiagnostics
               : kExitConfig;
  } catch (const SummaryError& e) {
    std::cerr << "summary failure: " << e.what() << "\n";
    return kExitDiagnostics;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace tsln::pipeline
