#include "tsln/stage2.hpp"

#include <algorithm>
#include <cmath>

#include "tsln/diagnostics.hpp"
#include "tsln/rng.hpp"
#include "tsln/util.hpp"

namespace tsln {

namespace {

std::vector<Vec> random_inits(const Model& model, int chains, std::uint64_t seed,
                              const std::string& label) {
  std::vector<Vec> out;
  for (int c = 0; c < chains; ++c) {
    Rng rng(Rng::stream(seed, label, c));
    Vec q(model.dim);
    for (int k = 0; k < model.dim; ++k) q[k] = 0.2 * rng.normal();
    out.push_back(std::move(q));
  }
  return out;
}

/// variance-function design row: intercept, log sample size, log population,
// first continuous covariate, median logit-scale stage-1 estimate
Eigen::RowVectorXd gvf_row(const Stage1AreaSummary& s, const AreaRow& a) {
  Eigen::RowVectorXd L(5);
  L << 1.0, std::log(s.n_i), std::log(a.population),
      (a.g.empty() ? 0.0 : a.g[0]), median(s.theta_s1);
  return L;
}

// variance scale taking imputed design variances from the proportion scale
// back to the logit scale
double logit_var_factor(const Stage1AreaSummary& s) {
  double q = clamp_proportion(s.mu_s1_median);
  double d = q * (1.0 - q);
  return 1.0 / (d * d);
}

struct GvfData {
  std::vector<int> stable_idx;    // indices into s1
  std::vector<int> unstable_idx;
  Eigen::MatrixXd L_stable;
  Eigen::MatrixXd L_unstable;
  std::vector<double> y_stable;   // log sqrt psi
};

GvfData build_gvf_data(const std::vector<Stage1AreaSummary>& s1,
                       const AreaFrame& frame) {
  GvfData g;
  for (std::size_t k = 0; k < s1.size(); ++k) {
    double psi = s1[k].psi_d + s1[k].psi_b_mean;
    if (s1[k].stable && psi > 0.0)
      g.stable_idx.push_back(static_cast<int>(k));
    else
      g.unstable_idx.push_back(static_cast<int>(k));
  }
  g.L_stable.resize(g.stable_idx.size(), 5);
  g.L_unstable.resize(g.unstable_idx.size(), 5);
  for (std::size_t r = 0; r < g.stable_idx.size(); ++r) {
    const auto& s = s1[g.stable_idx[r]];
    g.L_stable.row(r) = gvf_row(s, frame.rows[s.area]);
    g.y_stable.push_back(std::log(std::sqrt(s.psi_d + s.psi_b_mean)));
  }
  for (std::size_t r = 0; r < g.unstable_idx.size(); ++r) {
    const auto& s = s1[g.unstable_idx[r]];
    g.L_unstable.row(r) = gvf_row(s, frame.rows[s.area]);
  }
  return g;
}

}  // namespace

GvfFit fit_gvf(const std::vector<Stage1AreaSummary>& s1, const AreaFrame& frame,
               const SampleConfig& cfg) {
  GvfData gd = build_gvf_data(s1, frame);
  if (gd.stable_idx.size() < 10) throw Stage2Error("TooFewStableAreas");

  Model m;
  auto omega = m.add_params("omega", 5);
  int ls = m.add_param("log_sigma_gvf");
  GaussianRegressionTerm reg;
  reg.y = gd.y_stable;
  reg.L = gd.L_stable;
  reg.omega = omega;
  reg.log_sigma = ls;
  m.terms.push_back(std::move(reg));
  m.terms.push_back(GaussianPriorTerm{omega, 0.0, 2.0});
  m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 2.0});

  GvfFit fit;
  SampleConfig c2 = cfg;
  c2.stream_label = "gvf";
  fit.dm = sample(m, random_inits(m, c2.chains, c2.seed, "gvfinit"), c2);
  fit.omega_idx = omega;
  fit.log_sigma_idx = ls;

  fit.omega_mean.assign(5, 0.0);
  for (int k = 0; k < 5; ++k) fit.omega_mean[k] = mean(fit.dm.pooled(omega[k]));
  {
    auto lsd = fit.dm.pooled(ls);
    for (double& v : lsd) v = std::exp(v);
    fit.sigma_mean = mean(lsd);
  }

  // posterior-mean imputed tau per unstable area: psi = exp(2Lw + s^2)
  for (std::size_t r = 0; r < gd.unstable_idx.size(); ++r) {
    const auto& s = s1[gd.unstable_idx[r]];
    std::vector<double> tau_draws;
    int T = fit.dm.chains * fit.dm.draws;
    tau_draws.reserve(T);
    for (int c = 0; c < fit.dm.chains; ++c)
      for (int d = 0; d < fit.dm.draws; ++d) {
        double lin = 0.0;
        for (int k = 0; k < 5; ++k)
          lin += gd.L_unstable(r, k) * fit.dm.at(c, d, omega[k]);
        double sig = std::exp(fit.dm.at(c, d, ls));
        tau_draws.push_back(std::exp(2.0 * lin + sig * sig) * logit_var_factor(s));
      }
    fit.unstable_areas.push_back(s.area);
    fit.imputed_tau.push_back(mean(tau_draws));
  }
  return fit;
}

Stage2Fit fit_stage2(const std::vector<Stage1AreaSummary>& s1,
                     const AreaFrame& frame, const AreaGraph& graph,
                     const Stage2Spec& spec, const SampleConfig& cfg,
                     const std::vector<BenchmarkGroup>& benchmarks) {
  int M = frame.M();
  if (graph.M != M) throw Stage2Error("graph and frame disagree on area count");
  if (!graph.connected()) throw Stage2Error("DisconnectedGraph");
  for (const auto& s : s1)
    if (s.area < 0 || s.area >= M) throw Stage2Error("MissingSummary");

  Model m;
  int pred = m.add_predictor(M);

  // fixed part: intercept + categorical dummies (+ pooled G slopes)
  {
    int p = 1;
    if (spec.use_ses) p += frame.n_ses - 1;
    if (spec.use_remote) p += frame.n_remote - 1;
    int q = frame.rows.empty() ? 0 : static_cast<int>(frame.rows[0].g.size());
    if (spec.use_g && !spec.varying_g) p += q;
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(M, p);
    for (int i = 0; i < M; ++i) {
      int c = 0;
      Z(i, c++) = 1.0;
      if (spec.use_ses)
        for (int l = 1; l < frame.n_ses; ++l)
          Z(i, c++) = frame.rows[i].ses_decile == l ? 1.0 : 0.0;
      if (spec.use_remote)
        for (int l = 1; l < frame.n_remote; ++l)
          Z(i, c++) = frame.rows[i].remote_class == l ? 1.0 : 0.0;
      if (spec.use_g && !spec.varying_g)
        for (int k = 0; k < q; ++k) Z(i, c++) = frame.rows[i].g[k];
    }
    auto lambda = m.add_params("lambda", p);
    m.predictors[pred].effects.push_back(LinearEffect{Z, lambda});
    m.terms.push_back(StudentTPriorTerm{{lambda[0]}, 0.0, 2.0, 3.0});
    if (p > 1)
      m.terms.push_back(GaussianPriorTerm{
          std::vector<int>(lambda.begin() + 1, lambda.end()), 0.0, 2.0});
  }

  // G slopes varying by remoteness class, independent priors per class
  if (spec.use_g && spec.varying_g && !frame.rows.empty() &&
      !frame.rows[0].g.empty()) {
    int q = static_cast<int>(frame.rows[0].g.size());
    for (int r = 0; r < frame.n_remote; ++r) {
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(M, q);
      for (int i = 0; i < M; ++i)
        if (frame.rows[i].remote_class == r)
          for (int k = 0; k < q; ++k) G(i, k) = frame.rows[i].g[k];
      auto gam = m.add_params("gamma_r" + std::to_string(r), q);
      m.predictors[pred].effects.push_back(LinearEffect{G, gam});
      m.terms.push_back(GaussianPriorTerm{gam, 0.0, 2.0});
    }
  }

  // external latent field with classical measurement error
  if (spec.use_external) {
    std::vector<int> ext_areas;
    for (int i = 0; i < M; ++i)
      if (!std::isnan(frame.rows[i].ext_est)) ext_areas.push_back(i);
    if (!ext_areas.empty()) {
      int alpha = m.add_param("alpha");
      auto gam = m.add_params("gamma_ext", static_cast<int>(ext_areas.size()));
      ParamProductEffect eff;
      eff.coef = alpha;
      eff.idx.assign(M, -1);
      int gp = m.add_predictor(static_cast<int>(ext_areas.size()));
      IndexedEffect ge;
      ge.idx = gam;
      m.predictors[gp].effects.push_back(std::move(ge));
      GaussianObsTerm obs;
      obs.pred = gp;
      for (std::size_t k = 0; k < ext_areas.size(); ++k) {
        int i = ext_areas[k];
        eff.idx[i] = gam[k];
        obs.row.push_back(static_cast<int>(k));
        obs.ybar.push_back(frame.rows[i].ext_est);
        obs.msq.push_back(0.0);
        obs.weight.push_back(1.0);
        double se = frame.rows[i].ext_se;
        if (!(se > 0.0)) throw Stage2Error("nonpositive external se");
        obs.var.push_back(se * se);
      }
      m.predictors[pred].effects.push_back(std::move(eff));
      m.terms.push_back(std::move(obs));
      m.terms.push_back(GaussianPriorTerm{{alpha}, 0.0, 2.0});
      m.terms.push_back(GaussianPriorTerm{gam, 0.0, 2.0});
    }
  }

  // spatial (or plain exchangeable) area effect
  if (spec.spatial) {
    double kappa = icar_scaling_factor(graph);
    auto s_raw = m.add_params("zeta_s", M);
    auto v_raw = m.add_params("zeta_v", M);
    int lrho = m.add_param("logit_rho");
    int ls = m.add_param("log_sigma_zeta");
    Bym2Effect eff;
    eff.s_idx = s_raw;
    eff.v_idx = v_raw;
    eff.logit_rho = lrho;
    eff.log_sigma = ls;
    eff.kappa = kappa;
    m.predictors[pred].effects.push_back(std::move(eff));
    IcarPairwiseTerm icar;
    for (auto [a, b] : graph.edges) icar.edges.emplace_back(s_raw[a], s_raw[b]);
    m.terms.push_back(std::move(icar));
    m.terms.push_back(
        SoftSumToZeroTerm{s_raw, 0.001 * std::sqrt(static_cast<double>(M))});
    m.terms.push_back(GaussianPriorTerm{v_raw, 0.0, 1.0});
    m.terms.push_back(UniformLogitTerm{lrho});
    m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 2.0});
  } else {
    auto raw = m.add_params("zeta_iid", M);
    int ls = m.add_param("log_sigma_zeta");
    IndexedEffect eff;
    eff.idx = raw;
    eff.log_scale = ls;
    m.predictors[pred].effects.push_back(std::move(eff));
    m.terms.push_back(GaussianPriorTerm{raw, 0.0, 1.0});
    m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 2.0});
  }

  if (spec.use_nesting && frame.n_nest > 1) {
    auto raw = m.add_params("eta_nest", frame.n_nest);
    int ls = m.add_param("log_sigma_eta");
    IndexedEffect eff;
    eff.idx.resize(M);
    for (int i = 0; i < M; ++i) eff.idx[i] = raw[frame.rows[i].nest];
    eff.log_scale = ls;
    m.predictors[pred].effects.push_back(std::move(eff));
    m.terms.push_back(GaussianPriorTerm{raw, 0.0, 1.0});
    m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 2.0});
  }

  // likelihood: stage-1 draw vectors as downscaled Gaussian observations,
  // entered in sufficient-statistic form (exact)
  GvfData gd = build_gvf_data(s1, frame);
  {
    GaussianObsTerm obs;
    obs.pred = pred;
    for (int k : gd.stable_idx) {
      const auto& s = s1[k];
      double ybar = mean(s.theta_s1);
      double msq = 0.0;
      for (double v : s.theta_s1) msq += (v - ybar) * (v - ybar);
      msq /= static_cast<double>(s.theta_s1.size());
      obs.row.push_back(s.area);
      obs.ybar.push_back(ybar);
      obs.msq.push_back(msq);
      obs.weight.push_back(1.0);  // T_tilde draws times the 1/T_tilde downscale
      obs.var.push_back(s.tau_bar + s.var_theta);
    }
    if (!obs.row.empty()) m.terms.push_back(std::move(obs));
  }

  if (!gd.unstable_idx.empty()) {
    if (gd.stable_idx.size() < 10) throw Stage2Error("TooFewStableAreas");
    if (spec.joint_gvf) {
      auto omega = m.add_params("omega", 5);
      int ls = m.add_param("log_sigma_gvf");
      GaussianRegressionTerm reg;
      reg.y = gd.y_stable;
      reg.L = gd.L_stable;
      reg.omega = omega;
      reg.log_sigma = ls;
      m.terms.push_back(std::move(reg));
      m.terms.push_back(GaussianPriorTerm{omega, 0.0, 2.0});
      m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 2.0});

      GvfGaussianObsTerm obs;
      obs.pred = pred;
      obs.L = gd.L_unstable;
      obs.omega = omega;
      obs.log_sigma = ls;
      for (std::size_t r = 0; r < gd.unstable_idx.size(); ++r) {
        const auto& s = s1[gd.unstable_idx[r]];
        double ybar = mean(s.theta_s1);
        double msq = 0.0;
        for (double v : s.theta_s1) msq += (v - ybar) * (v - ybar);
        msq /= static_cast<double>(s.theta_s1.size());
        obs.row.push_back(s.area);
        obs.ybar.push_back(ybar);
        obs.msq.push_back(msq);
        obs.weight.push_back(1.0);
        obs.base_var.push_back(s.var_theta);
        obs.c.push_back(logit_var_factor(s));
      }
      m.terms.push_back(std::move(obs));
    } else {
      GvfFit gvf = fit_gvf(s1, frame, cfg);
      GaussianObsTerm obs;
      obs.pred = pred;
      for (std::size_t r = 0; r < gd.unstable_idx.size(); ++r) {
        const auto& s = s1[gd.unstable_idx[r]];
        double ybar = mean(s.theta_s1);
        double msq = 0.0;
        for (double v : s.theta_s1) msq += (v - ybar) * (v - ybar);
        msq /= static_cast<double>(s.theta_s1.size());
        obs.row.push_back(s.area);
        obs.ybar.push_back(ybar);
        obs.msq.push_back(msq);
        obs.weight.push_back(1.0);
        obs.var.push_back(gvf.imputed_tau[r] + s.var_theta);
      }
      m.terms.push_back(std::move(obs));
    }
  }

  if (!benchmarks.empty()) {
    BenchmarkTerm bt;
    bt.pred = pred;
    for (const auto& g : benchmarks) {
      if (g.areas.empty()) throw Stage2Error("EmptyGroup");
      if (!(g.var > 0.0)) throw Stage2Error("NonPositiveVariance");
      BenchmarkGroupData bg;
      double pop = 0.0;
      for (int i : g.areas) pop += frame.rows[i].population;
      for (int i : g.areas) {
        bg.rows.push_back(i);
        bg.wpop.push_back(frame.rows[i].population / pop);
      }
      bg.target = g.target;
      bg.sd = spec.benchmark_p * std::sqrt(g.var);
      bt.groups.push_back(std::move(bg));
    }
    m.terms.push_back(std::move(bt));
  }

  Stage2Fit fit;
  SampleConfig c2 = cfg;
  c2.stream_label = "s2chain";
  fit.dm = sample(m, random_inits(m, c2.chains, c2.seed, "s2init"), c2);
  fit.model = std::move(m);
  fit.theta_pred = pred;
  fit.chains = fit.dm.chains;
  fit.draws = fit.dm.draws;
  fit.divergences = fit.dm.total_divergences();
  if (fit.divergences > 0.01 * static_cast<double>(c2.chains) * c2.draws)
    throw Stage2Error("DivergentChains");

  int T = fit.chains * fit.draws;
  fit.theta.resize(T, M);
  Vec params(fit.dm.dim), th;
  int t = 0;
  for (int c = 0; c < fit.chains; ++c)
    for (int d = 0; d < fit.draws; ++d, ++t) {
      for (int k = 0; k < fit.dm.dim; ++k) params[k] = fit.dm.at(c, d, k);
      fit.model.eval_predictor(fit.theta_pred, params, th);
      for (int i = 0; i < M; ++i) fit.theta(t, i) = th[i];
    }

  // convergence bar on the area proportions themselves
  fit.mu_rhat.resize(M);
  fit.max_mu_rhat = 0.0;
  for (int i = 0; i < M; ++i) {
    std::vector<std::vector<double>> byc(fit.chains);
    for (int c = 0; c < fit.chains; ++c) {
      byc[c].reserve(fit.draws);
      for (int d = 0; d < fit.draws; ++d)
        byc[c].push_back(inv_logit(fit.theta(c * fit.draws + d, i)));
    }
    fit.mu_rhat[i] = split_rhat(byc);
    if (!std::isnan(fit.mu_rhat[i]))
      fit.max_mu_rhat = std::max(fit.max_mu_rhat, fit.mu_rhat[i]);
  }

  for (int k = 0; k < fit.dm.dim; ++k) {
    const std::string& nm = fit.dm.names[k];
    bool scalar = nm.find('[') == std::string::npos;
    if (!scalar) continue;
    auto re = rhat_ess(fit.dm.by_chain(k));
    fit.rhat[nm] = re.rhat;
    fit.ess[nm] = re.ess;
  }
  return fit;
}

Eigen::MatrixXd Stage2Fit::mu() const {
  Eigen::MatrixXd out(theta.rows(), theta.cols());
  for (Eigen::Index t = 0; t < theta.rows(); ++t)
    for (Eigen::Index i = 0; i < theta.cols(); ++i)
      out(t, i) = inv_logit(theta(t, i));
  return out;
}

Stage2Fit benchmark(const std::vector<Stage1AreaSummary>& s1,
                    const AreaFrame& frame, const AreaGraph& graph,
                    const Stage2Spec& spec, const SampleConfig& cfg,
                    const std::vector<BenchmarkGroup>& groups) {
  return fit_stage2(s1, frame, graph, spec, cfg, groups);
}

}  // namespace tsln
