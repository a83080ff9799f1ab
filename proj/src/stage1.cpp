#include "tsln/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tsln/diagnostics.hpp"
#include "tsln/rng.hpp"
#include "tsln/util.hpp"

namespace tsln {

namespace {

Eigen::MatrixXd design_matrix(const SurveyDataset& d, const Stage1Spec& spec) {
  int n = d.n();
  int p = 1 + static_cast<int>(spec.continuous.size());
  for (const auto& f : spec.fixed_factors) p += f.cardinality - 1;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
  for (int j = 0; j < n; ++j) {
    const auto& r = d.records[j];
    int c = 0;
    X(j, c++) = 1.0;
    for (int k : spec.continuous) X(j, c++) = r.x[k];
    for (const auto& f : spec.fixed_factors) {
      int lvl = r.cat[f.cat];
      for (int l = 0; l < f.cardinality; ++l) {
        if (l == f.reference) continue;
        if (lvl == l) X(j, c) = 1.0;
        ++c;
      }
    }
  }
  return X;
}

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

}  // namespace

Stage1Fit fit_stage1(const SurveyDataset& d, const WeightSet& ws,
                     const Stage1Spec& spec, const SampleConfig& cfg) {
  Eigen::MatrixXd X = design_matrix(d, spec);
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols())
      throw Stage1Error("RankDeficientDesign");
  }
  Eigen::MatrixXd R;  // whitening transform, identity when disabled
  if (spec.qr_whiten) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    R = qr.matrixQR().topRows(X.cols()).triangularView<Eigen::Upper>();
    double s = std::sqrt(static_cast<double>(X.rows()) - 1.0);
    R /= s;
    X = X * R.inverse();
  }

  Model m;
  int n = d.n();
  int pred = m.add_predictor(n);
  auto beta = m.add_params("beta", static_cast<int>(X.cols()));
  m.predictors[pred].effects.push_back(LinearEffect{X, beta});

  // priors: student-t on the intercept, normal on the rest
  m.terms.push_back(StudentTPriorTerm{{beta[0]}, 0.0, 2.0, 3.0});
  if (beta.size() > 1)
    m.terms.push_back(GaussianPriorTerm{
        std::vector<int>(beta.begin() + 1, beta.end()), 0.0, 2.0});

  if (spec.include_area_effect) {
    int ls = m.add_param("log_sigma_area");
    auto raw = m.add_params("area_raw", d.M);
    IndexedEffect eff;
    eff.idx.resize(n);
    for (int j = 0; j < n; ++j) eff.idx[j] = raw[d.records[j].area];
    eff.log_scale = ls;
    m.predictors[pred].effects.push_back(std::move(eff));
    m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 1.0});
    m.terms.push_back(GaussianPriorTerm{raw, 0.0, 1.0});
  }

  for (std::size_t f = 0; f < spec.re_factors.size(); ++f) {
    int cat = spec.re_factors[f];
    int card = d.cat_cardinality[cat];
    int ls = m.add_param("log_sigma_g" + std::to_string(f));
    auto raw = m.add_params("g" + std::to_string(f) + "_raw", card);
    IndexedEffect eff;
    eff.idx.resize(n);
    for (int j = 0; j < n; ++j) eff.idx[j] = raw[d.records[j].cat[cat]];
    eff.log_scale = ls;
    m.predictors[pred].effects.push_back(std::move(eff));
    m.terms.push_back(HalfNormalLogScaleTerm{{ls}, 1.0});
    m.terms.push_back(GaussianPriorTerm{raw, 0.0, 1.0});
  }

  // individual residual, fixed scale
  {
    auto raw = m.add_params("eps_raw", n);
    IndexedEffect eff;
    eff.idx = raw;
    eff.const_scale = spec.residual_sd;
    m.predictors[pred].effects.push_back(std::move(eff));
    m.terms.push_back(GaussianPriorTerm{raw, 0.0, 1.0});
  }

  BernoulliLogitTerm lik;
  lik.pred = pred;
  lik.y.resize(n);
  lik.weight = ws.w_tilde;
  for (int j = 0; j < n; ++j) lik.y[j] = static_cast<double>(d.records[j].y);
  m.terms.push_back(std::move(lik));

  Stage1Fit fit;
  fit.dm = sample(m, random_inits(m, cfg.chains, cfg.seed, "s1init"), cfg);
  fit.model = std::move(m);
  fit.eta_pred = pred;
  fit.divergences = fit.dm.total_divergences();
  if (fit.divergences >
      0.01 * static_cast<double>(cfg.chains) * cfg.draws)
    throw Stage1Error("DivergentChains");
  for (int k = 0; k < fit.dm.dim; ++k) {
    // full per-parameter diagnostics only for non-individual parameters
    if (fit.dm.names[k].rfind("eps_raw", 0) == 0) continue;
    auto re = rhat_ess(fit.dm.by_chain(k));
    fit.rhat[fit.dm.names[k]] = re.rhat;
    fit.ess[fit.dm.names[k]] = re.ess;
  }
  return fit;
}

Eigen::MatrixXd pi_draws(const Stage1Fit& fit) {
  int T = fit.dm.chains * fit.dm.draws;
  int n = fit.model.predictors[fit.eta_pred].rows;
  Eigen::MatrixXd out(T, n);
  Vec params(fit.dm.dim), eta;
  int t = 0;
  for (int c = 0; c < fit.dm.chains; ++c)
    for (int dd = 0; dd < fit.dm.draws; ++dd, ++t) {
      for (int k = 0; k < fit.dm.dim; ++k) params[k] = fit.dm.at(c, dd, k);
      fit.model.eval_predictor(fit.eta_pred, params, eta);
      for (int j = 0; j < n; ++j) out(t, j) = inv_logit(eta[j]);
    }
  return out;
}

std::vector<Stage1AreaSummary> aggregate_stage1(
    const Eigen::MatrixXd& pi, const SurveyDataset& d, const WeightSet& ws,
    const std::vector<double>& populations, int t_tilde, std::uint64_t seed) {
  int T = static_cast<int>(pi.rows());
  if (T < t_tilde) throw Stage1Error("fewer draws than T_tilde");

  // common subsample of draw indices across areas
  std::vector<int> sub(T);
  for (int t = 0; t < T; ++t) sub[t] = t;
  Rng rng(Rng::stream(seed, "ttilde"));
  for (int t = T - 1; t > 0; --t)
    std::swap(sub[t], sub[rng.below(static_cast<std::uint64_t>(t) + 1)]);
  sub.resize(t_tilde);
  std::sort(sub.begin(), sub.end());

  auto rows = d.area_rows();
  std::vector<Stage1AreaSummary> out;
  for (int i = 0; i < d.M; ++i) {
    if (rows[i].empty()) continue;
    const auto& rr = rows[i];
    std::vector<double> w, y;
    for (int j : rr) {
      w.push_back(ws.w[j]);
      y.push_back(static_cast<double>(d.records[j].y));
    }
    double N = populations[i];
    double mu_d = hajek_mean(w, y);
    double psi_d = hajek_variance(w, y, mu_d, N);
    if (std::isnan(psi_d)) psi_d = 0.0;

    Stage1AreaSummary s;
    s.area = i;
    s.psi_d = psi_d;
    s.n_i = static_cast<double>(rr.size());
    s.mu_d = mu_d;
    s.stable = rr.size() >= 2 && mu_d > 0.0 && mu_d < 1.0;

    std::vector<double> theta(T), tau(T), mu_s1(T);
    double psi_b_sum = 0.0;
    int clamped = 0;
    std::vector<double> pvec(rr.size()), dvec(rr.size());
    for (int t = 0; t < T; ++t) {
      for (std::size_t j = 0; j < rr.size(); ++j) {
        pvec[j] = pi(t, rr[j]);
        dvec[j] = pvec[j] - y[j];
      }
      double mu = hajek_mean(w, pvec);
      double b = hajek_mean(w, dvec);
      double vb = hajek_variance(w, dvec, b, N);
      if (std::isnan(vb)) vb = 0.0;
      double psi = psi_d + vb;
      psi_b_sum += vb;
      double muc = clamp_proportion(mu);
      if (muc != mu) ++clamped;
      theta[t] = logit(muc);
      double q = muc * (1.0 - muc);
      tau[t] = psi / (q * q);
      mu_s1[t] = mu;
    }
    s.tau_bar = mean(tau);
    s.var_theta = variance(theta);
    s.psi_b_mean = psi_b_sum / T;
    s.mu_s1_median = median(mu_s1);
    s.clamp_rate = static_cast<double>(clamped) / T;
    s.degenerate = s.clamp_rate > 0.05;
    s.theta_s1.reserve(t_tilde);
    for (int t : sub) s.theta_s1.push_back(theta[t]);
    out.push_back(std::move(s));
  }
  return out;
}

SmoothingMetrics smoothing_metrics(const Eigen::MatrixXd& pi,
                                   const SurveyDataset& d, const WeightSet& ws,
                                   const std::vector<DirectEstimate>& direct,
                                   const std::vector<int>& direct_area,
                                   double overall_mu) {
  auto rows = d.area_rows();
  int T = static_cast<int>(pi.rows());
  SmoothingMetrics out;

  // denominator: weighted absolute residuals about the overall direct estimate
  double denom = 0.0;
  std::vector<std::vector<double>> w_by(d.M), y_by(d.M);
  std::vector<int> sampled;
  for (int i = 0; i < d.M; ++i) {
    if (rows[i].empty()) continue;
    sampled.push_back(i);
    double s = 0.0;
    for (int j : rows[i]) {
      w_by[i].push_back(ws.w[j]);
      y_by[i].push_back(static_cast<double>(d.records[j].y));
      s += ws.w[j] * (static_cast<double>(d.records[j].y) - overall_mu);
    }
    denom += std::abs(s / static_cast<double>(rows[i].size()));
  }
  if (denom == 0.0) throw Stage1Error("degenerate smoothing denominator");

  out.sr_draws.resize(T);
  for (int t = 0; t < T; ++t) {
    double num = 0.0;
    for (int i : sampled) {
      double s = 0.0;
      const auto& rr = rows[i];
      for (std::size_t j = 0; j < rr.size(); ++j)
        s += w_by[i][j] * (y_by[i][j] - pi(t, rr[j]));
      num += std::abs(s / static_cast<double>(rr.size()));
    }
    out.sr_draws[t] = 1.0 - num / denom;
  }
  out.sr_median = median(out.sr_draws);

  // weighted regression of stage-1 medians on direct estimates
  std::vector<double> xs, ys, wts;
  for (std::size_t a = 0; a < direct.size(); ++a) {
    const auto& e = direct[a];
    if (!e.stable) continue;
    int i = direct_area[a];
    std::vector<double> mu_t(T);
    for (int t = 0; t < T; ++t) {
      std::vector<double> pvec(rows[i].size());
      for (std::size_t j = 0; j < rows[i].size(); ++j) pvec[j] = pi(t, rows[i][j]);
      mu_t[t] = hajek_mean(w_by[i], pvec);
    }
    xs.push_back(e.mu_d);
    ys.push_back(median(mu_t));
    wts.push_back(1.0 / e.psi_d);
  }
  if (xs.size() < 2) throw Stage1Error("NoStableAreas");
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sw += wts[k];
    sx += wts[k] * xs[k];
    sy += wts[k] * ys[k];
    sxx += wts[k] * xs[k] * xs[k];
    sxy += wts[k] * xs[k] * ys[k];
  }
  out.alc = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
  return out;
}

}  // namespace tsln
