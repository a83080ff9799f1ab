#include "tsln/summaries.hpp"

#include <cmath>

#include "tsln/survey.hpp"
#include "tsln/util.hpp"

namespace tsln {

std::string evidence_label(Evidence e) {
  switch (e) {
    case Evidence::HC: return "HC";
    case Evidence::H: return "H";
    case Evidence::N: return "N";
    case Evidence::L: return "L";
    case Evidence::LC: return "LC";
  }
  return "N";
}

Eigen::MatrixXd odds_ratio_draws(const Eigen::MatrixXd& mu, double national) {
  if (!(national > 0.0 && national < 1.0))
    throw SummaryError("DegenerateNational");
  double denom = national / (1.0 - national);
  Eigen::MatrixXd out(mu.rows(), mu.cols());
  for (Eigen::Index t = 0; t < mu.rows(); ++t)
    for (Eigen::Index i = 0; i < mu.cols(); ++i) {
      double m = mu(t, i);
      out(t, i) = (m / (1.0 - m)) / denom;
    }
  return out;
}

double exceedance(const std::vector<double>& or_draws) {
  if (or_draws.size() < 100) throw SummaryError("TooFewDraws");
  double c = 0.0;
  for (double v : or_draws)
    if (v > 1.0) c += 1.0;
  return c / static_cast<double>(or_draws.size());
}

std::vector<Evidence> lisa_classify(const Eigen::MatrixXd& mu, double national,
                                    const AreaGraph& g) {
  int M = g.M;
  if (mu.cols() != M) throw SummaryError("DrawCountMismatch");
  int T = static_cast<int>(mu.rows());
  auto wts = row_standardize(g);
  std::vector<double> pz(M, 0.0), pl(M, 0.0);
  std::vector<double> z(M);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < M; ++i) z[i] = mu(t, i) - national;
    for (int i = 0; i < M; ++i) {
      double lag = 0.0;
      for (int k = g.nbr_offset[i]; k < g.nbr_offset[i + 1]; ++k)
        lag += wts[k] * z[g.nbr[k]];
      if (z[i] > 0.0) pz[i] += 1.0;
      if (lag > 0.0) pl[i] += 1.0;
    }
  }
  std::vector<Evidence> out(M);
  for (int i = 0; i < M; ++i) {
    double a = pz[i] / T, b = pl[i] / T;
    if (a > 0.8 && b > 0.8)
      out[i] = Evidence::HC;
    else if (a > 0.8 && b <= 0.8)
      out[i] = Evidence::H;
    else if (a < 0.2 && b < 0.2)
      out[i] = Evidence::LC;
    else if (a < 0.2 && b >= 0.2)
      out[i] = Evidence::L;
    else
      out[i] = Evidence::N;
  }
  return out;
}

SummaryTable summarize_mu(const Eigen::MatrixXd& mu, const AreaFrame& frame,
                          const AreaGraph& graph, double national) {
  int M = frame.M();
  int T = static_cast<int>(mu.rows());
  Eigen::MatrixXd od = odds_ratio_draws(mu, national);
  auto evidence = lisa_classify(mu, national, graph);
  SummaryTable table;
  double pop_total = 0.0;
  for (int i = 0; i < M; ++i) pop_total += frame.rows[i].population;
  for (int i = 0; i < M; ++i) {
    std::vector<double> md(T), ord(T);
    for (int t = 0; t < T; ++t) {
      md[t] = mu(t, i);
      ord[t] = od(t, i);
    }
    AreaSummaryRow r;
    r.id = frame.rows[i].id;
    r.median = median(md);
    auto [lo, hi] = hpdi(md, 0.95);
    r.hpdi_lo = lo;
    r.hpdi_hi = hi;
    double sd = std::sqrt(std::max(0.0, variance(md)));
    r.cv_pct = r.median == 0.0 ? 0.0 : cv(r.median, sd);
    r.or_median = median(ord);
    auto [olo, ohi] = hpdi(ord, 0.95);
    r.or_lo = olo;
    r.or_hi = ohi;
    r.ep = exceedance(ord);
    r.evidence = evidence[i];
    table.national_rollup += frame.rows[i].population / pop_total * r.median;
    table.rows.push_back(std::move(r));
  }
  return table;
}

SummaryTable summarize(const Stage2Fit& fit, const AreaFrame& frame,
                       const AreaGraph& graph, double national) {
  if (fit.max_mu_rhat >= 1.03) throw SummaryError("DiagnosticsFailed");
  return summarize_mu(fit.mu(), frame, graph, national);
}

}  // namespace tsln
