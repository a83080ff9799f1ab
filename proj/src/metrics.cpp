#include "tsln/metrics.hpp"

#include <cmath>

#include "tsln/util.hpp"

namespace tsln {

AreaMetrics area_metrics(const std::vector<double>& draws, double truth) {
  if (!(truth > 0.0 && truth < 1.0)) throw MetricsError("ZeroTruth");
  AreaMetrics m;
  double bias = 0.0, mse = 0.0;
  for (double v : draws) {
    bias += v - truth;
    mse += (v - truth) * (v - truth);
  }
  double T = static_cast<double>(draws.size());
  m.arb = std::abs(bias / T) / truth;
  m.rrmse = std::sqrt(mse / T) / truth;
  auto [lo, hi] = hpdi(draws, 0.95);
  m.covered = truth >= lo && truth <= hi;
  m.width = hi - lo;
  return m;
}

double interval_overlap(double hpdi_lo, double hpdi_hi, double ci_lo,
                        double ci_hi) {
  double w = hpdi_hi - hpdi_lo;
  if (w <= 0.0) return (hpdi_lo >= ci_lo && hpdi_lo <= ci_hi) ? 1.0 : 0.0;
  double ov = std::min(hpdi_hi, ci_hi) - std::max(hpdi_lo, ci_lo);
  return std::min(1.0, std::max(0.0, ov / w));
}

GroupMetrics group_metrics(const Eigen::MatrixXd& mu,
                           const std::vector<double>& populations,
                           const std::vector<GroupTarget>& groups) {
  GroupMetrics out;
  int T = static_cast<int>(mu.rows());
  for (const auto& g : groups) {
    if (g.areas.empty()) throw MetricsError("EmptyGroup");
    double pop = 0.0;
    for (int i : g.areas) pop += populations[i];
    std::vector<double> agg(T, 0.0);
    for (int i : g.areas) {
      double w = populations[i] / pop;
      for (int t = 0; t < T; ++t) agg[t] += w * mu(t, i);
    }
    double bias = 0.0, mse = 0.0;
    for (double v : agg) {
      double e = g.estimate - v;
      bias += e;
      mse += e * e;
    }
    out.marb += std::abs(bias / T / g.estimate);
    out.mrrmse += std::sqrt(mse / T) / g.estimate;
    auto [lo, hi] = hpdi(agg, 0.95);
    double half = 1.959963984540054 * std::sqrt(g.var);
    out.iop.push_back(
        interval_overlap(lo, hi, g.estimate - half, g.estimate + half));
    out.miop += out.iop.back();
  }
  double K = static_cast<double>(groups.size());
  out.marb /= K;
  out.mrrmse /= K;
  out.miop /= K;
  return out;
}

}  // namespace tsln
