#ifndef TSLN_METRICS_HPP
#define TSLN_METRICS_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace tsln {

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AreaMetrics {
  double arb = 0.0;    // |posterior-mean bias| / truth
  double rrmse = 0.0;  // root mean square error / truth
  bool covered = false;
  double width = 0.0;  // 95% HPDI width
};

AreaMetrics area_metrics(const std::vector<double>& draws, double truth);

// fraction of the HPDI covered by the confidence interval
double interval_overlap(double hpdi_lo, double hpdi_hi, double ci_lo,
                        double ci_hi);

struct GroupTarget {
  std::vector<int> areas;
  double estimate = 0.0;  // group direct estimate
  double var = 0.0;       // its sampling variance
};

struct GroupMetrics {
  double marb = 0.0;
  double mrrmse = 0.0;
  double miop = 0.0;
  std::vector<double> iop;
};

// population-weighted group aggregates per draw, compared against group
// direct estimates and their 95% confidence intervals
GroupMetrics group_metrics(const Eigen::MatrixXd& mu,
                           const std::vector<double>& populations,
                           const std::vector<GroupTarget>& groups);

}  // namespace tsln

#endif
