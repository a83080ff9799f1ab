#ifndef TSLN_SUMMARIES_HPP
#define TSLN_SUMMARIES_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tsln/graph.hpp"
#include "tsln/stage2.hpp"

namespace tsln {

struct SummaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Evidence { HC, H, N, L, LC };

std::string evidence_label(Evidence e);

// mu: draws x areas; national: overall direct estimate
Eigen::MatrixXd odds_ratio_draws(const Eigen::MatrixXd& mu, double national);

double exceedance(const std::vector<double>& or_draws);

// five-way spatial evidence labels from own and neighborhood-lag exceedance
std::vector<Evidence> lisa_classify(const Eigen::MatrixXd& mu, double national,
                                    const AreaGraph& g);

struct AreaSummaryRow {
  std::string id;
  double median = 0.0;
  double hpdi_lo = 0.0;
  double hpdi_hi = 0.0;
  double cv_pct = 0.0;
  double or_median = 0.0;
  double or_lo = 0.0;
  double or_hi = 0.0;
  double ep = 0.0;
  Evidence evidence = Evidence::N;
};

struct SummaryTable {
  std::vector<AreaSummaryRow> rows;
  double national_rollup = 0.0;  // population-weighted mean of medians
};

SummaryTable summarize(const Stage2Fit& fit, const AreaFrame& frame,
                       const AreaGraph& graph, double national);

// same computation from a plain mu draw matrix (used by the CLI after reload)
SummaryTable summarize_mu(const Eigen::MatrixXd& mu, const AreaFrame& frame,
                          const AreaGraph& graph, double national);

}  // namespace tsln

#endif
