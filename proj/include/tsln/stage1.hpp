#ifndef TSLN_STAGE1_HPP
#define TSLN_STAGE1_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsln/hmc.hpp"
#include "tsln/survey.hpp"

namespace tsln {

struct Stage1Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Stage1Spec {
  std::vector<int> continuous;  // indices into record.x
  struct FixedFactor {
    int cat = 0;          // index into record.cat
    int cardinality = 0;
    int reference = 0;    // level dropped from the dummy block
  };
  std::vector<FixedFactor> fixed_factors;
  std::vector<int> re_factors;        // record.cat indices with exchangeable REs
  bool include_area_effect = true;
  double residual_sd = 2.0;           // fixed sd of the individual residual
  bool qr_whiten = false;             // optional fixed-effect pre-whitening
};

struct Stage1Fit {
  Model model;
  int eta_pred = -1;
  DrawMatrix dm;
  std::map<std::string, double> rhat;
  std::map<std::string, double> ess;
  int divergences = 0;
};

// Weighted-likelihood logistic mixed model over individuals; individual
// residual has fixed prior sd (the smoothing knob), everything else gets the
// standard weakly informative priors.
Stage1Fit fit_stage1(const SurveyDataset& d, const WeightSet& ws,
                     const Stage1Spec& spec, const SampleConfig& cfg);

// rows = posterior draws (pooled over chains), cols = individuals
Eigen::MatrixXd pi_draws(const Stage1Fit& fit);

struct Stage1AreaSummary {
  int area = -1;
  std::vector<double> theta_s1;  // subsampled logit-scale draws, length T_tilde
  double tau_bar = 0.0;
  double var_theta = 0.0;
  double psi_d = 0.0;
  double psi_b_mean = 0.0;
  double n_i = 0.0;
  double mu_d = 0.0;
  bool stable = false;
  double mu_s1_median = 0.0;
  double clamp_rate = 0.0;
  bool degenerate = false;  // clamp fired on >5% of draws
};

std::vector<Stage1AreaSummary> aggregate_stage1(
    const Eigen::MatrixXd& pi, const SurveyDataset& d, const WeightSet& ws,
    const std::vector<double>& populations, int t_tilde, std::uint64_t seed);

struct SmoothingMetrics {
  std::vector<double> sr_draws;
  double sr_median = 0.0;
  double alc = 0.0;
};

SmoothingMetrics smoothing_metrics(const Eigen::MatrixXd& pi,
                                   const SurveyDataset& d, const WeightSet& ws,
                                   const std::vector<DirectEstimate>& direct,
                                   const std::vector<int>& direct_area,
                                   double overall_mu);

}  // namespace tsln

#endif
